"""Co-participation graph of record holders and its modularity communities."""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

_TIE = 1e-12


def node_key(label: str):
    """Sort sighted events before blindfold ones, then by cube size."""
    m = re.fullmatch(r"(\d+)(\D*)", label)
    if m:
        return (m.group(2), int(m.group(1)), label)
    return ("~", 0, label)


@dataclass(frozen=True)
class CompetitorGraph:
    """Undirected weighted graph over events.

    ``counts[e]`` is the number of distinct record holders of event ``e``;
    ``edges[(u, v)]`` (with ``u`` before ``v`` in ``node_key`` order) is the
    number of people holding records in both.
    """

    counts: Mapping[str, int]
    edges: Mapping[tuple, int] = field(default_factory=dict)

    def __post_init__(self):
        for e, c in self.counts.items():
            if c < 1:
                raise ValueError(f"node {e!r} has no record holders")
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError("self-loops are not allowed")
            if u not in self.counts or v not in self.counts:
                raise ValueError(f"edge ({u}, {v}) has an unknown endpoint")
            if w <= 0:
                raise ValueError("edge weights must be positive")

    @property
    def nodes(self) -> list[str]:
        return sorted(self.counts, key=node_key)

    @property
    def total_weight(self) -> float:
        return float(sum(self.edges.values()))

    def weight(self, u: str, v: str) -> float:
        if node_key(u) > node_key(v):
            u, v = v, u
        return float(self.edges.get((u, v), 0))

    def degree(self, u: str) -> float:
        return float(sum(w for e, w in self.edges.items() if u in e))

    def unweighted(self) -> "CompetitorGraph":
        return CompetitorGraph(dict(self.counts), {e: 1 for e in self.edges})

    def scaled(self, c: float) -> "CompetitorGraph":
        return CompetitorGraph(dict(self.counts), {e: w * c for e, w in self.edges.items()})

    def relabeled(self, mapping: Mapping[str, str]) -> "CompetitorGraph":
        counts = {mapping[k]: v for k, v in self.counts.items()}
        edges = {}
        for (u, v), w in self.edges.items():
            a, b = sorted((mapping[u], mapping[v]), key=node_key)
            edges[(a, b)] = w
        return CompetitorGraph(counts, edges)

    def edges_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u", "v", "weight"])
        for (u, v) in sorted(self.edges, key=lambda e: (node_key(e[0]), node_key(e[1]))):
            w.writerow([u, v, _num(self.edges[(u, v)])])
        return buf.getvalue()

    def nodes_csv(self) -> str:
        lines = ["node,count"] + [f"{n},{self.counts[n]}" for n in self.nodes]
        return "\n".join(lines) + "\n"

    def to_dot(self, assignment: Optional["CommunityAssignment"] = None) -> str:
        lines = ["graph competitors {"]
        for n in self.nodes:
            attrs = [f'label="{n} ({self.counts[n]})"']
            if assignment is not None:
                attrs.append(f"community={assignment.mapping[n]}")
            lines.append(f'  "{n}" [{", ".join(attrs)}];')
        for (u, v) in sorted(self.edges, key=lambda e: (node_key(e[0]), node_key(e[1]))):
            lines.append(f'  "{u}" -- "{v}" [weight={_num(self.edges[(u, v)])}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, nodes_text: str, edges_text: str) -> "CompetitorGraph":
        counts = {r["node"]: int(r["count"]) for r in csv.DictReader(io.StringIO(nodes_text))}
        edges = {}
        for r in csv.DictReader(io.StringIO(edges_text)):
            u, v = sorted((r["u"], r["v"]), key=node_key)
            w = float(r["weight"])
            edges[(u, v)] = int(w) if w.is_integer() else w
        return cls(counts, edges)


def _num(x):
    return int(x) if float(x).is_integer() else x


def build_graph(records: Iterable[tuple]) -> CompetitorGraph:
    """``records`` are (person_id, event) pairs, one per record set."""
    holders: dict[str, set] = {}
    for person, event in records:
        holders.setdefault(event, set()).add(person)
    if not holders:
        raise ValueError("no records given")
    counts = {e: len(p) for e, p in holders.items()}
    edges = {}
    for u, v in combinations(sorted(holders, key=node_key), 2):
        shared = len(holders[u] & holders[v])
        if shared:
            edges[(u, v)] = shared
    return CompetitorGraph(counts, edges)


@dataclass(frozen=True)
class CommunityAssignment:
    mapping: Mapping[str, int]
    Q: float

    def communities(self) -> list[list[str]]:
        groups: dict[int, list] = {}
        for n in sorted(self.mapping, key=node_key):
            groups.setdefault(self.mapping[n], []).append(n)
        return [groups[k] for k in sorted(groups)]

    def to_csv(self) -> str:
        lines = ["node,community"] + [f"{n},{self.mapping[n]}" for n in sorted(self.mapping, key=node_key)]
        return "\n".join(lines) + "\n"


def _canonical(groups: Iterable[Iterable[str]]) -> dict[str, int]:
    ordered = sorted((sorted(g, key=node_key) for g in groups), key=lambda g: node_key(g[0]))
    return {n: i for i, g in enumerate(ordered) for n in g}


def modularity(graph: CompetitorGraph, partition) -> float:
    """Weighted Newman modularity. ``partition`` is a CommunityAssignment or node -> id map."""
    mapping = partition.mapping if isinstance(partition, CommunityAssignment) else partition
    if not graph.counts:
        raise ValueError("empty graph")
    if set(mapping) != set(graph.counts):
        raise ValueError("partition must assign every node exactly once")
    m = graph.total_weight
    if m == 0:
        return 0.0
    inner: dict = {}
    degree: dict = {}
    for (u, v), w in graph.edges.items():
        cu, cv = mapping[u], mapping[v]
        degree[cu] = degree.get(cu, 0.0) + w
        degree[cv] = degree.get(cv, 0.0) + w
        if cu == cv:
            inner[cu] = inner.get(cu, 0.0) + w
    return sum(inner.get(c, 0.0) / m - (d / (2 * m)) ** 2 for c, d in degree.items())


def greedy_communities(graph: CompetitorGraph) -> CommunityAssignment:
    """Agglomerate communities by largest modularity gain, keep the best partition seen.

    Only communities joined by an edge are merged. Near-equal gains go to
    the pair whose first members come first in ``node_key`` order, so the
    result does not depend on insertion order.
    """
    nodes = graph.nodes
    if not nodes:
        raise ValueError("empty graph")
    m = graph.total_weight
    groups = [[n] for n in nodes]
    if m == 0:
        return CommunityAssignment(_canonical(groups), 0.0)
    a = [graph.degree(n) / (2 * m) for n in nodes]
    between = {}
    for (u, v), w in graph.edges.items():
        i, j = sorted((nodes.index(u), nodes.index(v)))
        between[(i, j)] = between.get((i, j), 0.0) + w / m
    alive = list(range(len(nodes)))
    Q = -sum(x * x for x in a)
    best_Q, best_groups = Q, [list(g) for g in groups]
    while True:
        cand = [(e - 2 * a[i] * a[j], i, j) for (i, j), e in between.items()]
        if not cand:
            break
        top = max(c[0] for c in cand)
        tied = [c for c in cand if c[0] >= top - _TIE * max(1.0, abs(top))]
        gain, i, j = min(tied, key=lambda c: (node_key(groups[c[1]][0]), node_key(groups[c[2]][0])))
        groups[i] = sorted(groups[i] + groups[j], key=node_key)
        groups[j] = []
        a[i] += a[j]
        alive.remove(j)
        merged = {}
        for (p, q), e in between.items():
            if (p, q) == (i, j):
                continue
            p2 = i if p == j else p
            q2 = i if q == j else q
            key = (min(p2, q2), max(p2, q2))
            merged[key] = merged.get(key, 0.0) + e
        between = merged
        Q += gain
        if Q > best_Q + _TIE:
            best_Q, best_groups = Q, [list(groups[k]) for k in alive]
    mapping = _canonical(best_groups)
    return CommunityAssignment(mapping, modularity(graph, mapping))


class CommunityDetector(BaseEstimator):
    """Estimator wrapper: ``fit(graph)`` sets ``assignment_``, ``labels_`` and ``Q_``.

    ``weighted=False`` replaces every edge weight by 1 before detection.
    """

    def __init__(self, weighted: bool = True):
        self.weighted = weighted

    def fit(self, graph: CompetitorGraph, y=None):
        g = graph if self.weighted else graph.unweighted()
        self.assignment_ = greedy_communities(g)
        self.labels_ = dict(self.assignment_.mapping)
        self.Q_ = self.assignment_.Q
        return self

    def fit_predict(self, graph: CompetitorGraph, y=None) -> dict:
        return self.fit(graph).labels_

    def result(self) -> CommunityAssignment:
        check_is_fitted(self, "assignment_")
        return self.assignment_


def detect_communities(graph: CompetitorGraph, weighted: bool = True) -> CommunityAssignment:
    return CommunityDetector(weighted=weighted).fit(graph).result()
