"""Shell, ball, entropy and branching profiles of cube Cayley graphs.

Three routes to the same numbers:

* :func:`bfs_shells` - exact frontier BFS over sticker states, deduplicating
  each new level against the previous two only.
* :func:`build_distance_table` - dense distance array over the packed
  2-cube coordinates.
* :func:`estimate_shells` - sampled-frontier BFS for graphs too large to
  enumerate (the 4-cube).
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import pocket
from .cube import CubeError, CubeSpec, CubeState, _facelet_geometry, generator_table

log = logging.getLogger(__name__)

GiB = 1 << 30
HASH_OVERHEAD = 2


class MemoryBudgetExceeded(RuntimeError):
    """A BFS level outgrew the memory budget while it was being built."""

    def __init__(self, level: int, needed: int, budget: int):
        self.level = level
        super().__init__(
            f"memory budget of {budget} bytes exceeded while building level {level} "
            f"(at least {needed} bytes needed); last complete level is {level - 1}"
        )


class EstimateError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ShellProfile:
    """Per-radius shell counts and the quantities derived from them.

    ``shell[r]`` is the number of states at distance exactly ``r``. Ball
    size, entropy (bits) and branching factor are derived on construction.
    ``ci`` holds relative 95% half-widths for sampled profiles.
    """

    spec: CubeSpec
    shell: np.ndarray
    exact: bool = True
    truncated: bool = False
    ci: Optional[np.ndarray] = None
    ball: np.ndarray = field(init=False, repr=False)
    entropy: np.ndarray = field(init=False, repr=False)
    branching: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shell = np.asarray(self.shell, dtype=np.int64 if self.exact else np.float64)
        if shell.ndim != 1 or len(shell) == 0 or shell[0] != 1:
            raise ValueError("a shell profile starts with S(0) = 1")
        if np.any(shell < 0):
            raise ValueError("shell counts must be non-negative")
        ball = np.cumsum(shell)
        branching = np.full(len(shell), np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            branching[1:] = shell[1:] / shell[:-1]
        object.__setattr__(self, "shell", shell)
        object.__setattr__(self, "ball", ball)
        object.__setattr__(self, "entropy", np.log2(ball.astype(np.float64)))
        object.__setattr__(self, "branching", branching)
        if self.ci is not None:
            object.__setattr__(self, "ci", np.asarray(self.ci, dtype=np.float64))

    @property
    def radius(self) -> np.ndarray:
        return np.arange(len(self.shell))

    @property
    def max_radius(self) -> int:
        return len(self.shell) - 1

    def rows(self):
        """(r, S, gamma, H, b, ci) tuples; b is None at r=0, ci None when exact."""
        out = []
        for r in range(len(self.shell)):
            b = None if r == 0 else float(self.branching[r])
            ci = None if self.ci is None else float(self.ci[r])
            s = int(self.shell[r]) if self.exact else float(self.shell[r])
            g = int(self.ball[r]) if self.exact else float(self.ball[r])
            out.append((r, s, g, float(self.entropy[r]), b, ci))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "S", "gamma", "H", "b", "ci"])
        for r, s, g, h, b, ci in self.rows():
            w.writerow([r, s, g, repr(h), "" if b is None else repr(b), "" if ci is None else repr(ci)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "metric": self.spec.metric.value,
            "fixed_reference": self.spec.fixed_reference,
            "exact": self.exact,
            "truncated": self.truncated,
            "rows": [
                dict(zip(("r", "S", "gamma", "H", "b", "ci"), row)) for row in self.rows()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, text: str, spec: CubeSpec, exact: bool = True) -> "ShellProfile":
        rows = list(csv.DictReader(io.StringIO(text)))
        conv = int if exact else float
        shell = [conv(row["S"]) for row in rows]
        ci = None
        if rows and rows[0]["ci"] != "":
            ci = [float(row["ci"]) for row in rows]
        return cls(spec, np.array(shell), exact=exact, ci=ci)


@dataclass(frozen=True, eq=False)
class DistanceTable:
    """HTM distance of every packed 2-cube state from solved."""

    spec: CubeSpec
    distances: np.ndarray = field(repr=False)

    @property
    def diameter(self) -> int:
        return int(self.distances.max())

    def histogram(self) -> np.ndarray:
        return np.bincount(self.distances.astype(np.int64))

    def __getitem__(self, index):
        return self.distances[index]


def entropy_series(profile: ShellProfile) -> list[tuple[int, float]]:
    return [(int(r), float(h)) for r, h in zip(profile.radius, profile.entropy)]


# -- state keys --------------------------------------------------------------


@lru_cache(maxsize=None)
def _moving_facelets(spec: CubeSpec) -> np.ndarray:
    gens = generator_table(spec)
    idx = np.arange(spec.n_facelets)
    moved = np.any(gens != idx, axis=0)
    return np.flatnonzero(moved)


def _labels(spec: CubeSpec, perms: np.ndarray) -> np.ndarray:
    """Per-facelet labels that identify a state: colors up to n=3, facelet ids above."""
    perms = perms[:, _moving_facelets(spec)]
    if spec.n <= 3:
        return perms // (spec.n * spec.n)
    return perms


def exact_keys(spec: CubeSpec, perms: np.ndarray) -> np.ndarray:
    """Exact, sortable keys: 3-bit colors packed 21 to a uint64 word.

    One word gives a plain uint64 array; several are viewed as fixed-width
    byte strings.
    """
    if spec.n > 3:
        raise CubeError("exact keys are only packed for n <= 3")
    colors = _labels(spec, perms).astype(np.uint64)
    n_rows, width = colors.shape
    n_words = -(-width // 21)
    words = np.zeros((n_rows, n_words), dtype=np.uint64)
    for j in range(width):
        w, slot = divmod(j, 21)
        words[:, w] |= colors[:, j] << np.uint64(3 * slot)
    if n_words == 1:
        return words[:, 0]
    # big-endian so byte order sorts like the word tuple
    return np.ascontiguousarray(words.astype(">u8")).view(np.dtype((np.void, 8 * n_words))).ravel()


_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def state_hashes(spec: CubeSpec, perms: np.ndarray) -> np.ndarray:
    """64-bit hashes of the identifying labels, for membership sketches."""
    labels = np.ascontiguousarray(_labels(spec, perms).astype(np.uint8))
    n_rows, width = labels.shape
    pad = (-width) % 8
    if pad:
        labels = np.concatenate([labels, np.zeros((n_rows, pad), dtype=np.uint8)], axis=1)
    words = labels.view(np.uint64)
    h = np.zeros(n_rows, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(words.shape[1]):
            h = _splitmix(h ^ words[:, j])
    return h


@lru_cache(maxsize=None)
def rotation_permutations(n: int) -> np.ndarray:
    """The 24 whole-cube rotations as facelet permutations (``new = old[p]``)."""
    pos, nrm = _facelet_geometry(n)
    index_of = {(tuple(p), tuple(q)): i for i, (p, q) in enumerate(zip(pos, nrm))}

    def as_perm(rot):
        perm = np.empty(len(pos), dtype=np.intp)
        for i in range(len(pos)):
            perm[index_of[(tuple(rot @ pos[i]), tuple(rot @ nrm[i]))]] = i
        return perm

    qx = np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]])
    qy = np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]])
    found = {np.eye(3, dtype=int).tobytes(): np.eye(3, dtype=int)}
    stack = [np.eye(3, dtype=int)]
    while stack:
        m = stack.pop()
        for q in (qx, qy):
            nxt = q @ m
            if nxt.tobytes() not in found:
                found[nxt.tobytes()] = nxt
                stack.append(nxt)
    mats = [found[k] for k in sorted(found)]
    return np.stack([as_perm(m) for m in mats])


def canonical_perms(spec: CubeSpec, perms: np.ndarray) -> np.ndarray:
    """Representative of each state's class under whole-cube rotation.

    The representative is the rotated copy with the smallest hash, so
    states that differ only by how the cube is held share one key.
    """
    rots = rotation_permutations(spec.n)
    best = perms[:, rots[0]]
    best_h = state_hashes(spec, best)
    for rot in rots[1:]:
        cand = perms[:, rot]
        h = state_hashes(spec, cand)
        take = h < best_h
        best[take] = cand[take]
        best_h = np.where(take, h, best_h)
    return best


# -- exact BFS ---------------------------------------------------------------


def _start_perms(spec: CubeSpec, start: Optional[CubeState]) -> np.ndarray:
    if start is None:
        start = CubeState.solved(spec)
    elif start.spec != spec:
        raise CubeError("start state belongs to a different cube spec")
    return start.perm.astype(np.uint8)[None, :]


def bfs_shells(
    spec: CubeSpec,
    max_depth: Optional[int] = None,
    memory_budget: int = 8 * GiB,
    start: Optional[CubeState] = None,
) -> ShellProfile:
    """Exact shell counts out to ``max_depth`` (``None``: until exhaustion).

    Deduplication keeps only the previous and current levels: neighbours of
    a depth-d state lie at depth d-1, d or d+1 because the generating set
    is closed under inverses.

    If the next level is projected to overrun ``memory_budget`` the profile
    returned so far is flagged ``truncated``. A level that overruns while
    it is being built raises :class:`MemoryBudgetExceeded`.
    """
    if spec.n not in (2, 3):
        raise CubeError(f"exact BFS supports n in {{2, 3}}, got n={spec.n}")
    if max_depth is not None and max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    gens = generator_table(spec)
    frontier = _start_perms(spec, start)
    cur_keys = np.sort(exact_keys(spec, frontier))
    prev_keys = cur_keys[:0]
    per_state = (frontier.shape[1] + cur_keys.dtype.itemsize) * HASH_OVERHEAD
    shells = [1]
    truncated = False
    while max_depth is None or len(shells) <= max_depth:
        level = len(shells)
        growth = len(gens) if level == 1 else shells[-1] / shells[-2]
        projected = (len(prev_keys) + len(cur_keys) + len(cur_keys) * growth) * per_state
        if projected > memory_budget:
            log.info("BFS stops before level %d: %.3g bytes projected", level, projected)
            truncated = True
            break
        held = (len(prev_keys) + len(cur_keys)) * per_state
        new_keys, new_states = [], []
        for g in gens:
            child = frontier[:, g]
            keys = exact_keys(spec, child)
            fresh = ~np.isin(keys, cur_keys) & ~np.isin(keys, prev_keys)
            keys, child = keys[fresh], child[fresh]
            keys, first = np.unique(keys, return_index=True)
            new_keys.append(keys)
            new_states.append(child[first])
            held += len(keys) * per_state
            if held > memory_budget:
                raise MemoryBudgetExceeded(level, held, memory_budget)
        keys = np.concatenate(new_keys)
        states = np.concatenate(new_states)
        keys, first = np.unique(keys, return_index=True)
        if len(keys) == 0:
            break
        shells.append(len(keys))
        prev_keys, cur_keys, frontier = cur_keys, keys, states[first]
    return ShellProfile(spec, np.array(shells), exact=True, truncated=truncated)


def build_distance_table(spec: CubeSpec = pocket.SPEC) -> DistanceTable:
    """Dense HTM distance table over all 3,674,160 packed 2-cube states."""
    if spec != pocket.SPEC:
        raise CubeError("distance tables exist only for CubeSpec(2, fixed_reference=True)")
    dist = np.full(pocket.N_STATES, -1, dtype=np.int8)
    dist[0] = 0
    frontier = np.array([0], dtype=np.int64)
    depth = 0
    while len(frontier):
        depth += 1
        nb = np.unique(pocket.neighbors(frontier).ravel())
        nb = nb[dist[nb] < 0]
        dist[nb] = depth
        frontier = nb
    dist.setflags(write=False)
    return DistanceTable(spec, dist)


# -- sampled-frontier estimate -----------------------------------------------


@lru_cache(maxsize=None)
def _successor_rules(spec: CubeSpec) -> np.ndarray:
    """allowed[c, j]: may generator j follow a move of class c in a canonical word?

    Classes are (axis, face-layer) pairs; the last row is the empty word.
    Same face-layer twice is never canonical, and moves on one axis
    commute, so a run on one axis must list face-layers in a fixed order.
    """
    from .cube import generators

    gens = generators(spec)
    slots = sorted({(m.axis, m.face, m.layer) for m in gens})
    slot_of = {(m.face, m.layer): slots.index((m.axis, m.face, m.layer)) for m in gens}
    allowed = np.ones((len(slots) + 1, len(gens)), dtype=bool)
    for c, (axis, _, _) in enumerate(slots):
        for j, m in enumerate(gens):
            if m.axis == axis and slot_of[(m.face, m.layer)] <= c:
                allowed[c, j] = False
    gen_class = np.array([slot_of[(m.face, m.layer)] for m in gens])
    return allowed, gen_class


def _thinned_count(mult: np.ndarray, q: float) -> float:
    """Unbiased count of targets reached from a frontier whose parents were kept with probability ``q``.

    A target with ``k`` in-edges is seen ``m ~ Binomial(k, q)`` times. The
    weight ``1 - (-(1-q)/q)**m`` has expectation 1 for every ``k >= 1`` and is
    0 at ``m = 0``, so the sum over seen targets is unbiased whatever the
    in-degree mix.
    """
    mult = mult[mult > 0]
    if q >= 1.0:
        return float(len(mult))
    r = -(1.0 - q) / q
    return float(np.sum(1.0 - r ** mult))


def estimate_shells(
    spec: CubeSpec,
    max_depth: int,
    frontier_sample: int = 100_000,
    seed: int = 0,
    n_groups: int = 20,
    canonical: bool = False,
    max_rel_ci: float = 0.5,
) -> ShellProfile:
    """Shell sizes from a sampled-frontier BFS.

    Each level keeps a uniform reservoir of at most ``frontier_sample``
    states, each tagged with the classes of the moves that reached it, and a
    hash sketch of that reservoir. Reservoir states are expanded by
    canonical successors only, which removes the duplicate words coming
    from commuting and repeated turns.

    Children are split into those found in the sketches of the previous or
    current level and the rest. With ``q`` the reservoir's sampling
    fraction, the unfound children are counted by inverse binomial
    thinning (:func:`_thinned_count`), and the unsampled members of the two
    sketched levels that hide among them are subtracted using the found
    ones. While every level fits in the reservoir the result equals exact
    BFS.

    ``canonical=True`` identifies states that differ by a whole-cube
    rotation. ``ci`` holds relative 95% half-widths from a delete-a-group
    jackknife over ``n_groups`` parent groups, compounded across levels;
    levels built from complete frontiers have zero width.
    """
    spec.require_exact()
    if frontier_sample < 1000:
        raise ValueError("frontier_sample must be at least 1000")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if n_groups < 2:
        raise ValueError("n_groups must be at least 2")
    gens = generator_table(spec)
    n_gens = len(gens)
    allowed, gen_class = _successor_rules(spec)
    root_class = allowed.shape[0] - 1
    class_bit = (np.uint64(1) << gen_class.astype(np.uint64))
    rng = np.random.default_rng(seed)

    def keyed(perms):
        if canonical:
            perms = canonical_perms(spec, perms)
        return perms, state_hashes(spec, perms)

    frontier, cur_keys = keyed(_start_perms(spec, None))
    frontier = frontier.astype(np.uint8)
    masks = np.array([np.uint64(1) << np.uint64(root_class)], dtype=np.uint64)
    prev_keys = cur_keys[:0]
    cur_q, prev_q = 1.0, 1.0
    cur_complete, prev_complete = True, True
    estimates = [1.0]
    rel_ci = [0.0]

    for level in range(1, max_depth + 1):
        m = len(frontier)
        expand = np.zeros((m, n_gens), dtype=bool)
        for c in range(allowed.shape[0]):
            has = ((masks >> np.uint64(c)) & np.uint64(1)).astype(bool)
            expand |= has[:, None] & allowed[c][None, :]
        children = np.empty((m, n_gens, frontier.shape[1]), dtype=np.uint8)
        keys = np.empty((m, n_gens), dtype=np.uint64)
        for j, g in enumerate(gens):
            child, h = keyed(frontier[:, g])
            children[:, j] = child
            keys[:, j] = h
        hit_prev = np.isin(keys, prev_keys) & expand
        hit_cur = np.isin(keys, cur_keys) & expand
        unfound = expand & ~(hit_prev | hit_cur)
        parent = np.broadcast_to(np.arange(m)[:, None], (m, n_gens))

        distinct, inverse = np.unique(keys[unfound], return_inverse=True)
        groups = [(len(distinct), inverse, parent[unfound])]
        for sel_mask in (hit_cur, hit_prev):
            found, inv = np.unique(keys[sel_mask], return_inverse=True)
            groups.append((len(found), inv, parent[sel_mask]))

        def level_size(keep, q):
            counts = [
                _thinned_count(np.bincount(inv, weights=keep[par], minlength=n).astype(np.int64), q)
                for n, inv, par in groups
            ]
            hidden_cur = (1.0 - cur_q) / cur_q * counts[1]
            hidden_prev = (1.0 - prev_q) / prev_q * counts[2]
            return counts[0] - hidden_cur - hidden_prev

        exact_level = cur_complete and prev_complete
        estimate = level_size(np.ones(m), 1.0 if exact_level else cur_q)
        if estimate <= 0 or len(distinct) == 0:
            break
        if exact_level:
            estimate, lvl_ci = float(len(distinct)), 0.0
        else:
            label = rng.permutation(m) % n_groups
            q_drop = cur_q * (n_groups - 1) / n_groups
            jack = np.array([level_size((label != k).astype(float), q_drop) for k in range(n_groups)])
            se = np.sqrt((n_groups - 1) / n_groups * np.sum((jack - jack.mean()) ** 2))
            lvl_ci = 1.96 * se / estimate
        total_ci = float(np.hypot(rel_ci[-1], lvl_ci))
        if total_ci > max_rel_ci:
            raise EstimateError(
                f"frontier_sample={frontier_sample} is too small for depth {max_depth}: "
                f"relative CI reaches {total_ci:.2f} at depth {level}"
            )
        estimates.append(estimate)
        rel_ci.append(total_ci)

        # next reservoir: distinct unexplained children with the union of their move classes
        sel = unfound.ravel()
        pool_masks = np.zeros(len(distinct), dtype=np.uint64)
        edge_bits = np.broadcast_to(class_bit, (m, n_gens))[unfound]
        np.bitwise_or.at(pool_masks, inverse, edge_bits)
        _, first = np.unique(inverse, return_index=True)
        pool = children.reshape(m * n_gens, -1)[sel][first]
        pool_keys = distinct
        complete = exact_level and len(pool) <= frontier_sample
        if len(pool) > frontier_sample:
            pick = np.sort(rng.choice(len(pool), frontier_sample, replace=False))
            pool, pool_keys, pool_masks = pool[pick], pool_keys[pick], pool_masks[pick]
        prev_keys, cur_keys = cur_keys, np.sort(pool_keys)
        prev_q, cur_q = cur_q, (1.0 if complete else min(1.0, len(pool) / estimate))
        prev_complete, cur_complete = cur_complete, complete
        frontier, masks = pool, pool_masks
        log.debug("level %d: estimate %.6g (ci %.3g, q=%.3g)", level, estimate, total_ci, cur_q)

    return ShellProfile(spec, np.array(estimates), exact=False, ci=np.array(rel_ci))
