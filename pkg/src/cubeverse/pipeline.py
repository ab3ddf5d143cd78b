"""Config-driven batch runs that write one output bundle per figure.

A config is a JSON object::

    {
      "inputs": {"records": "records.tsv", "series": null},
      "events": ["3", "4", "5", "6", "7", "3b", "4b", "5b"],
      "analyses": [{"task": "shells", "n": 2}, {"task": "fit"}, ...],
      "seeds": {"walk": 0, "changepoint": 0, "shells": 0},
      "alpha": 0.05,
      "output_dir": "out"
    }

Relative paths resolve against the config file's directory; a path of the
form ``package:NAME`` points at the bundled fixture file ``NAME``.

Bundles are subdirectories of ``output_dir``: ``fig2`` (shell profiles),
``fig3`` (fits and collapse), ``fig5`` (learning curve and walk),
``fig6`` (change point) and ``fig7`` (network). ``manifest.json`` is
written last and lists versions, seeds, per-task status and a SHA-256 of
every output file. Outputs carry no timestamps, so reruns are
byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import platform
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
import sklearn

from . import __version__
from .cayley import bfs_shells, estimate_shells
from .changepoint import detect_variance_changepoint, exponential_residuals
from .cube import CubeSpec
from .fixtures import data_path
from .ingest import extract_progress, parse_records, record_holders
from .network import build_graph, detect_communities
from .progress import (
    FAMILIES,
    ProgressSeries,
    collapse,
    compare_families,
    derive_learning_curve,
    fit_progress_eq2,
    half_life,
    read_series_csv,
    write_series_csv,
)
from .walk import WalkParams, expected_fpt, simulate_chain

log = logging.getLogger(__name__)

TASKS = ("shells", "fit", "collapse", "learning-curve", "walk", "changepoint", "network")
BUNDLE = {
    "shells": "fig2",
    "fit": "fig3",
    "collapse": "fig3",
    "learning-curve": "fig5",
    "walk": "fig5",
    "changepoint": "fig6",
    "network": "fig7",
}
CONFIG_KEYS = {"inputs", "events", "analyses", "seeds", "alpha", "output_dir"}


class ConfigError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Context:
    def __init__(self, config: dict, base: Path):
        self.config = config
        self.base = base
        self.out = self.resolve(config.get("output_dir", "out"))
        self.seeds = dict(config.get("seeds") or {})
        self.alpha = float(config.get("alpha", 0.05))
        self._rows = None
        self._series = None

    def resolve(self, p) -> Path:
        p = str(p)
        if p.startswith("package:"):
            return data_path(p[len("package:"):])
        path = Path(p)
        return path if path.is_absolute() else self.base / path

    def seed(self, task: str, spec: dict) -> int:
        if "seed" in spec:
            return int(spec["seed"])
        return int(self.seeds.get(task, 0))

    def rows(self):
        if self._rows is None:
            src = (self.config.get("inputs") or {}).get("records")
            if not src:
                raise ConfigError("this task needs inputs.records")
            self._rows = parse_records(self.resolve(src))
        return self._rows

    def series(self) -> dict[str, ProgressSeries]:
        if self._series is None:
            inputs = self.config.get("inputs") or {}
            events = self.config.get("events")
            if inputs.get("series"):
                found = {s.label: s for s in read_series_csv(self.resolve(inputs["series"]).read_text())}
                keys = events or list(found)
                missing = [e for e in keys if e not in found]
                if missing:
                    raise ConfigError(f"events not in the series file: {missing}")
                self._series = {e: found[e] for e in keys}
            else:
                if not events:
                    raise ConfigError("config needs 'events' to extract series from records")
                self._series = {e: extract_progress(self.rows(), e) for e in events}
        return self._series

    def pick(self, spec: dict, default) -> list[ProgressSeries]:
        allseries = self.series()
        wanted = spec.get("events", default)
        if wanted is None:
            wanted = list(allseries)
        missing = [e for e in wanted if e not in allseries]
        if missing:
            raise ConfigError(f"unknown events {missing}")
        return [allseries[e] for e in wanted]

    def write(self, task: str, name: str, text: str) -> str:
        rel = f"{BUNDLE[task]}/{name}"
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return rel


def _sighted(series: dict) -> list[str]:
    return [e for e in series if not e.endswith(("b", "fm"))]


def _blind(series: dict) -> list[str]:
    return [e for e in series if e.endswith("b")]


def _task_shells(ctx: _Context, spec: dict) -> list[str]:
    n = int(spec.get("n", 2))
    depth = spec.get("max_depth")
    method = spec.get("method", "exact" if n in (2, 3) else "estimate")
    cube = CubeSpec(n)
    if method == "exact":
        profile = bfs_shells(cube, max_depth=None if depth is None else int(depth))
    elif method == "estimate":
        if depth is None:
            raise ConfigError("sampled shells need max_depth")
        profile = estimate_shells(cube, int(depth), int(spec.get("frontier_sample", 100_000)),
                                  seed=ctx.seed("shells", spec))
    else:
        raise ConfigError(f"unknown shells method {method!r}")
    return [ctx.write("shells", f"shells_n{n}.csv", profile.to_csv())]


def _task_fit(ctx: _Context, spec: dict) -> list[str]:
    report = {}
    for s in ctx.pick(spec, None):
        cmp = compare_families(s, [f for f in FAMILIES if f != "progress_eq2"])
        entry = {name: fit.to_dict() for name, fit in cmp["fits"].items()}
        lam = cmp["fits"]["exponential"].params["lam"]
        report[s.label] = {
            "fits": entry,
            "delta_bic": cmp["delta_bic"],
            "lambda": lam,
            "half_life": half_life(lam),
            "n_points": len(s),
            "record_breakers": s.record_breakers,
        }
    return [ctx.write("fit", "fits.json", _dumps(report))]


def _task_collapse(ctx: _Context, spec: dict) -> list[str]:
    chosen = ctx.pick(spec, _sighted(ctx.series()))
    normed, dispersion = collapse(chosen)
    return [
        ctx.write("collapse", "collapse.csv", write_series_csv(normed)),
        ctx.write("collapse", "collapse.json", _dumps({"events": [s.label for s in chosen],
                                                       "dispersion": dispersion})),
    ]


def _task_learning_curve(ctx: _Context, spec: dict) -> list[str]:
    head = spec.get("head_years")
    horizon = int(spec.get("horizon", 30))
    rows = ["label,T,p_f,progress"]
    report = {}
    for s in ctx.pick(spec, None):
        part = s.head(float(head)) if head is not None else s
        fit = fit_progress_eq2(part, normalize=True)
        entry = {"fit": fit.to_dict()}
        if fit.converged:
            curve = derive_learning_curve(fit, horizon)
            entry["learning_curve"] = curve.to_dict()
            T = np.array([t for t, _ in curve.samples])
            for t, pf, prog in zip(T, curve.p_f(T), curve.progress(T)):
                rows.append(f"{s.label},{int(t)},{pf!r},{prog!r}")
        report[s.label] = entry
    return [
        ctx.write("learning-curve", "learning_curve.csv", "\n".join(rows) + "\n"),
        ctx.write("learning-curve", "learning_curve.json", _dumps({"head_years": head, "series": report})),
    ]


def _task_walk(ctx: _Context, spec: dict) -> list[str]:
    r0 = int(spec.get("r0", 20))
    G = int(spec.get("diameter", 100))
    trials = int(spec.get("trials", 10_000))
    seed = ctx.seed("walk", spec)
    rows = ["p_f,mean_steps,std_steps,truncated,expected"]
    for p in spec.get("p_f", [0.55, 0.65, 0.75, 0.85, 0.95]):
        out = simulate_chain(WalkParams(float(p), r0, G, trials, seed))
        expected = expected_fpt(r0, float(p)) if p > 0.5 else float("nan")
        rows.append(f"{float(p)!r},{out.mean_steps!r},{out.std_steps!r},{out.truncated_count},{expected!r}")
    return [ctx.write("walk", "walk.csv", "\n".join(rows) + "\n")]


def _task_changepoint(ctx: _Context, spec: dict) -> list[str]:
    chosen = ctx.pick(spec, _blind(ctx.series()))
    alpha = float(spec.get("alpha", ctx.alpha))
    perms = int(spec.get("permutations", 999))
    seed = ctx.seed("changepoint", spec)
    rows = ["label,T,residual"]
    report = {}
    for s in chosen:
        resid = exponential_residuals(s)
        res = detect_variance_changepoint(resid, alpha, perms, seed, T=s.T)
        report[s.label] = res.to_dict()
        rows += [f"{s.label},{int(t)},{r!r}" for t, r in zip(s.T, resid)]
    return [
        ctx.write("changepoint", "residuals.csv", "\n".join(rows) + "\n"),
        ctx.write("changepoint", "changepoint.json",
                  _dumps({"alpha": alpha, "permutations": perms, "seed": seed, "series": report})),
    ]


def _task_network(ctx: _Context, spec: dict) -> list[str]:
    events = spec.get("events") or ctx.config.get("events")
    if not events:
        raise ConfigError("network needs a list of events")
    events = [e for e in events if not e.endswith("fm")]
    graph = build_graph(record_holders(ctx.rows(), events))
    weighted = bool(spec.get("weighted", True))
    found = detect_communities(graph, weighted=weighted)
    return [
        ctx.write("network", "nodes.csv", graph.nodes_csv()),
        ctx.write("network", "edges.csv", graph.edges_csv()),
        ctx.write("network", "communities.csv", found.to_csv()),
        ctx.write("network", "graph.dot", graph.to_dot(found)),
        ctx.write("network", "network.json", _dumps({"weighted": weighted, "Q": found.Q,
                                                     "communities": found.communities()})),
    ]


_RUNNERS = {
    "shells": _task_shells,
    "fit": _task_fit,
    "collapse": _task_collapse,
    "learning-curve": _task_learning_curve,
    "walk": _task_walk,
    "changepoint": _task_changepoint,
    "network": _task_network,
}


def _normalise(item) -> dict:
    spec = {"task": item} if isinstance(item, str) else dict(item)
    if spec.get("task") not in TASKS:
        raise ConfigError(f"unknown task {spec.get('task')!r}; expected one of {TASKS}")
    return spec


def load_config(path) -> tuple[dict, Path]:
    path = Path(path)
    config = json.loads(path.read_text())
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(config) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if not config.get("analyses"):
        raise ConfigError("config lists no analyses")
    return config, path.parent


def run_pipeline(config, base_dir: Optional[Path] = None) -> dict:
    """Run every analysis in ``config`` (a dict or a path to a JSON file).

    A failing task is recorded in the manifest and the rest still run.
    Returns the manifest; ``manifest["ok"]`` is true only if all tasks
    succeeded.
    """
    if not isinstance(config, dict):
        config, base_dir = load_config(config)
    ctx = _Context(config, Path(base_dir or "."))
    specs = [_normalise(item) for item in config["analyses"]]
    ctx.out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for spec in specs:
        entry = {"task": spec["task"], "params": spec}
        try:
            entry["outputs"] = _RUNNERS[spec["task"]](ctx, spec)
            entry["status"] = "ok"
        except Exception as exc:  # reported per task, the run goes on
            log.warning("task %s failed: %s", spec["task"], exc)
            entry["status"] = "error"
            entry["error"] = f"{type(exc).__name__}: {exc}"
            entry["outputs"] = []
        tasks.append(entry)
    files = {}
    for entry in tasks:
        for rel in entry["outputs"]:
            files[rel] = hashlib.sha256((ctx.out / rel).read_bytes()).hexdigest()
    manifest = {
        "versions": {
            "cubeverse": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
            "python": platform.python_version(),
        },
        "seeds": {t: ctx.seed(t, {}) for t in ("shells", "walk", "changepoint")} | ctx.seeds,
        "alpha": ctx.alpha,
        "inputs": config.get("inputs") or {},
        "events": config.get("events"),
        "tasks": tasks,
        "files": files,
        "ok": all(t["status"] == "ok" for t in tasks),
    }
    (ctx.out / "manifest.json").write_text(_dumps(manifest))
    return manifest
