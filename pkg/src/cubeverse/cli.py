"""Command-line entry point: ``cubeverse <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__

_UNITS = {"": 1, "b": 1, "kib": 1 << 10, "mib": 1 << 20, "gib": 1 << 30, "tib": 1 << 40,
          "kb": 10**3, "mb": 10**6, "gb": 10**9, "tb": 10**12}


def parse_size(text: str) -> int:
    m = re.fullmatch(r"\s*([\d.]+)\s*([a-zA-Z]*)\s*", text)
    if not m or m.group(2).lower() not in _UNITS:
        raise argparse.ArgumentTypeError(f"bad size {text!r} (try 8GiB)")
    return int(float(m.group(1)) * _UNITS[m.group(2).lower()])


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _series_from(path) -> list:
    from .progress import read_series_csv

    p = Path(path)
    files = sorted(p.glob("*.csv")) if p.is_dir() else [p]
    if not files:
        raise SystemExit(f"no series CSV files under {p}")
    out = []
    for f in files:
        out.extend(read_series_csv(f.read_text()))
    return out


def cmd_cube(args) -> int:
    from .cube import CubeSpec, CubeState, apply_sequence, format_sequence, parse_sequence, scramble

    spec = CubeSpec(args.n)
    state = CubeState.solved(spec)
    if args.scramble:
        state, moves = scramble(state, args.scramble, seed=args.seed)
        print(format_sequence(moves))
    if args.moves:
        state = apply_sequence(state, parse_sequence(args.moves))
    print(state.facelet_string())
    return 0


def cmd_shells(args) -> int:
    from .cayley import bfs_shells, build_distance_table, estimate_shells, ShellProfile
    from .cube import CubeSpec

    spec = CubeSpec(args.n, fixed_reference=not args.free_reference)
    if args.estimate or args.n >= 4:
        if args.depth is None:
            raise SystemExit("sampling needs --depth")
        profile = estimate_shells(spec, args.depth, args.sample, seed=args.seed)
    elif args.table:
        table = build_distance_table(spec)
        hist = table.histogram()
        if args.depth is not None:
            hist = hist[: args.depth + 1]
        profile = ShellProfile(spec, hist)
    else:
        profile = bfs_shells(spec, args.depth, memory_budget=args.budget)
    _emit(profile.to_json() + "\n" if args.json else profile.to_csv(), args.output)
    return 0


def cmd_walk(args) -> int:
    from .walk import WalkParams, simulate_cayley_walk, simulate_chain

    if args.cayley:
        from .cayley import build_distance_table

        out = simulate_cayley_walk(args.pf, args.trials, args.seed, build_distance_table(), args.step_cap)
    else:
        out = simulate_chain(WalkParams(args.pf, args.r0, args.diameter, args.trials, args.seed), args.step_cap)
    _emit(out.to_json() + "\n", args.output)
    return 0


def cmd_extract(args) -> int:
    from .ingest import extract_progress, parse_records
    from .progress import write_series_csv

    rows = parse_records(args.records, strict=args.strict)
    for line, msg in rows.errors:
        print(f"{args.records}:{line}: {msg}", file=sys.stderr)
    series = [extract_progress(rows, e, kind=args.kind, yearly=args.yearly) for e in args.events]
    _emit(write_series_csv(series), args.output)
    return 1 if rows.errors else 0


def cmd_fit(args) -> int:
    from .progress import FAMILIES, compare_families, fit_family, half_life

    report = {}
    for s in _series_from(args.input):
        if args.family == "all":
            cmp = compare_families(s, FAMILIES)
            lam = cmp["fits"]["exponential"].params["lam"]
            report[s.label] = {
                "fits": {k: v.to_dict() for k, v in cmp["fits"].items()},
                "delta_bic": cmp["delta_bic"],
                "lambda": lam,
                "half_life": half_life(lam),
            }
        else:
            part = s.head(args.head_years) if args.head_years else s
            report[s.label] = {"fits": {args.family: fit_family(part, args.family).to_dict()}}
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_collapse(args) -> int:
    from .progress import collapse, write_series_csv

    normed, dispersion = collapse(_series_from(args.input))
    _emit(write_series_csv(normed), args.output)
    print(f"dispersion {dispersion:.6g}", file=sys.stderr)
    return 0


def cmd_learning_curve(args) -> int:
    from .progress import FitResult, derive_learning_curve

    report = json.loads(Path(args.from_).read_text())
    out = {}
    for label, entry in report.items():
        fits = entry.get("fits", entry)
        if "progress_eq2" not in fits:
            continue
        curve = derive_learning_curve(FitResult.from_dict(fits["progress_eq2"]), args.horizon)
        out[label] = curve.to_dict()
    if not out:
        raise SystemExit("no progress_eq2 fits in the input report")
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_changepoint(args) -> int:
    from .changepoint import detect_variance_changepoint, read_values_csv

    values, T = read_values_csv(Path(args.input).read_text())
    res = detect_variance_changepoint(values, args.alpha, args.perms, args.seed, T=T)
    _emit(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_network(args) -> int:
    from .ingest import event_map, parse_records, record_holders
    from .network import build_graph, detect_communities

    rows = parse_records(args.records)
    events = args.events or sorted({r.event for r in rows} - {"3fm"})
    events = [e for e in events if e in set(event_map().values())]
    graph = build_graph(record_holders(rows, events))
    found = detect_communities(graph, weighted=not args.unweighted)
    if args.emit:
        Path(args.emit).write_text(graph.to_dot(found))
    if args.edges:
        Path(args.edges).write_text(graph.edges_csv())
    if args.nodes:
        Path(args.nodes).write_text(graph.nodes_csv())
    print(json.dumps({"Q": found.Q, "communities": found.communities()}, indent=2))
    return 0


def cmd_run(args) -> int:
    from .pipeline import run_pipeline

    manifest = run_pipeline(args.config)
    for t in manifest["tasks"]:
        line = f"{t['task']}: {t['status']}"
        if t["status"] != "ok":
            line += f" ({t['error']})"
        print(line, file=sys.stderr)
    return 0 if manifest["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cubeverse", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cube", help="apply moves or a scramble and print the facelet string")
    c.add_argument("--n", type=int, default=3)
    c.add_argument("--moves", default="")
    c.add_argument("--scramble", type=int, default=0, help="random scramble length")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_cube)

    c = sub.add_parser("shells", help="shell profile of a cube Cayley graph")
    c.add_argument("--n", type=int, default=3)
    c.add_argument("--depth", type=int)
    c.add_argument("--budget", type=parse_size, default=parse_size("8GiB"))
    c.add_argument("--estimate", action="store_true", help="sampled-frontier estimate")
    c.add_argument("--table", action="store_true", help="2-cube: use the dense distance table")
    c.add_argument("--sample", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--free-reference", action="store_true",
                   help="count all face turns instead of fixing a reference corner (n=2)")
    c.add_argument("--json", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_shells)

    c = sub.add_parser("walk", help="first-passage simulation")
    c.add_argument("--pf", type=float, required=True)
    c.add_argument("--r0", type=int, default=20)
    c.add_argument("--diameter", type=int, default=100)
    c.add_argument("--trials", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--step-cap", type=int, default=10_000_000)
    c.add_argument("--cayley", action="store_true", help="walk on the 2-cube graph instead of the chain")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_walk)

    c = sub.add_parser("extract", help="annual record series from a records file")
    c.add_argument("--records", required=True)
    c.add_argument("--events", nargs="+", required=True)
    c.add_argument("--kind", choices=("auto", "single", "average"), default="auto")
    c.add_argument("--yearly", choices=("mean", "best"), default="mean")
    c.add_argument("--strict", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_extract)

    c = sub.add_parser("fit", help="fit progress families")
    c.add_argument("--input", required=True, help="series CSV or a directory of them")
    c.add_argument("--family", default="all",
                   choices=("all", "exponential", "linear", "power", "progress_eq2"))
    c.add_argument("--head-years", type=float, help="fit only T <= this")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_fit)

    c = sub.add_parser("collapse", help="rescale series by their maxima")
    c.add_argument("--input", required=True)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_collapse)

    c = sub.add_parser("learning-curve", help="learning curves from progress_eq2 fits")
    c.add_argument("--from", dest="from_", required=True, help="JSON written by `fit`")
    c.add_argument("--horizon", type=int, default=30)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_learning_curve)

    c = sub.add_parser("changepoint", help="single variance change point")
    c.add_argument("--input", required=True, help="CSV with a value or residual column")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--perms", type=int, default=999)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_changepoint)

    c = sub.add_parser("network", help="co-participation graph and communities")
    c.add_argument("--records", required=True)
    c.add_argument("--events", nargs="+")
    c.add_argument("--unweighted", action="store_true")
    c.add_argument("--emit", help="write a DOT file")
    c.add_argument("--edges", help="write the edge-list CSV")
    c.add_argument("--nodes", help="write the node CSV")
    c.set_defaults(func=cmd_network)

    c = sub.add_parser("run", help="run a pipeline config")
    c.add_argument("config")
    c.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore")
    try:
        return int(args.func(args) or 0)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
