"""Deterministic synthetic fixtures shaped like WCA record data.

Nothing here is digitized from published figures. The series are drawn
from the progress-curve model with parameters set to the commonly quoted
fitted values (sighted learning rate 0.1, blindfold 0.3 for the first 8
years, fewest-moves decay 1/5) and multiplicative Gaussian noise.

``python -m cubeverse.fixtures DIR`` rewrites the packaged files.
"""
from __future__ import annotations

import csv
import io
import sys
from datetime import date
from importlib import resources
from pathlib import Path

import numpy as np

from .progress import ProgressSeries, read_series_csv, write_series_csv

SEED = 20031014

# label: (first year, n years, first-year value in s, inflection year tau)
SIGHTED = {
    "3": (2003, 21, 20.0, 26.0),
    "4": (2003, 21, 75.0, 28.0),
    "5": (2004, 20, 150.0, 30.0),
    "6": (2007, 17, 290.0, 32.0),
    "7": (2009, 15, 450.0, 34.0),
}
SIGHTED_RATE = 0.1
SIGHTED_NOISE = 0.03

# label: (first year, n years, value at the regime switch in s)
BLINDFOLD = {
    "3b": (2004, 20, 30.0),
    "4b": (2005, 19, 150.0),
    "5b": (2005, 19, 320.0),
}
BLIND_EARLY_RATE = 0.3
BLIND_SWITCH_YEAR = 8
BLIND_NOISE = 0.04

MOVES = ("3fm", 2006, 10, 60.0, 0.2)
MOVES_NOISE = 0.02


def _noise(rng, n, scale):
    return 1.0 + scale * rng.standard_normal(n)


def sighted_series(seed: int = SEED) -> list[ProgressSeries]:
    rng = np.random.default_rng([seed, 1])
    out = []
    for label, (_, n_years, k0, tau) in SIGHTED.items():
        T = np.arange(1, n_years + 1, dtype=float)
        A = k0 / (1.0 + np.exp(SIGHTED_RATE * (tau - 1.0)))
        y = A * (1.0 + np.exp(SIGHTED_RATE * (tau - T))) * _noise(rng, n_years, SIGHTED_NOISE)
        out.append(ProgressSeries(label, T, np.round(y, 3), "time"))
    return out


def blindfold_series(seed: int = SEED) -> list[ProgressSeries]:
    """Fast decay (rate 0.3) up to year 8, then the sighted rate 0.1."""
    rng = np.random.default_rng([seed, 2])
    out = []
    for label, (_, n_years, at_switch) in BLINDFOLD.items():
        T = np.arange(1, n_years + 1, dtype=float)
        rate = np.where(T <= BLIND_SWITCH_YEAR, BLIND_EARLY_RATE, SIGHTED_RATE)
        y = at_switch * np.exp(-rate * (T - BLIND_SWITCH_YEAR)) * _noise(rng, n_years, BLIND_NOISE)
        out.append(ProgressSeries(label, T, np.round(y, 3), "time"))
    return out


def moves_series(seed: int = SEED) -> ProgressSeries:
    rng = np.random.default_rng([seed, 3])
    label, _, n_years, k0, lam = MOVES
    T = np.arange(1, n_years + 1, dtype=float)
    y = k0 * np.exp(-lam * (T - 1.0)) * _noise(rng, n_years, MOVES_NOISE)
    return ProgressSeries(label, T, np.round(y, 3), "moves")


# -- competitor records -------------------------------------------------------

WCA_CODE = {"3": "333", "4": "444", "5": "555", "6": "666", "7": "777",
            "3b": "333bf", "4b": "444bf", "5b": "555bf", "3fm": "333fm"}


def _roster(rng):
    """Person ids per event, people shared between events listed first.

    Every sighted pair and every blindfold pair share at least one person;
    two people cross between the groups.
    """
    sighted = list(SIGHTED)
    blind = list(BLINDFOLD)
    shared = {e: [] for e in sighted + blind}
    solo = {e: [] for e in sighted + blind}
    pid = 0

    def person(evts, into):
        nonlocal pid
        pid += 1
        for e in evts:
            into[e].append(f"P{pid:04d}")

    for group in (sighted, blind):
        person(group, shared)
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                person([a, b], shared)
    person(["3", "3b"], shared)
    person(["4", "4b"], shared)
    for e in sighted + blind:
        for _ in range(int(rng.integers(2, 5))):
            person([e], solo)
    return {e: shared[e] + solo[e] for e in shared}


def competitor_records(seed: int = SEED) -> list[dict]:
    """Result rows whose record-setting subset traces the sighted and blindfold series.

    Record-setting results go to the event's roster in turn, so each
    rostered person holds at least one record once the event has enough
    of them; other results go to random people.
    """
    rng = np.random.default_rng([seed, 4])
    roster = _roster(rng)
    series = {s.label: s for s in sighted_series(seed) + blindfold_series(seed)}
    first_year = {k: v[0] for k, v in {**SIGHTED, **BLINDFOLD}.items()}
    rows = []
    for label, s in series.items():
        people = roster[label]
        best = np.inf
        n_records = 0
        for t, target in zip(s.T, s.y):
            year = first_year[label] + int(t) - 1
            n_results = int(rng.integers(3, 7))
            values = target * (1.0 + 0.04 * rng.standard_normal(n_results))
            days = np.sort(rng.choice(np.arange(1, 365), n_results, replace=False))
            for v, d in zip(values, days):
                cs = max(1, int(round(v * 100)))
                if cs < best:
                    best = cs
                    who = people[n_records % len(people)]
                    n_records += 1
                else:
                    who = people[int(rng.integers(len(people)))]
                rows.append({
                    "person_id": who,
                    "event": WCA_CODE[label],
                    "date": date(year, 1, 1).toordinal() + int(d) - 1,
                    "value": cs,
                    "kind": "average",
                })
    rows.sort(key=lambda r: (r["event"], r["date"]))
    for r in rows:
        r["date"] = date.fromordinal(r["date"]).isoformat()
    return rows


def records_tsv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["person_id", "event", "date", "value", "kind"],
                       delimiter="\t", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


FILES = {
    "sighted.csv": lambda: write_series_csv(sighted_series()),
    "blindfold.csv": lambda: write_series_csv(blindfold_series()),
    "moves.csv": lambda: write_series_csv([moves_series()]),
    "records.tsv": lambda: records_tsv(competitor_records()),
}


def data_path(name: str) -> Path:
    return Path(str(resources.files("cubeverse") / "data" / name))


def load_series(name: str) -> list[ProgressSeries]:
    return read_series_csv(data_path(name).read_text())


def write_all(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in FILES.items():
        path = directory / name
        path.write_text(make())
        written.append(path)
    return written


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else data_path("")
    for p in write_all(target):
        print(p)
