"""First-passage models of solving: drift formula, birth-death chain, 2-cube walk.

Trials are split into fixed blocks of ``BLOCK`` and block ``i`` draws from
``SeedSequence(seed).spawn(...)[i]``, so the same seed gives the same
outcome however many workers run the blocks.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pocket
from .cayley import DistanceTable

BLOCK = 10_000
DEFAULT_STEP_CAP = 10_000_000


@dataclass(frozen=True)
class WalkParams:
    p_f: float
    r0: int
    diameter: int
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p_f <= 1:
            raise ValueError(f"p_f must lie in (0, 1], got {self.p_f}")
        if not 0 <= self.r0 <= self.diameter:
            raise ValueError("need 0 <= r0 <= diameter")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @property
    def p_b(self) -> float:
        return 1.0 - self.p_f


@dataclass(frozen=True, eq=False)
class WalkOutcome:
    """Hitting-time statistics over the trials that reached the solved state."""

    mean_steps: float
    std_steps: float
    steps: np.ndarray = field(repr=False)
    truncated_count: int = 0
    start_distances: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def trials(self) -> int:
        return len(self.steps)

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """(hitting time, trial count) pairs for the finished trials."""
        done = self.steps[self.steps >= 0]
        values, counts = np.unique(done, return_counts=True)
        return values, counts

    def histogram_csv(self) -> str:
        values, counts = self.histogram()
        lines = ["steps,count"] + [f"{v},{c}" for v, c in zip(values, counts)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mean_steps": self.mean_steps,
            "std_steps": self.std_steps,
            "truncated_count": self.truncated_count,
            "histogram_csv": self.histogram_csv(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _outcome(steps: np.ndarray, starts=None) -> WalkOutcome:
    done = steps[steps >= 0]
    mean = float(done.mean()) if len(done) else float("nan")
    std = float(done.std()) if len(done) else float("nan")
    return WalkOutcome(mean, std, steps, int(np.sum(steps < 0)), starts)


def expected_fpt(r0: float, p_f: float) -> float:
    """Expected steps to reach 0 from ``r0`` under drift ``2 p_f - 1``.

    Boundary-free: it ignores the reflecting wall at the diameter, which
    only matters once the walk can wander that far out.
    """
    if p_f <= 0.5 or p_f > 1:
        raise ValueError(f"drift 2*p_f - 1 must be positive, got p_f={p_f}")
    return r0 / (2.0 * p_f - 1.0)


def _blocks(trials: int, seed: int):
    n_blocks = -(-trials // BLOCK)
    seeds = np.random.SeedSequence(seed).spawn(n_blocks)
    for i, ss in enumerate(seeds):
        yield min(BLOCK, trials - i * BLOCK), np.random.default_rng(ss)


def _run_blocks(fn, trials, seed, n_jobs):
    blocks = list(_blocks(trials, seed))
    if n_jobs == 1:
        parts = [fn(size, rng) for size, rng in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda b: fn(*b), blocks))
    return parts


def simulate_chain(
    params: WalkParams, step_cap: int = DEFAULT_STEP_CAP, n_jobs: int = 1
) -> WalkOutcome:
    """Birth-death walk on {0..G}: inward with p_f, outward otherwise.

    0 absorbs, G reflects (the only move from G is to G-1). Trials still
    walking after ``step_cap`` steps are counted as truncated and get
    ``steps = -1``.
    """
    G = params.diameter

    def block(size, rng):
        pos = np.full(size, params.r0, dtype=np.int64)
        steps = np.zeros(size, dtype=np.int64)
        active = np.flatnonzero(pos > 0)
        t = 0
        while len(active) and t < step_cap:
            t += 1
            p = pos[active]
            inward = rng.random(len(active)) < params.p_f
            p = np.where(inward | (p == G), p - 1, p + 1)
            pos[active] = p
            hit = p == 0
            steps[active[hit]] = t
            active = active[~hit]
        steps[active] = -1
        return steps

    steps = np.concatenate(_run_blocks(block, params.trials, params.seed, n_jobs))
    return _outcome(steps)


def simulate_cayley_walk(
    p_f: float,
    trials: int,
    seed: int,
    table: DistanceTable,
    step_cap: int = DEFAULT_STEP_CAP,
    n_jobs: int = 1,
) -> WalkOutcome:
    """Biased walk on the true 2-cube Cayley graph from uniform random states.

    Each step, with probability ``p_f`` a uniformly chosen neighbour that is
    strictly closer to solved; otherwise a uniform neighbour that is not
    closer (equal-distance neighbours count as not closer). If that set is
    empty the walk picks among all neighbours.
    """
    if table is None:
        raise ValueError("simulate_cayley_walk needs a 2-cube DistanceTable")
    if not 0 < p_f <= 1:
        raise ValueError(f"p_f must lie in (0, 1], got {p_f}")
    dist = table.distances

    def pick(mask, u):
        counts = mask.sum(1)
        k = np.minimum((u * counts).astype(np.int64), counts - 1)
        return np.argmax(np.cumsum(mask, axis=1) > k[:, None], axis=1)

    def block(size, rng):
        state = rng.integers(0, pocket.N_STATES, size)
        start = dist[state].astype(np.int64)
        steps = np.zeros(size, dtype=np.int64)
        active = np.flatnonzero(start > 0)
        t = 0
        while len(active) and t < step_cap:
            t += 1
            nb = pocket.neighbors(state[active])
            d_nb = dist[nb]
            d_here = dist[state[active]][:, None]
            closer = d_nb < d_here
            assert closer.any(axis=1).all(), "a non-solved state without a closer neighbour"
            other = ~closer
            empty = ~other.any(axis=1)
            other[empty] = True
            forward = rng.random(len(active)) < p_f
            u = rng.random(len(active))
            mask = np.where(forward[:, None], closer, other)
            choice = pick(mask, u)
            state[active] = nb[np.arange(len(active)), choice]
            hit = dist[state[active]] == 0
            steps[active[hit]] = t
            active = active[~hit]
        steps[active] = -1
        return steps, start

    parts = _run_blocks(block, trials, seed, n_jobs)
    steps = np.concatenate([p[0] for p in parts])
    starts = np.concatenate([p[1] for p in parts])
    return _outcome(steps, starts)
