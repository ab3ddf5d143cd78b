"""Single variance change point with a permutation test."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .progress import ExponentialDecay, ProgressSeries

PERM_BLOCK = 1000
_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class ChangePointResult:
    """``index`` is the number of points before the split (0-based position
    of the first point of the second segment); ``split_T`` is that point's T."""

    index: int
    statistic: float
    p_value: float
    significant: bool
    split_T: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "split_T": self.split_T,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "significant": self.significant,
        }


def _llr_profile(x: np.ndarray, min_size: int) -> np.ndarray:
    """Twice the log-likelihood gain of a two-variance model, for each split.

    ``x`` is (m, n); rows are scored independently around their common mean.
    Returns (m, n - 2*min_size + 1) scores for splits min_size..n-min_size.
    """
    n = x.shape[1]
    dev2 = (x - x.mean(axis=1, keepdims=True)) ** 2
    csum = np.cumsum(dev2, axis=1)
    total = csum[:, -1:]
    k = np.arange(min_size, n - min_size + 1)
    left = csum[:, k - 1]
    right = total - left
    var0 = total / n
    floor = np.maximum(var0 * _VAR_FLOOR, np.finfo(float).tiny)
    v1 = np.maximum(left / k, floor)
    v2 = np.maximum(right / (n - k), floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = n * np.log(np.maximum(var0, floor)) - k * np.log(v1) - (n - k) * np.log(v2)
    llr[np.broadcast_to(var0 == 0, llr.shape)] = 0.0
    return llr


class VarianceChangePoint(BaseEstimator):
    """Locate one change in variance and test it against random reorderings.

    The split maximises the Gaussian log-likelihood gain of separate
    variances on either side over a single variance (both around the
    series mean). The p-value is the share of permuted series, plus the
    observed one, scoring at least as high.

    Permutations are drawn in blocks of ``PERM_BLOCK`` from seeds spawned
    off ``random_state``, so the result does not depend on ``n_jobs``.
    """

    def __init__(self, alpha: float = 0.05, n_permutations: int = 999, random_state: int = 0,
                 min_size: int = 2):
        self.alpha = alpha
        self.n_permutations = n_permutations
        self.random_state = random_state
        self.min_size = min_size

    def fit(self, X, T=None):
        x = check_array(X, ensure_2d=False, dtype=float).ravel()
        n = len(x)
        if n < max(6, 2 * self.min_size):
            raise ValueError(f"change-point detection needs at least 6 points, got {n}")
        if self.n_permutations < 199:
            raise ValueError("use at least 199 permutations")
        scores = _llr_profile(x[None, :], self.min_size)[0]
        best = int(np.argmax(scores))
        stat = float(scores[best])
        self.index_ = best + self.min_size
        self.statistic_ = stat
        self.scores_ = scores
        if stat <= 0:
            self.p_value_ = 1.0
        else:
            n_blocks = -(-self.n_permutations // PERM_BLOCK)
            seeds = np.random.SeedSequence(self.random_state).spawn(n_blocks)
            exceed = 0
            for b, ss in enumerate(seeds):
                size = min(PERM_BLOCK, self.n_permutations - b * PERM_BLOCK)
                rng = np.random.default_rng(ss)
                perms = rng.permuted(np.broadcast_to(x, (size, n)), axis=1)
                null = _llr_profile(perms, self.min_size).max(axis=1)
                exceed += int(np.sum(null >= stat * (1 - 1e-12)))
            self.p_value_ = (exceed + 1) / (self.n_permutations + 1)
        self.significant_ = bool(self.p_value_ < self.alpha)
        self.split_T_ = None if T is None else float(np.asarray(T, dtype=float)[self.index_])
        return self

    def result(self) -> ChangePointResult:
        check_is_fitted(self, "index_")
        return ChangePointResult(self.index_, self.statistic_, self.p_value_, self.significant_, self.split_T_)


def detect_variance_changepoint(values, alpha: float = 0.05, permutations: int = 999, seed: int = 0,
                                T=None) -> ChangePointResult:
    est = VarianceChangePoint(alpha=alpha, n_permutations=permutations, random_state=seed)
    return est.fit(values, T).result()


def exponential_residuals(series: ProgressSeries, log: bool = False) -> np.ndarray:
    """Residuals of a single exponential fit; ``log=True`` uses log(y) - log(fit)."""
    fit = ExponentialDecay().fit(series.T, series.y)
    pred = fit.predict(series.T)
    if log:
        return np.log(series.y) - np.log(pred)
    return series.y - pred


def read_values_csv(text: str) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Read a ``value`` column (or ``residual``), with optional ``T``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty input")
    col = "value" if "value" in rows[0] else "residual" if "residual" in rows[0] else None
    if col is None:
        raise ValueError("expected a 'value' or 'residual' column")
    values = np.array([float(r[col]) for r in rows])
    T = np.array([float(r["T"]) for r in rows]) if "T" in rows[0] else None
    return values, T
