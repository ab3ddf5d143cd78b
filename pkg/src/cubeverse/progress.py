"""Progress-curve fitting, model comparison, learning curves and curve collapse.

The estimators follow the scikit-learn conventions: constructor arguments
are hyper-parameters, ``fit(T, y)`` returns ``self`` and sets trailing
underscore attributes, ``predict(T)`` evaluates the fitted curve.

Families (all decreasing in competition year ``T``):

=============  ================================  ============
exponential    ``k * exp(-lam * T)``             k, lam
linear         ``a - b * T``                     a, b
power          ``k * T ** -alpha``               k, alpha
progress_eq2   ``A * (1 + exp(r_learn*(tau-T)))``  A, r_learn, tau
=============  ================================  ============

``progress_eq2`` pairs with the sigmoid learning curve
``p_f(T) = 1/2 + 1/(2 (1 + exp(r_learn (tau - T))))``: the progress curve
is ``A / (2 p_f - 1)``, the first-passage length over a drift of
``2 p_f - 1``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._lsq import damped_gauss_newton

FAMILIES = ("exponential", "linear", "power", "progress_eq2")
_EXP_CLIP = 700.0


class FitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProgressSeries:
    """Annual record series for one event, ``T`` counted from year 1."""

    label: str
    T: np.ndarray
    y: np.ndarray
    kind: str = "time"
    record_breakers: Optional[int] = None

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if T.ndim != 1 or T.shape != y.shape:
            raise ValueError("T and y must be 1-D arrays of equal length")
        if len(T) and np.any(np.diff(T) <= 0):
            raise ValueError(f"series {self.label!r}: T must be strictly increasing")
        if np.any(y <= 0):
            raise ValueError(f"series {self.label!r}: values must be positive")
        if self.kind not in ("time", "moves"):
            raise ValueError(f"unknown series kind {self.kind!r}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return len(self.T)

    def scaled(self, c: float) -> "ProgressSeries":
        return ProgressSeries(self.label, self.T, self.y * c, self.kind, self.record_breakers)

    def head(self, n_years: float) -> "ProgressSeries":
        """Points with ``T <= n_years``."""
        keep = self.T <= n_years
        return ProgressSeries(self.label, self.T[keep], self.y[keep], self.kind, self.record_breakers)


def _as_T(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("expected a single column of competition years")
        X = X[:, 0]
    return X


def _check_xy(X, y, min_points):
    T = _as_T(X)
    y = check_array(y, ensure_2d=False, dtype=float)
    if y.ndim != 1 or len(y) != len(T):
        raise ValueError("X and y have inconsistent lengths")
    if len(T) < min_points:
        raise FitError(f"need at least {min_points} points, got {len(T)}")
    return T, y


def bic_value(rss: float, n_points: int, n_params: int) -> float:
    """``n ln(rss/n) + p ln n`` with ``p`` = model parameters + 1 for the noise variance."""
    if rss <= 0:
        raise FitError("BIC is undefined for a perfect fit (rss = 0)")
    p = n_params + 1
    if n_points <= p:
        raise FitError(f"BIC needs more points ({n_points}) than parameters ({p})")
    return n_points * math.log(rss / n_points) + p * math.log(n_points)


class _Family(RegressorMixin, BaseEstimator):
    family = ""
    n_params = 2
    min_points = 3

    def _finish(self, T, y, params: dict, converged: bool, n_iter: int):
        self.params_ = {k: float(v) for k, v in params.items()}
        self.converged_ = bool(converged)
        self.n_iter_ = n_iter
        self.n_points_ = len(T)
        resid = y - self.predict(T)
        self.rss_ = float(resid @ resid)
        try:
            self.bic_ = bic_value(self.rss_, self.n_points_, self.n_params)
        except FitError:
            self.bic_ = None
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        return self._curve(_as_T(X))

    def result(self) -> "FitResult":
        check_is_fitted(self, "params_")
        return FitResult(
            family=self.family,
            params=dict(self.params_),
            rss=self.rss_,
            bic=self.bic_,
            n_points=self.n_points_,
            converged=self.converged_,
        )


class ExponentialDecay(_Family):
    """``y = k exp(-lam T)``; ``lam`` is reported as a positive decay rate."""

    family = "exponential"

    def __init__(self, max_iter: int = 500):
        self.max_iter = max_iter

    def fit(self, X, y):
        T, y = _check_xy(X, y, self.min_points)
        if np.any(y <= 0):
            raise FitError("exponential fit needs positive values")
        slope, icpt = np.polyfit(T, np.log(y), 1)
        x0 = np.array([math.exp(icpt), -slope])

        def resid(x):
            return x[0] * np.exp(np.clip(-x[1] * T, -_EXP_CLIP, _EXP_CLIP)) - y

        def jac(x):
            e = np.exp(np.clip(-x[1] * T, -_EXP_CLIP, _EXP_CLIP))
            return np.column_stack([e, -x[0] * T * e])

        res = damped_gauss_newton(resid, jac, x0, max_iter=self.max_iter)
        return self._finish(T, y, {"k": res.x[0], "lam": res.x[1]}, res.converged, res.n_iter)

    def _curve(self, T):
        return self.params_["k"] * np.exp(-self.params_["lam"] * T)


class LinearTrend(_Family):
    """``y = a - b T`` by ordinary least squares."""

    family = "linear"

    def fit(self, X, y):
        T, y = _check_xy(X, y, self.min_points)
        A = np.column_stack([np.ones_like(T), -T])
        (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
        return self._finish(T, y, {"a": float(a), "b": float(b)}, True, 1)

    def _curve(self, T):
        return self.params_["a"] - self.params_["b"] * T


class PowerLaw(_Family):
    """``y = k T^-alpha``, seeded from a log-log regression."""

    family = "power"

    def __init__(self, max_iter: int = 500):
        self.max_iter = max_iter

    def fit(self, X, y):
        T, y = _check_xy(X, y, self.min_points)
        if np.any(T <= 0) or np.any(y <= 0):
            raise FitError("power fit needs positive T and y")
        logT = np.log(T)
        slope, icpt = np.polyfit(logT, np.log(y), 1)
        x0 = np.array([math.exp(icpt), -slope])

        def resid(x):
            return x[0] * np.exp(-x[1] * logT) - y

        def jac(x):
            e = np.exp(-x[1] * logT)
            return np.column_stack([e, -x[0] * logT * e])

        res = damped_gauss_newton(resid, jac, x0, max_iter=self.max_iter)
        return self._finish(T, y, {"k": res.x[0], "alpha": res.x[1]}, res.converged, res.n_iter)

    def _curve(self, T):
        return self.params_["k"] * T ** (-self.params_["alpha"])


class ProgressCurve(_Family):
    """``y = A (1 + exp(r_learn (tau - T)))``.

    With ``normalize=True`` the series is divided by its fitted asymptote
    ``A`` and refitted with ``A`` pinned to 1; ``params_["A"]`` is then 1,
    the scale lives in ``params_["asymptote"]``, and ``predict`` returns
    values in the original units.

    The search starts from the best point of a (r_learn, tau) grid, where
    ``A`` has a closed form, and is refined by damped Gauss-Newton in
    (log A, log r_learn, tau).
    """

    family = "progress_eq2"
    n_params = 3
    min_points = 4

    def __init__(self, normalize: bool = True, max_iter: int = 500, n_rates: int = 40, n_taus: int = 61):
        self.normalize = normalize
        self.max_iter = max_iter
        self.n_rates = n_rates
        self.n_taus = n_taus

    @staticmethod
    def _shape(r, tau, T):
        return 1.0 + np.exp(np.clip(r * (tau - T), -_EXP_CLIP, _EXP_CLIP))

    def _grid_seed(self, T, y):
        span = T.max() - T.min()
        best = (np.inf, None)
        for r in np.geomspace(0.01, 3.0, self.n_rates):
            for tau in np.linspace(T.min() - span, T.max() + 2 * span, self.n_taus):
                f = self._shape(r, tau, T)
                A = (f @ y) / (f @ f)
                if A <= 0:
                    continue
                rss = float(np.sum((A * f - y) ** 2))
                if rss < best[0]:
                    best = (rss, (A, r, tau))
        if best[1] is None:
            raise FitError("no admissible starting point on the (r_learn, tau) grid")
        return best[1]

    def _solve(self, T, y, x0, fixed_A):
        def unpack(x):
            if fixed_A:
                return 1.0, math.exp(x[0]), x[1]
            return math.exp(x[0]), math.exp(x[1]), x[2]

        def resid(x):
            A, r, tau = unpack(x)
            return A * self._shape(r, tau, T) - y

        def jac(x):
            A, r, tau = unpack(x)
            e = np.exp(np.clip(r * (tau - T), -_EXP_CLIP, _EXP_CLIP))
            d_logr = A * e * r * (tau - T)
            d_tau = A * e * r
            if fixed_A:
                return np.column_stack([d_logr, d_tau])
            return np.column_stack([A * (1.0 + e), d_logr, d_tau])

        res = damped_gauss_newton(resid, jac, x0, max_iter=self.max_iter)
        return unpack(res.x), res

    def fit(self, X, y):
        T, y = _check_xy(X, y, self.min_points)
        if np.any(y <= 0):
            raise FitError("progress curve fit needs positive values")
        A0, r0, tau0 = self._grid_seed(T, y)
        (A, r, tau), res = self._solve(T, y, np.array([math.log(A0), math.log(r0), tau0]), False)
        converged, n_iter = res.converged, res.n_iter
        asymptote = A
        if self.normalize:
            (_, r, tau), res2 = self._solve(T, y / A, np.array([math.log(r), tau]), True)
            converged, n_iter = converged and res2.converged, n_iter + res2.n_iter
            A = 1.0
        params = {"A": A, "r_learn": r, "tau": tau, "asymptote": asymptote}
        return self._finish(T, y, params, converged, n_iter)

    def _curve(self, T):
        p = self.params_
        return p["asymptote"] * self._shape(p["r_learn"], p["tau"], T)


_ESTIMATORS = {
    "exponential": ExponentialDecay,
    "linear": LinearTrend,
    "power": PowerLaw,
    "progress_eq2": ProgressCurve,
}


@dataclass(frozen=True)
class FitResult:
    family: str
    params: dict
    rss: float
    bic: Optional[float]
    n_points: int
    converged: bool

    @property
    def n_params(self) -> int:
        return _ESTIMATORS[self.family].n_params

    def predict(self, T) -> np.ndarray:
        est = _ESTIMATORS[self.family]()
        est.params_ = self.params
        return est.predict(np.asarray(T, dtype=float))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": {k: float(v) for k, v in self.params.items()},
            "rss": self.rss,
            "bic": self.bic,
            "n_points": self.n_points,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        if d.get("family") not in FAMILIES:
            raise ValueError(f"unknown family {d.get('family')!r}")
        return cls(d["family"], dict(d["params"]), d["rss"], d.get("bic"), d["n_points"], d["converged"])


def fit_exponential(series: ProgressSeries) -> FitResult:
    return ExponentialDecay().fit(series.T, series.y).result()


def fit_linear(series: ProgressSeries) -> FitResult:
    return LinearTrend().fit(series.T, series.y).result()


def fit_power(series: ProgressSeries) -> FitResult:
    return PowerLaw().fit(series.T, series.y).result()


def fit_progress_eq2(series: ProgressSeries, normalize: bool = True) -> FitResult:
    return ProgressCurve(normalize=normalize).fit(series.T, series.y).result()


def fit_family(series: ProgressSeries, family: str) -> FitResult:
    if family not in _ESTIMATORS:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    return _ESTIMATORS[family]().fit(series.T, series.y).result()


def bic(fit: FitResult) -> float:
    return bic_value(fit.rss, fit.n_points, fit.n_params)


def compare_families(series: ProgressSeries, families: Sequence[str] = ("exponential", "linear", "power")) -> dict:
    """Fit each family and report BIC differences relative to the exponential."""
    fits = {f: fit_family(series, f) for f in families}
    base = fits.get("exponential")
    delta = {}
    if base is not None and base.bic is not None:
        delta = {f: r.bic - base.bic for f, r in fits.items() if r.bic is not None and f != "exponential"}
    return {"fits": fits, "delta_bic": delta}


def half_life(lam: float) -> float:
    """Years for an exponential decay at rate ``lam`` to halve."""
    if lam <= 0:
        raise ValueError("half-life needs a positive decay rate")
    return math.log(2.0) / lam


@dataclass(frozen=True, eq=False)
class LearningCurve:
    """Forward-move probability per competition year implied by a progress fit."""

    r_learn: float
    tau: float
    asymptote: float = 1.0
    samples: list = field(default_factory=list)

    def drift(self, T) -> np.ndarray:
        """``2 p_f - 1``, computed directly so it keeps full precision near ``p_f = 1/2``."""
        T = np.asarray(T, dtype=float)
        return 1.0 / (1.0 + np.exp(np.clip(self.r_learn * (self.tau - T), -_EXP_CLIP, _EXP_CLIP)))

    def p_f(self, T) -> np.ndarray:
        return 0.5 + 0.5 * self.drift(T)

    def progress(self, T, G: Optional[float] = None) -> np.ndarray:
        """First-passage length ``G / (2 p_f - 1)``; ``G`` defaults to the fitted asymptote."""
        G = self.asymptote if G is None else G
        return G / self.drift(T)

    def to_dict(self) -> dict:
        return {
            "r_learn": self.r_learn,
            "tau": self.tau,
            "asymptote": self.asymptote,
            "samples": [[float(t), float(p)] for t, p in self.samples],
        }


def derive_learning_curve(fit: FitResult, horizon: int) -> LearningCurve:
    if fit.family != "progress_eq2":
        raise FitError("learning curves come from progress_eq2 fits only")
    if not fit.converged:
        raise FitError("the progress fit did not converge")
    if horizon < 1:
        raise ValueError("horizon must be at least one year")
    p = fit.params
    curve = LearningCurve(p["r_learn"], p["tau"], p.get("asymptote", p["A"]))
    T = np.arange(1, int(horizon) + 1, dtype=float)
    return LearningCurve(curve.r_learn, curve.tau, curve.asymptote, list(zip(T, curve.p_f(T))))


def collapse(series_set: Sequence[ProgressSeries]) -> tuple[list[ProgressSeries], float]:
    """Divide each series by its maximum and measure how well they overlay.

    Dispersion is the largest coefficient of variation across series over
    the shared range of ``T``, interpolating linearly between years.
    """
    if len(series_set) < 2:
        raise ValueError("collapse needs at least two series")
    for s in series_set:
        if len(s) < 3:
            raise ValueError(f"series {s.label!r} has fewer than 3 points")
    normed = [ProgressSeries(s.label, s.T, s.y / s.y.max(), s.kind, s.record_breakers) for s in series_set]
    lo = max(s.T[0] for s in normed)
    hi = min(s.T[-1] for s in normed)
    if lo > hi:
        raise ValueError("series do not share any range of T")
    grid = np.unique(np.concatenate([s.T[(s.T >= lo) & (s.T <= hi)] for s in normed]))
    values = np.array([np.interp(grid, s.T, s.y) for s in normed])
    cv = values.std(axis=0) / values.mean(axis=0)
    return normed, float(cv.max())


# -- series CSV --------------------------------------------------------------


def read_series_csv(text: str) -> list[ProgressSeries]:
    """Parse ``label,T,y,kind`` rows into series, in order of first appearance."""
    rows = list(csv.DictReader(io.StringIO(text)))
    missing = {"label", "T", "y", "kind"} - set(rows[0] if rows else {})
    if not rows or missing:
        raise ValueError(f"series CSV needs columns label,T,y,kind (missing {sorted(missing)})")
    grouped: dict[str, list] = {}
    kinds: dict[str, str] = {}
    for row in rows:
        grouped.setdefault(row["label"], []).append((float(row["T"]), float(row["y"])))
        kinds[row["label"]] = row["kind"]
    out = []
    for label, pts in grouped.items():
        T, y = zip(*pts)
        out.append(ProgressSeries(label, np.array(T), np.array(y), kinds[label]))
    return out


def write_series_csv(series_set: Sequence[ProgressSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "T", "y", "kind"])
    for s in series_set:
        for t, y in zip(s.T, s.y):
            w.writerow([s.label, repr(float(t)), repr(float(y)), s.kind])
    return buf.getvalue()


def fits_to_json(fits: dict) -> str:
    return json.dumps({k: v.to_dict() for k, v in fits.items()}, indent=2, sort_keys=True)
