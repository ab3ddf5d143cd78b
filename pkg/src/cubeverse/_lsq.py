"""Thin wrapper over MINPACK's Levenberg-Marquardt (damped Gauss-Newton)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


@dataclass
class LSQResult:
    x: np.ndarray
    rss: float
    converged: bool
    n_iter: int


def damped_gauss_newton(residuals, jacobian, x0, max_iter: int = 500, tol: float = 1e-15) -> LSQResult:
    """Minimise ``sum(residuals(x)**2)``.

    Columns are scaled by the Jacobian norms (``x_scale="jac"``), so
    rescaling the data leaves the step sequence unchanged. ``max_iter``
    bounds the number of residual evaluations per parameter.
    """
    x0 = np.asarray(x0, dtype=float)
    res = least_squares(
        residuals,
        x0,
        jac=jacobian,
        method="lm",
        x_scale="jac",
        xtol=tol,
        ftol=tol,
        gtol=tol,
        max_nfev=max_iter * (len(x0) + 1),
    )
    return LSQResult(res.x, float(2.0 * res.cost), bool(res.status > 0), int(res.nfev))
