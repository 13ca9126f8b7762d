"""Exhaustive search for the frequency that best fits a signal.

The objective is the data misfit ``sse(alpha)`` of the HP-spline at fixed
smoothing weight.  A log-spaced grid is scanned and the best cell can be
refined by golden-section search within its neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .hpfit import DEFAULT_KNOT_STEP, DEFAULT_LAMBDA, FitError, default_knots, fit, fit_many

__all__ = ["AlphaSearchConfig", "OracleError", "alpha_grid", "sse_profile", "optimal_alpha", "optimal_alpha_batch"]


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlphaSearchConfig:
    alpha_min: float = 0.05
    alpha_max: float = 10.0
    grid_size: int = 200
    refine: bool = True
    xtol: float = 1e-4
    lam: float = DEFAULT_LAMBDA
    knot_step: float = DEFAULT_KNOT_STEP

    def __post_init__(self):
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("need 0 < alpha_min < alpha_max for a log grid")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")


def alpha_grid(cfg: AlphaSearchConfig) -> np.ndarray:
    return np.geomspace(cfg.alpha_min, cfg.alpha_max, cfg.grid_size)


def sse_profile(t, y, alphas, lam=DEFAULT_LAMBDA, knots=None) -> np.ndarray:
    """Fit misfit for each alpha; ``inf`` where the fit fails."""
    if knots is None:
        knots = default_knots(t)
    out = np.empty(len(alphas))
    for i, a in enumerate(alphas):
        try:
            out[i] = fit(t, y, a, lam, knots).sse
        except (FitError, ValueError):
            out[i] = np.inf
    return out


def optimal_alpha(t, y, cfg: AlphaSearchConfig = AlphaSearchConfig()) -> tuple[float, float]:
    """Return ``(alpha*, sse*)``.

    Ties on the grid go to the smaller alpha.  Refinement only replaces the
    grid optimum when it strictly lowers the misfit.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    knots = default_knots(t, cfg.knot_step)
    grid = alpha_grid(cfg)
    return _refine(t, y, grid, sse_profile(t, y, grid, cfg.lam, knots), knots, cfg)


def optimal_alpha_batch(t, Y, cfg: AlphaSearchConfig = AlphaSearchConfig()) -> tuple[np.ndarray, np.ndarray]:
    """:func:`optimal_alpha` for every row of `Y`.

    The grid scan shares one factorization per alpha across all rows;
    results match the row-by-row search.
    """
    t = np.asarray(t, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    knots = default_knots(t, cfg.knot_step)
    grid = alpha_grid(cfg)
    table = np.empty((Y.shape[0], grid.size))
    for k, a in enumerate(grid):
        try:
            table[:, k] = fit_many(t, Y, a, cfg.lam, knots)[1]
        except (FitError, ValueError):
            table[:, k] = np.inf
    out = [_refine(t, y, grid, sse, knots, cfg) for y, sse in zip(Y, table)]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def _refine(t, y, grid, sse, knots, cfg):
    if not np.any(np.isfinite(sse)):
        raise OracleError("every HP-spline fit on the alpha grid failed")
    k = int(np.argmin(sse))  # first minimum, i.e. smallest alpha among ties
    best_a, best_s = float(grid[k]), float(sse[k])
    if not cfg.refine or best_s == 0.0:
        return best_a, best_s

    def objective(a):
        try:
            return fit(t, y, a, cfg.lam, knots).sse
        except (FitError, ValueError):
            return np.inf

    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if 0 < k < grid.size - 1:
        res = minimize_scalar(objective, bracket=(lo, best_a, hi), method="golden",
                              options={"xtol": cfg.xtol / best_a})
    else:
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                              options={"xatol": cfg.xtol})
    if np.isfinite(res.fun) and res.fun < best_s and lo <= res.x <= hi:
        best_a, best_s = float(res.x), float(res.fun)
    return best_a, best_s
