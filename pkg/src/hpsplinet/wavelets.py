"""Periodic orthonormal DWT and the approximation projector ``V_J``.

``V_J`` keeps the level-``J`` scaling coefficients and zeroes every detail
band ``1..J``; being an orthogonal projection it is non-expansive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

__all__ = [
    "FILTERS",
    "WaveletProjector",
    "dwt_step",
    "idwt_step",
    "wavedec",
    "waverec",
    "project",
    "diameter",
    "diameter_projected",
]

_SQ3 = np.sqrt(3.0)
FILTERS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db4": np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4.0 * np.sqrt(2.0)),
}
_ALIASES = {"db2": "db4", "daubechies4": "db4", "d4": "db4"}


def _filters(family: str):
    name = _ALIASES.get(family.lower(), family.lower())
    try:
        lo = FILTERS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet family {family!r}") from None
    # quadrature mirror: g[k] = (-1)**k h[L-1-k]
    hi = lo[::-1] * (-1.0) ** np.arange(lo.size)
    return lo, hi


def dwt_step(x, family: str = "haar"):
    """One periodic analysis step along the last axis: ``(approx, detail)``."""
    lo, hi = _filters(family)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n % 2:
        raise ValueError("signal length must be even")
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(lo.size)[None, :]) % n
    win = x[..., idx]
    return win @ lo, win @ hi


def idwt_step(a, d, family: str = "haar"):
    """Inverse of :func:`dwt_step` (adjoint of the orthogonal analysis map)."""
    lo, hi = _filters(family)
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    half = a.shape[-1]
    n = 2 * half
    out = np.zeros(a.shape[:-1] + (n,))
    for k in range(lo.size):
        pos = (2 * np.arange(half) + k) % n
        np.add.at(out, (..., pos), a * lo[k] + d * hi[k])
    return out


def _check_level(n: int, level: int):
    if n < 2 or n & (n - 1):
        raise ValueError(f"signal length {n} is not a power of two")
    max_level = n.bit_length() - 1
    if not 1 <= level <= max_level:
        raise ValueError(f"level {level} outside 1..{max_level} for length {n}")


def wavedec(x, level: int, family: str = "haar"):
    """``[a_J, d_J, ..., d_1]`` for a full periodic decomposition."""
    x = np.asarray(x, dtype=float)
    _check_level(x.shape[-1], level)
    details = []
    a = x
    for _ in range(level):
        a, d = dwt_step(a, family)
        details.append(d)
    return [a] + details[::-1]


def waverec(coeffs, family: str = "haar"):
    a = coeffs[0]
    for d in coeffs[1:]:
        a = idwt_step(a, d, family)
    return a


@dataclass(frozen=True)
class WaveletProjector:
    family: str = "haar"
    level: int = 1
    signal_len: int = 256

    def __post_init__(self):
        _filters(self.family)
        _check_level(self.signal_len, self.level)

    def __call__(self, s):
        return project(self, s)


def project(proj: WaveletProjector, s):
    """Orthogonal projection onto the level-``J`` scaling space.

    Works row-wise on 2-D input.
    """
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != proj.signal_len:
        raise ValueError(f"expected length {proj.signal_len}, got {s.shape[-1]}")
    coeffs = wavedec(s, proj.level, proj.family)
    coeffs = [coeffs[0]] + [np.zeros_like(d) for d in coeffs[1:]]
    return waverec(coeffs, proj.family)


def _as_matrix(dataset):
    if isinstance(dataset, np.ndarray):
        X = np.atleast_2d(dataset.astype(float))
    else:
        X = np.stack([np.asarray(getattr(s, "samples", s), dtype=float) for s in dataset])
    if X.shape[0] < 2:
        raise ValueError("diameter needs at least two signals")
    return X


def diameter(dataset) -> float:
    """Largest pairwise Euclidean distance in the dataset."""
    return float(pdist(_as_matrix(dataset)).max())


def diameter_projected(dataset, proj: WaveletProjector) -> float:
    return diameter(project(proj, _as_matrix(dataset)))
