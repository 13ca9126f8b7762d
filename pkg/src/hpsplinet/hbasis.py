"""Hyperbolic B-spline basis on uniform knots.

Each basis function is a translate of one prototype supported on five
consecutive knots.  The prototype's four segments live in

    E4(alpha) = span{exp(alpha t), t exp(alpha t), exp(-alpha t), t exp(-alpha t)}

and are stored in unit knot coordinates ``w in [0, 1]`` with the scaled
frequency ``omega = alpha * h``, using the equivalent basis

    cosh(omega w), sinh(omega w)/omega, w sinh(omega w)/omega,
    3 (w cosh(omega w) - sinh(omega w)/omega) / omega**2

which tends to ``1, w, w**2, w**3`` as ``omega -> 0``.  For ``omega >= 1``
the hyperbolic functions become collinear, so the separated exponentials

    exp(omega (w - 1)), (w - 1) exp(omega (w - 1)), exp(-omega w), w exp(-omega w)

are used instead (all bounded by 1 on the segment).  The plain exponential
form is available through :meth:`HyperbolicBasis.exponential_coefficients`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "ALPHA_SWITCH",
    "MAX_ALPHA_H",
    "CENTER_VALUE",
    "UniformKnots",
    "HyperbolicBasis",
    "BasisConstructionError",
    "build_basis",
    "design_matrix",
    "local_basis",
    "local_kind",
]

ALPHA_SWITCH = 1e-4
EXP_SWITCH = 1.0
MAX_ALPHA_H = 30.0
CENTER_VALUE = 2.0 / 3.0
MAX_ORDER = 4

# Uniform cubic B-spline on unit knots, segments 0..3, monomial coefficients.
_CUBIC_COEFFS = np.array(
    [
        [0.0, 0.0, 0.0, 1.0],
        [1.0, 3.0, 3.0, -3.0],
        [4.0, 0.0, -6.0, 3.0],
        [1.0, -3.0, 3.0, -1.0],
    ]
) / 6.0

_KNOT_SNAP = 1e-12


class BasisConstructionError(ValueError):
    """Raised when the prototype system cannot be solved reliably."""


@dataclass(frozen=True)
class UniformKnots:
    """Uniform knots ``xi_k = t_start + (k - 1) h`` for ``k = 1..m``.

    Three further knots on each side are implied so that the boundary
    basis functions are ordinary translates of the prototype.
    """

    t_start: float
    h: float
    m: int

    def __post_init__(self):
        if not np.isfinite(self.t_start):
            raise ValueError("t_start must be finite")
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"knot step must be positive, got {self.h}")
        if int(self.m) != self.m or self.m < 4:
            raise ValueError(f"need at least 4 knots, got m={self.m}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def spanning(cls, a: float, b: float, h: float) -> "UniformKnots":
        """Knots with step `h` from `a` to `b`; ``(b - a) / h`` must be integral."""
        steps = (b - a) / h
        n = int(round(steps))
        if abs(steps - n) > 1e-9 * max(1.0, abs(steps)):
            raise ValueError(f"interval [{a}, {b}] is not a multiple of h={h}")
        return cls(float(a), float(h), n + 1)

    def knot(self, k):
        """Knot ``xi_k`` (1-based; extended indices ``-2..m+3`` allowed)."""
        return self.t_start + (np.asarray(k) - 1) * self.h

    @property
    def knots(self) -> np.ndarray:
        return self.knot(np.arange(1, self.m + 1))

    @property
    def t_end(self) -> float:
        return float(self.knot(self.m))

    @property
    def n_basis(self) -> int:
        return self.m + 2


# ---------------------------------------------------------------------------
# Local E4 basis in unit coordinates
# ---------------------------------------------------------------------------
def _sinhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0, np.sinh(xs) / xs)


_G_SERIES = np.array(
    [3.0 * 2 * k / float(np.prod(np.arange(1, 2 * k + 2))) for k in range(1, 11)]
)


def _cubic_shape(x):
    """``3 (x cosh x - sinh x) / x**3``, equal to 1 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    xs = np.where(small, 1.0, x)
    direct = 3.0 * (xs * np.cosh(xs) - np.sinh(xs)) / xs**3
    series = np.polynomial.polynomial.polyval(x * x, _G_SERIES)
    return np.where(small, series, direct)


def _shifted_exp_derivs(lam, x, order):
    """``d^n/dx^n`` of ``exp(lam x)`` and ``x exp(lam x)``."""
    e = np.exp(lam * x)
    ln = lam**order
    dxe = (ln * x + (order * lam ** (order - 1) if order else 0.0)) * e
    return ln * e, dxe


def local_basis(omega: float, w, order: int = 0, kind: str = "hyperbolic") -> np.ndarray:
    """Derivative of the four local E4 functions w.r.t. ``w``.

    `kind` selects the stable hyperbolic functions (small ``omega``) or the
    separated exponentials (large ``omega``).  Returns an array of shape
    ``w.shape + (4,)``.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    w = np.asarray(w, dtype=float)
    if kind == "exponential":
        e1, xe1 = _shifted_exp_derivs(omega, w - 1.0, order)
        e2, xe2 = _shifted_exp_derivs(-omega, w, order)
        return np.stack(np.broadcast_arrays(e1, xe1, e2, xe2), axis=-1)
    if kind != "hyperbolic":
        raise ValueError(f"unknown local basis kind {kind!r}")
    x = omega * w
    C = np.cosh(x)
    S = w * _sinhc(x)
    o2 = omega * omega
    if order == 0:
        cols = (C, S, w * S, w**3 * _cubic_shape(x))
    elif order == 1:
        cols = (o2 * S, C, S + w * C, 3.0 * w * S)
    elif order == 2:
        cols = (o2 * C, o2 * S, 2.0 * C + o2 * w * S, 3.0 * (S + w * C))
    elif order == 3:
        cols = (o2 * o2 * S, o2 * C, 3.0 * o2 * S + o2 * w * C, 6.0 * C + 3.0 * o2 * w * S)
    else:
        cols = (
            o2 * o2 * C,
            o2 * o2 * S,
            4.0 * o2 * C + o2 * o2 * w * S,
            9.0 * o2 * S + 3.0 * o2 * w * C,
        )
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def local_kind(omega: float) -> str:
    return "exponential" if omega >= EXP_SWITCH else "hyperbolic"


def _construction_system(omega: float) -> tuple[np.ndarray, np.ndarray]:
    """16x16 system for the prototype's segment coefficients.

    Rows: value/slope/curvature vanish at both support ends (6), C2 joins at
    the three interior knots (9), centre value fixed (1).
    """
    kind = local_kind(omega)

    def phi(w, order):
        return local_basis(omega, w, order, kind)

    A = np.zeros((16, 16))
    rhs = np.zeros(16)
    row = 0
    for order in range(3):
        A[row, 0:4] = phi(0.0, order)
        row += 1
    for order in range(3):
        A[row, 12:16] = phi(1.0, order)
        row += 1
    for seg in range(3):
        for order in range(3):
            A[row, 4 * seg : 4 * seg + 4] = phi(1.0, order)
            A[row, 4 * seg + 4 : 4 * seg + 8] = -phi(0.0, order)
            row += 1
    A[row, 4:8] = phi(1.0, 0)
    rhs[row] = CENTER_VALUE
    return A, rhs


@lru_cache(maxsize=256)
def _prototype_coeffs(omega: float) -> np.ndarray:
    A, rhs = _construction_system(omega)
    # row/column equilibration: derivative rows scale like omega**2 and the
    # outer segments' coefficients like exp(-omega)
    r = 1.0 / np.abs(A).max(axis=1)
    As = A * r[:, None]
    s = 1.0 / np.abs(As).max(axis=0)
    As *= s
    cond = np.linalg.cond(As)
    if not np.isfinite(cond) or cond > 1e14:
        raise BasisConstructionError(
            f"prototype system is singular for alpha*h={omega:g} (cond={cond:.3g})"
        )
    c = (s * np.linalg.solve(As, rhs * r)).reshape(4, 4)
    c.setflags(write=False)
    return c


# ---------------------------------------------------------------------------
# Basis object
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class HyperbolicBasis:
    """The ``m + 2`` hyperbolic B-splines ``B_0..B_{m+1}`` on `knots`.

    ``B_j`` is centred at ``xi_j`` and supported on ``[xi_{j-2}, xi_{j+2}]``.
    ``coeffs[seg, k]`` holds the prototype's segment `seg` in the local
    stable basis of :func:`local_basis` (unit coordinates).
    """

    alpha: float
    knots: UniformKnots
    coeffs: np.ndarray = field(repr=False)
    degenerate: bool = False

    @property
    def h(self) -> float:
        return self.knots.h

    @property
    def omega(self) -> float:
        """Frequency in unit knot coordinates (0 for the cubic fallback)."""
        return 0.0 if self.degenerate else abs(self.alpha) * self.knots.h

    @property
    def kind(self) -> str:
        """Local segment representation, see :func:`local_basis`."""
        return local_kind(self.omega)

    @property
    def n_basis(self) -> int:
        return self.knots.n_basis

    def center(self, j):
        return self.knots.knot(j)

    def segment(self, seg: int, w, order: int = 0) -> np.ndarray:
        """Analytic expression of prototype segment `seg` at unit coordinate `w`.

        Derivatives are with respect to ``t`` (i.e. scaled by ``h**-order``).
        The expression is evaluated even outside ``[0, 1]``.
        """
        vals = local_basis(self.omega, w, order, self.kind) @ self.coeffs[seg]
        return vals / self.h**order

    def prototype(self, v, order: int = 0) -> np.ndarray:
        """Prototype at knot coordinate ``v`` (support ``[0, 4]``)."""
        v = np.asarray(v, dtype=float)
        inside = (v > 0.0) & (v < 4.0)
        vc = np.where(inside, v, 0.5)
        seg = np.minimum(np.floor(vc).astype(int), 3)
        w = vc - seg
        local = local_basis(self.omega, w, order, self.kind)
        vals = np.einsum("...k,...k->...", local, self.coeffs[seg])
        return np.where(inside, vals / self.h**order, 0.0)

    def _knot_coordinate(self, j, t):
        """Position of `t` relative to the left end of ``B_j``'s support, in steps."""
        d = (np.asarray(t, dtype=float) - self.center(j)) / self.h
        near = np.round(d)
        d = np.where(np.abs(d - near) < _KNOT_SNAP * np.maximum(1.0, np.abs(d)), near, d)
        return d + 2.0

    def eval(self, j: int, t, order: int = 0):
        """`order`-th derivative of ``B_j`` at `t`; exactly 0 off the support."""
        if not 0 <= j <= self.knots.m + 1:
            raise IndexError(f"basis index {j} outside 0..{self.knots.m + 1}")
        out = self.prototype(self._knot_coordinate(j, t), order)
        return float(out) if np.ndim(out) == 0 else out

    def design_matrix(self, t_points, order: int = 0) -> np.ndarray:
        """Matrix with entries ``B_j^(order)(t_i)``, shape ``(d, m + 2)``."""
        t = np.atleast_1d(np.asarray(t_points, dtype=float))
        lo, hi = self.knots.t_start, self.knots.t_end
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise ValueError(f"points outside knot range [{lo}, {hi}]")
        j = np.arange(self.n_basis)
        return self.prototype(self._knot_coordinate(j[None, :], t[:, None]), order)

    def exponential_coefficients(self) -> np.ndarray:
        """Segment coefficients in ``{e^{au}, u e^{au}, e^{-au}, u e^{-au}}``.

        ``u`` is measured in time units from the segment's left knot.  Not
        available for the cubic fallback, where this basis degenerates.
        """
        if self.degenerate or self.alpha == 0:
            raise ValueError("exponential form is undefined in the cubic limit")
        a, h = abs(self.alpha), self.h
        if self.kind == "exponential":
            q = np.exp(-a * h)
            T = np.array(
                [
                    [q, 0.0, 0.0, 0.0],
                    [-q, q / h, 0.0, 0.0],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, 0.0, 1.0 / h],
                ]
            )
            return self.coeffs @ T
        # unit coordinate w = u / h; cosh = (e+ + e-)/2, sinh(omega w)/omega = (e+ - e-)/(2 a h)
        T = np.array(
            [
                [0.5, 0.0, 0.5, 0.0],
                [0.5 / (a * h), 0.0, -0.5 / (a * h), 0.0],
                [0.0, 0.5 / (a * h * h), 0.0, -0.5 / (a * h * h)],
                [
                    -1.5 / (a**3 * h**3),
                    1.5 / (a**2 * h**3),
                    1.5 / (a**3 * h**3),
                    1.5 / (a**2 * h**3),
                ],
            ]
        )
        return self.coeffs @ T


def build_basis(alpha: float, knots: UniformKnots) -> HyperbolicBasis:
    """Construct the hyperbolic B-spline basis for frequency `alpha`.

    Raises
    ------
    BasisConstructionError
        If ``|alpha h|`` exceeds 30 or the prototype system is singular.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    omega = abs(alpha) * knots.h
    if omega > MAX_ALPHA_H:
        raise BasisConstructionError(f"|alpha h| = {omega:g} exceeds {MAX_ALPHA_H}")
    if omega < ALPHA_SWITCH:
        coeffs = _CUBIC_COEFFS.copy()
        coeffs.setflags(write=False)
        return HyperbolicBasis(alpha, knots, coeffs, degenerate=True)
    return HyperbolicBasis(alpha, knots, _prototype_coeffs(omega))


def design_matrix(basis: HyperbolicBasis, t_points) -> np.ndarray:
    return basis.design_matrix(t_points)
