"""Signal and parameter-function generators for the experiments.

All generators are pure functions of their arguments and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "AlphaFunction",
    "ALPHA_FUNCTIONS",
    "LabeledSignal",
    "get_alpha_function",
    "eval_alpha",
    "unit_grid",
    "multiscale_grid",
    "make_sweep_dataset",
    "make_validation_grid",
    "make_multiscale",
    "multiscale_bound",
    "make_scenario_signals",
    "add_noise",
    "stack",
]

SWEEP_DIM = 32
MULTISCALE_DIM = 256
X0 = 0.37


def _a1(x):
    return 1.0 / (1.0 + x)


def _a2(x):
    return 1.0 + 0.5 * np.sin(2.0 * np.pi * x)


def _a3(x):
    # k = 2, exponent k - 0.5
    return x**2 + np.abs(x - X0) ** 1.5


def _a4(x):
    x = np.asarray(x, dtype=float)
    return np.select(
        [x <= 1.0 / 3.0, x <= 0.6, x <= 0.65],
        [x**2, 11.0 / 3.0 * x - 10.0 / 9.0, np.full_like(x, 49.0 / 45.0)],
        default=3.0 * x**2,
    )


@dataclass(frozen=True)
class AlphaFunction:
    id: str
    fn: Callable = field(repr=False)
    singular_set: tuple[float, ...] = ()

    def __call__(self, x):
        return eval_alpha(self, x)


ALPHA_FUNCTIONS = {
    "a1": AlphaFunction("a1", _a1),
    "a2": AlphaFunction("a2", _a2),
    "a3": AlphaFunction("a3", _a3, (X0,)),
    "a4": AlphaFunction("a4", _a4, (1.0 / 3.0, 0.6, 0.65)),
}


def get_alpha_function(fn) -> AlphaFunction:
    if isinstance(fn, AlphaFunction):
        return fn
    try:
        return ALPHA_FUNCTIONS[fn]
    except KeyError:
        raise ValueError(f"unknown alpha function {fn!r}") from None


def eval_alpha(fn, x):
    """Evaluate a parameter function on ``x in [0, 1]``."""
    fn = get_alpha_function(fn)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > 1.0) or not np.all(np.isfinite(xa)):
        raise ValueError("x must lie in [0, 1]")
    out = np.asarray(fn.fn(xa), dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class LabeledSignal:
    samples: np.ndarray
    alpha_target: float
    provenance: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __eq__(self, other):
        return (
            isinstance(other, LabeledSignal)
            and self.alpha_target == other.alpha_target
            and np.array_equal(self.samples, other.samples)
        )

    def __len__(self):
        return self.samples.size


def stack(signals) -> tuple[np.ndarray, np.ndarray]:
    """Inputs as an ``(n, d)`` array and targets as ``(n,)``."""
    X = np.stack([s.samples for s in signals])
    y = np.array([s.alpha_target for s in signals], dtype=float)
    return X, y


def unit_grid(d: int = SWEEP_DIM) -> np.ndarray:
    return np.linspace(0.0, 1.0, d)


def multiscale_grid(d: int = MULTISCALE_DIM, endpoint: bool = True) -> np.ndarray:
    """``i / (d - 1)`` by default, or ``i / d`` with ``endpoint=False``."""
    return np.arange(d) / (d - 1 if endpoint else d)


def make_sweep_dataset(fn, n_train: int, d: int = SWEEP_DIM, t_grid=None, seed=None,
                       sampling: str = "grid") -> list[LabeledSignal]:
    """Signals ``exp(-alpha_i t)`` with ``alpha_i = fn(x_i)``.

    ``sampling="grid"`` uses ``n_train`` uniformly spaced ``x_i`` in [0, 1];
    ``"random"`` draws them uniformly with `seed`.
    """
    fn = get_alpha_function(fn)
    if n_train < 1:
        raise ValueError("n_train must be positive")
    t = unit_grid(d) if t_grid is None else np.asarray(t_grid, dtype=float)
    if sampling == "grid":
        x = np.linspace(0.0, 1.0, n_train)
    elif sampling == "random":
        x = np.sort(np.random.default_rng(seed).uniform(0.0, 1.0, n_train))
    else:
        raise ValueError(f"unknown sampling {sampling!r}")
    alphas = np.atleast_1d(eval_alpha(fn, x))
    tag = f"sweep:{fn.id}:{sampling}:{seed}"
    return [LabeledSignal(np.exp(-a * t), float(a), tag) for a in alphas]


def make_validation_grid(n_train: int, n_val: int = 200) -> np.ndarray:
    """``n_val`` points of [0, 1] interleaved with a ``n_train``-point grid.

    Midpoints between consecutive training abscissae are used, so no
    validation point coincides with a training point.
    """
    xt = np.linspace(0.0, 1.0, n_train)
    mids = 0.5 * (xt[:-1] + xt[1:])
    idx = np.linspace(0, mids.size - 1, n_val).round().astype(int)
    return mids[np.unique(idx)] if n_val < mids.size else mids


def make_multiscale(A: float, alpha: float, seed=None, t=None, d: int = MULTISCALE_DIM) -> LabeledSignal:
    """``A * sum_{k=1..5} 2**(-k alpha) cos(2**k pi t)`` on a uniform grid."""
    if not A > 0:
        raise ValueError("amplitude must be positive")
    if not 0.5 <= alpha <= 5.0:
        raise ValueError("alpha must lie in [0.5, 5]")
    t = multiscale_grid(d) if t is None else np.asarray(t, dtype=float)
    k = np.arange(1, 6)
    s = A * (2.0 ** (-k * alpha)) @ np.cos(np.outer(2.0**k * np.pi, t))
    return LabeledSignal(s, float(alpha), f"multiscale:A={A}:seed={seed}")


def multiscale_bound(A: float, alpha: float) -> float:
    """Sup-norm bound ``A * sum 2**(-k alpha)``."""
    return float(A * np.sum(2.0 ** (-np.arange(1, 6) * alpha)))


def make_scenario_signals(kind: str, A: float, alpha: float, d: int = SWEEP_DIM, t_grid=None) -> LabeledSignal:
    """Scenario test functions, evaluated exactly as defined.

    ``s1 = A exp(alpha t)``, ``s2 = A t exp(-alpha t)`` and
    ``s3 = (t / 2) exp(-2 alpha) + exp(-alpha t / 2)`` (the first term of
    ``s3`` is linear in ``t``).
    """
    t = unit_grid(d) if t_grid is None else np.asarray(t_grid, dtype=float)
    if kind == "s1":
        s = A * np.exp(alpha * t)
    elif kind == "s2":
        s = A * t * np.exp(-alpha * t)
    elif kind == "s3":
        s = 0.5 * t * np.exp(-2.0 * alpha) + np.exp(-0.5 * alpha * t)
    else:
        raise ValueError(f"unknown scenario signal {kind!r}")
    return LabeledSignal(s, float(alpha), f"scenario:{kind}:A={A}")


def add_noise(signals, fraction: float = 0.3, sigma: float = 1e-2, seed=None) -> list[LabeledSignal]:
    """Add i.i.d. Gaussian noise to a random ``floor(fraction n)`` subset.

    Targets are left unchanged; untouched signals are returned as-is.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    signals = list(signals)
    n = len(signals)
    k = int(np.floor(fraction * n + 1e-12))
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=k, replace=False)) if k else np.array([], int)
    out = list(signals)
    for i in chosen:
        s = signals[i]
        noisy = s.samples + sigma * rng.standard_normal(s.samples.shape)
        out[i] = LabeledSignal(noisy, s.alpha_target, s.provenance + "+noise")
    return out
