"""Empirical audits of the stability and reconstruction bounds.

* :func:`gengap_experiment` measures ``|Loss_train - Loss_test|`` when the
  test set is the training set with a noisy subset, next to ``D / sqrt(n)``
  (or ``D_J / sqrt(n)`` after wavelet projection).
* :func:`stability_probe` retrains after replacing one sample and reports
  the largest loss change against ``L_loss * L_F * D``.
* :func:`audit_composite` checks the Lipschitz decomposition of the
  signal -> (alpha, coefficients) map.
* :func:`audit_prop1` splits the reconstruction error of the predicted
  frequency into spline error, network error and singular-point terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import datasets as ds
from ._seeding import derive_seed
from .hpfit import DEFAULT_KNOT_STEP, DEFAULT_LAMBDA, UniformKnots, cached_basis, fit, penalty_matrix
from .net import MlpNetwork, MlpSpec, TrainConfig, init, lipschitz_empirical, lipschitz_upper, train
from .wavelets import WaveletProjector, diameter, project

__all__ = [
    "GenGapConfig",
    "GenGapRecord",
    "StabilityProbe",
    "BoundAudit",
    "Prop1Report",
    "multiscale_alphas",
    "gengap_experiment",
    "gengap_sweep",
    "stability_probe",
    "audit_composite",
    "audit_prop1",
]

N_VALUES = (32, 64, 128, 256, 512)


# ---------------------------------------------------------------------------
# Generalization gap
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GenGapConfig:
    """Network and training settings for the generalization-gap runs.

    Training runs a fixed number of epochs for every ``n``.  Inputs are not
    standardized: per-feature scaling would remove the amplitude ``A`` that
    the diameter bound depends on.
    """

    width: int = 16
    depth: int = 3
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 1e-3
    family: str = "haar"
    signal_len: int = 256
    endpoint: bool = True
    standardize: bool = False
    max_n: int = 512


@dataclass(frozen=True)
class GenGapRecord:
    n: int
    A: float
    J: int | None
    seed: int
    loss_train: float
    loss_test: float
    gengap: float
    diameter: float
    bound: float


def multiscale_alphas(seed: int, n: int, max_n: int = 512) -> np.ndarray:
    """First `n` of a fixed per-seed stream of ``alpha ~ U[0.5, 5]``.

    Datasets of increasing size are nested, and the same frequencies are
    shared across amplitudes.
    """
    if n > max_n:
        raise ValueError(f"n={n} exceeds the stream length {max_n}")
    rng = np.random.default_rng(derive_seed("gengap-alpha", seed))
    return rng.uniform(0.5, 5.0, max_n)[:n]


def _multiscale_set(n, A, seed, cfg: GenGapConfig):
    t = ds.multiscale_grid(cfg.signal_len, cfg.endpoint)
    return [ds.make_multiscale(A, a, seed, t=t) for a in multiscale_alphas(seed, n, max(cfg.max_n, n))]


def gengap_experiment(n: int, A: float, noise_sigma: float = 1e-2, noise_fraction: float = 0.3,
                      J: int | None = None, seed: int = 0, cfg: GenGapConfig = GenGapConfig()) -> GenGapRecord:
    """One generalization-gap measurement.

    The test set copies the training set and adds ``N(0, noise_sigma**2)``
    to every sample of a random ``noise_fraction`` of the signals; targets
    are unchanged.  With `J`, both sets are projected onto ``V_J`` first and
    the diameter is the projected one.  Losses are mean squared errors of
    the predicted frequency.
    """
    if not 0.0 <= noise_fraction <= 1.0:
        raise ValueError("noise_fraction must lie in [0, 1]")
    train_set = _multiscale_set(n, A, seed, cfg)
    test_set = ds.add_noise(train_set, noise_fraction, noise_sigma, seed=derive_seed("gengap-noise", seed, n))
    X, y = ds.stack(train_set)
    Xt, _ = ds.stack(test_set)
    if J:
        proj = WaveletProjector(cfg.family, J, cfg.signal_len)
        X, Xt = project(proj, X), project(proj, Xt)
    spec = MlpSpec(cfg.signal_len, cfg.depth, cfg.width)
    tcfg = TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        max_epochs=cfg.epochs,
        seed=derive_seed("gengap-train", seed, n),
        standardize=cfg.standardize,
    )
    net = train(init(spec, derive_seed("gengap-init", seed)), X, y, tcfg).net
    loss_train = float(np.mean((net.predict(X) - y) ** 2))
    loss_test = float(np.mean((net.predict(Xt) - y) ** 2))
    D = diameter(X)
    return GenGapRecord(
        n=int(n), A=float(A), J=J if J else None, seed=int(seed),
        loss_train=loss_train, loss_test=loss_test,
        gengap=abs(loss_train - loss_test),
        diameter=D, bound=D / math.sqrt(n),
    )


def gengap_sweep(n_list=N_VALUES, amplitudes=(1.0,), levels=(0,), seeds=range(10),
                 cfg: GenGapConfig = GenGapConfig(), noise_sigma=1e-2, noise_fraction=0.3,
                 workers: int = 1) -> list[GenGapRecord]:
    """Every cell ``(A, J, seed, n)`` in a fixed order; ``J = 0`` means no projection.

    Cells are independent and may run in `workers` processes; the returned
    order does not depend on the worker count.
    """
    jobs = [((n, A, J, s), cfg, noise_sigma, noise_fraction)
            for A in amplitudes for J in levels for s in seeds for n in n_list]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_cell, jobs))
    return [_run_cell(j) for j in jobs]


def _run_cell(job):
    (n, A, J, s), cfg, sigma, frac = job
    return gengap_experiment(n, A, sigma, frac, J or None, s, cfg)


# ---------------------------------------------------------------------------
# Uniform stability probe
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class StabilityProbe:
    beta_hat: float
    L_loss: float
    L_F: float
    D: float

    @property
    def bound(self) -> float:
        return self.L_loss * self.L_F * self.D

    def holds(self, slack: float = 1.05) -> bool:
        return self.beta_hat <= slack * self.bound


def stability_probe(X, y, replace_index: int, replacement: tuple, spec: MlpSpec,
                    cfg: TrainConfig, probe=None, init_seed: int = 0) -> StabilityProbe:
    """Train on ``T`` and on ``T`` with sample `replace_index` swapped.

    Both runs share initialization and batch schedule.  ``beta_hat`` is the
    largest change of the squared loss over the probe points ``(X_p, y_p)``
    (the training set when omitted).  For the squared loss the local
    Lipschitz constant between two predictions is bounded by
    ``2 max |F - alpha|`` over the probe set and both networks.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0 <= replace_index < y.size:
        raise IndexError("replace_index out of range")
    X2, y2 = X.copy(), y.copy()
    X2[replace_index] = np.asarray(replacement[0], dtype=float)
    y2[replace_index] = float(replacement[1])
    Xp, yp = (X, y) if probe is None else (np.atleast_2d(probe[0]), np.asarray(probe[1], dtype=float))

    net0 = init(spec, init_seed)
    f1 = train(net0, X, y, cfg).net
    f2 = train(net0, X2, y2, cfg).net
    p1, p2 = f1.predict(Xp), f2.predict(Xp)
    beta = float(np.max(np.abs((p1 - yp) ** 2 - (p2 - yp) ** 2)))
    L_loss = 2.0 * float(max(np.max(np.abs(p1 - yp)), np.max(np.abs(p2 - yp))))
    pool = np.vstack([X, X2[replace_index : replace_index + 1], Xp])
    L_F = max(lipschitz_empirical(f1, pool), lipschitz_empirical(f2, pool))
    D = diameter(np.vstack([X, X2[replace_index : replace_index + 1]]))
    return StabilityProbe(beta, L_loss, L_F, D)


# ---------------------------------------------------------------------------
# Lipschitz decomposition of the composite map
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BoundAudit:
    L_F_emp: float
    L_F_upper: float
    L_hp_emp: float
    L_s_emp: float
    L_alpha_emp: float
    composite_bound: float
    observed_composite: float
    L_flat: float
    L_eff: float

    def holds(self, slack: float = 1.05) -> bool:
        return self.observed_composite <= self.composite_bound * slack


def _smoother(alpha, t, lam, knots):
    """Linear map data -> HP-spline coefficients at fixed alpha."""
    B = cached_basis(alpha, knots).design_matrix(t)
    D = penalty_matrix(alpha, knots.h, knots.m).matrix
    return np.linalg.pinv(np.vstack([B, lam * D]))[:, : t.size], B


def audit_composite(net: MlpNetwork, X, t, lam: float = DEFAULT_LAMBDA,
                    knots: UniformKnots | None = None, n_pairs: int = 200, seed: int = 0) -> BoundAudit:
    """Estimate ``L_s``, ``L_alpha`` and ``L_F`` on sampled pairs of signals.

    The coefficient map is ``a(s, alpha)``.  ``L_s`` is the largest operator
    norm of the linear smoother over the predicted frequencies; ``L_alpha``
    and the sup-norm ``L_hp`` are secant slopes in alpha at fixed signal.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = np.asarray(t, dtype=float)
    if knots is None:
        knots = UniformKnots.spanning(float(t[0]), float(t[-1]), DEFAULT_KNOT_STEP)
    alphas = net.predict(X)
    cache = {}

    def smoother(a):
        if a not in cache:
            cache[a] = _smoother(a, t, lam, knots)
        return cache[a]

    rng = np.random.default_rng(seed)
    n = X.shape[0]
    pairs = [(i, j) for i, j in rng.integers(0, n, size=(4 * n_pairs, 2)) if i != j]
    pairs = [p for p in pairs if np.linalg.norm(X[p[0]] - X[p[1]]) > 0][:n_pairs]
    if not pairs:
        raise ValueError("need at least two distinct signals")
    used = sorted({k for p in pairs for k in p})
    L_s = max(np.linalg.norm(smoother(alphas[k])[0], 2) for k in used)
    obs, L_alpha, slopes = 0.0, 0.0, []
    for i, j in pairs:
        ai, aj = alphas[i], alphas[j]
        Mi, Bi = smoother(ai)
        Mj, Bj = smoother(aj)
        ci, cj = Mi @ X[i], Mj @ X[j]
        obs = max(obs, float(np.linalg.norm(ci - cj) / np.linalg.norm(X[i] - X[j])))
        if ai != aj:
            cj_ai = Mi @ X[j]
            L_alpha = max(L_alpha, float(np.linalg.norm(cj_ai - cj) / abs(ai - aj)))
            slopes.append(np.max(np.abs(Bi @ cj_ai - Bj @ cj)) / abs(ai - aj))
    L_F = lipschitz_empirical(net, X)
    L_hp = float(max(slopes)) if slopes else 0.0
    return BoundAudit(
        L_F_emp=L_F,
        L_F_upper=lipschitz_upper(net),
        L_hp_emp=L_hp,
        L_s_emp=float(L_s),
        L_alpha_emp=float(L_alpha),
        composite_bound=float(L_s + L_alpha * L_F),
        observed_composite=float(obs),
        L_flat=float(min(slopes)) if slopes else 0.0,
        L_eff=L_hp,
    )


# ---------------------------------------------------------------------------
# Reconstruction-error decomposition
# ---------------------------------------------------------------------------
@dataclass
class Prop1Report:
    x: np.ndarray
    alpha: np.ndarray
    predicted: np.ndarray
    err_pred: np.ndarray
    err_nominal: np.ndarray
    propagation: np.ndarray
    eps_hat: float
    L_eff: float
    L_flat: float
    C: float
    singular: dict = field(default_factory=dict)
    singular_term: float = 0.0
    bound: np.ndarray = None
    holds: bool = True

    @property
    def n_violations(self) -> int:
        return int(np.sum(self.err_pred > self.bound * (1 + 1e-9) + 1e-14))


class _ExactFrequency:
    def __init__(self, fn, x):
        self.values = np.atleast_1d(ds.eval_alpha(fn, x))

    def __call__(self, S):
        return self.values


def audit_prop1(alpha_fn, predictor: Callable | None = None, grid=None, t=None, lam: float = DEFAULT_LAMBDA,
                knot_step: float = DEFAULT_KNOT_STEP, n_fine: int = 257) -> Prop1Report:
    """Check ``err_pred <= err_nominal + L_eff eps + C sum(delta_i)`` on a grid.

    Errors are sup norms on a fine grid of ``exp(-alpha t)`` against the
    HP-spline fitted to the ``d`` samples.  ``eps`` is the sup of
    ``|F - alpha|`` off the singular set, ``delta_i`` the error at each
    declared singular point, and ``L_eff``/``C`` are secant slopes of
    ``alpha -> s_hp(alpha)`` at offsets up to those errors.

    `predictor` maps an ``(n, d)`` array of signals to frequencies, e.g.
    ``net.predict``.  ``None`` injects the exact frequencies.
    """
    fn = ds.get_alpha_function(alpha_fn)
    t = ds.unit_grid() if t is None else np.asarray(t, dtype=float)
    x = np.linspace(0.0, 1.0, 101) if grid is None else np.asarray(grid, dtype=float)
    knots = UniformKnots.spanning(float(t[0]), float(t[-1]), knot_step)
    tf = np.linspace(t[0], t[-1], n_fine)

    def spline(a, s):
        return cached_basis(a, knots).design_matrix(tf) @ fit(t, s, a, lam, knots).coeffs

    alpha = np.atleast_1d(ds.eval_alpha(fn, x))
    S = np.exp(-np.outer(alpha, t))
    if predictor is None:
        predictor = _ExactFrequency(fn, x)
    pred = np.asarray(predictor(S), dtype=float).reshape(-1)
    err_nom = np.empty(x.size)
    err_pred = np.empty(x.size)
    prop = np.empty(x.size)
    fits = []
    for k, (a, f) in enumerate(zip(alpha, pred)):
        truth = np.exp(-a * tf)
        s_nom = spline(a, S[k])
        s_pred = spline(f, S[k])
        fits.append(s_nom)
        err_nom[k] = np.max(np.abs(truth - s_nom))
        err_pred[k] = np.max(np.abs(truth - s_pred))
        prop[k] = np.max(np.abs(s_nom - s_pred))

    dx = np.min(np.diff(np.unique(x))) if x.size > 1 else 0.0
    near = np.zeros(x.size, bool)
    for x0 in fn.singular_set:
        near |= np.abs(x - x0) <= 0.5 * dx
    off = ~near
    eps = float(np.max(np.abs(pred - alpha)[off])) if np.any(off) else 0.0

    def slopes(k, radius):
        if radius <= 0:
            return []
        out = []
        for frac in (-1.0, -0.5, 0.5, 1.0):
            da = frac * radius
            out.append(np.max(np.abs(spline(alpha[k] + da, S[k]) - fits[k])) / abs(da))
        return out

    per_point = [max(slopes(k, eps), default=0.0) for k in range(x.size)]
    L_eff = float(max(per_point, default=0.0))
    L_flat = float(min(per_point, default=0.0))

    singular = {}
    C = L_eff
    for x0 in fn.singular_set:
        a0 = float(ds.eval_alpha(fn, x0))
        s0 = np.exp(-a0 * t)
        f0 = a0 if isinstance(predictor, _ExactFrequency) else predictor(s0[None, :])
        d0 = abs(float(np.asarray(f0).reshape(-1)[0]) - a0)
        singular[float(x0)] = d0
        if d0 > 0:
            base = spline(a0, s0)
            for frac in (-1.0, 1.0):
                C = max(C, float(np.max(np.abs(spline(a0 + frac * d0, s0) - base)) / d0))
    sing_term = C * sum(singular.values())
    bound = err_nom + L_eff * eps + sing_term
    report = Prop1Report(
        x=x, alpha=alpha, predicted=pred, err_pred=err_pred, err_nominal=err_nom,
        propagation=prop, eps_hat=eps, L_eff=L_eff, L_flat=L_flat, C=C,
        singular=singular, singular_term=sing_term, bound=bound,
    )
    report.holds = report.n_violations == 0
    return report
