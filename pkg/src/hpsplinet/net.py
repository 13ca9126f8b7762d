"""Fully connected ReLU regressor ``R^d -> R`` in plain numpy.

Depth ``L`` counts the input and output layers, so a network of depth
``L`` and width ``W`` has ``L - 2`` hidden layers of ``W`` units and a
linear output unit.  Its parameter count is

    C_tot = (d W + W) + (L - 3) (W**2 + W) + (W + 1).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

__all__ = [
    "MlpSpec",
    "MlpNetwork",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "complexity",
    "init",
    "forward",
    "train",
    "lipschitz_upper",
    "lipschitz_empirical",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int = 32
    depth: int = 3
    width: int = 1

    def __post_init__(self):
        if self.input_dim < 1 or self.width < 1:
            raise ValueError("input_dim and width must be positive")
        if self.depth < 3:
            raise ValueError("depth counts input and output layers and must be >= 3")

    @property
    def hidden_layers(self) -> int:
        return self.depth - 2

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [self.width] * self.hidden_layers + [1]


def complexity(spec: MlpSpec) -> int:
    """Connections plus one bias per computational unit."""
    d, L, W = spec.input_dim, spec.depth, spec.width
    return (d * W + W) + (L - 3) * (W * W + W) + (W + 1)


class MlpNetwork:
    """Affine layers with ReLU between them and a linear output.

    Weights are stored as ``(fan_in, fan_out)`` arrays so that a batch
    ``X`` of shape ``(n, d)`` maps through ``X @ W + b``.
    """

    def __init__(self, weights, biases, seed=None):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias vector per weight matrix")
        self.weights = [np.array(w, dtype=float, ndmin=2) for w in weights]
        self.biases = [np.array(b, dtype=float, ndmin=1) for b in biases]
        for w0, w1 in zip(self.weights, self.weights[1:]):
            if w0.shape[1] != w1.shape[0]:
                raise ValueError("inconsistent layer shapes")
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[1],):
                raise ValueError("bias length does not match layer width")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")
        self.seed = seed

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def spec(self) -> MlpSpec | None:
        dims = self.dims
        hidden = dims[1:-1]
        if not hidden or len(set(hidden)) != 1:
            return None
        return MlpSpec(dims[0], len(dims), hidden[0])

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.seed
        )

    # parameter vector ------------------------------------------------------
    def get_params(self) -> np.ndarray:
        return np.concatenate(
            [p.ravel() for w, b in zip(self.weights, self.biases) for p in (w, b)]
        )

    def set_params(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise ValueError("parameter vector has wrong length")
        i = 0
        for w, b in zip(self.weights, self.biases):
            for p in (w, b):
                p[...] = theta[i : i + p.size].reshape(p.shape)
                i += p.size

    # evaluation ------------------------------------------------------------
    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dims[0]:
            raise ValueError(f"expected inputs of length {self.dims[0]}, got {X.shape[1]}")
        a = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        out = (a @ self.weights[-1] + self.biases[-1])[:, 0]
        return out[0] if single else out

    def __call__(self, X):
        return self.predict(X)

    def loss_and_grad(self, X, y):
        """Mean squared error on ``(X, y)`` and its gradient per layer."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        acts = [X]
        pre = []
        a = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            pre.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        out = (a @ self.weights[-1] + self.biases[-1])[:, 0]
        r = out - y
        n = y.size
        loss = float(r @ r) / n
        delta = (2.0 / n) * r[:, None]
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for layer in range(len(self.weights) - 1, -1, -1):
            gw[layer] = acts[layer].T @ delta
            gb[layer] = delta.sum(axis=0)
            if layer:
                delta = (delta @ self.weights[layer].T) * (pre[layer - 1] > 0.0)
        return loss, gw, gb

    def flat_grad(self, X, y) -> tuple[float, np.ndarray]:
        loss, gw, gb = self.loss_and_grad(X, y)
        return loss, np.concatenate([p.ravel() for w, b in zip(gw, gb) for p in (w, b)])

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpNetwork":
        net = cls(doc["weights"], doc["biases"], doc.get("seed"))
        if "dims" in doc and list(doc["dims"]) != net.dims:
            raise ValueError("dims do not match the stored weights")
        return net

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MlpNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init(spec: MlpSpec, seed: int) -> MlpNetwork:
    """He-uniform weights ``U(-sqrt(6 / fan_in), sqrt(6 / fan_in))``, zero biases."""
    rng = np.random.default_rng(seed)
    dims = spec.dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpNetwork(weights, biases, seed)


def forward(net: MlpNetwork, s) -> float:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ValueError("forward takes a single input vector")
    return float(net.predict(s))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 20000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    target_eps: float | None = None
    shuffle: bool = True
    eval_every: int = 1
    standardize: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("learning_rate, batch_size and max_epochs must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.adam_eps <= 0:
            raise ValueError("invalid Adam hyperparameters")
        if self.target_eps is not None and self.target_eps <= 0:
            raise ValueError("target_eps must be positive")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainResult:
    net: MlpNetwork
    loss_history: list[float] = field(default_factory=list)
    val_history: list[float] = field(default_factory=list)
    best_history: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_sup_error: float = np.inf
    epochs_run: int = 0
    converged: bool = False


def train(net: MlpNetwork, X, y, cfg: TrainConfig = TrainConfig(), validation=None) -> TrainResult:
    """Mini-batch Adam on the mean squared error.

    The sup-norm error on `validation` (``(X_val, y_val)``; the training
    set when omitted) is tracked every ``cfg.eval_every`` epochs.  Training
    stops when it falls to ``cfg.target_eps`` or after ``cfg.max_epochs``,
    and the parameters with the smallest tracked error are returned.  The
    input network is left untouched.

    With ``cfg.standardize`` the optimization runs on per-feature
    standardized inputs and the incoming first layer is taken to act on
    those (as for a fresh :func:`init`).  The standardization is folded
    into the first layer on return, so the result acts on raw inputs and
    has the same architecture.

    Raises
    ------
    TrainingDiverged
        If the training loss becomes non-finite.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0 or X.shape[0] != y.size:
        raise ValueError("dataset must be non-empty with one target per input")
    Xv, yv = (X, y) if validation is None else (np.atleast_2d(validation[0]), np.asarray(validation[1]))

    net = net.copy()
    if cfg.standardize:
        mu, sd = X.mean(axis=0), X.std(axis=0)
        sd[sd <= 1e-12 * max(1.0, float(np.abs(X).max()))] = 1.0
        X = (X - mu) / sd
        Xv = (Xv - mu) / sd
    params = [p for w, b in zip(net.weights, net.biases) for p in (w, b)]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    n = y.size
    bs = min(cfg.batch_size, n)
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.adam_eps
    step = 0
    result = TrainResult(net)
    best = None

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            loss, gw, gb = net.loss_and_grad(X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            epoch_loss += loss * idx.size
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            grads = [g for pair in zip(gw, gb) for g in pair]
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1.0 - b1) * g
                vi *= b2
                vi += (1.0 - b2) * g * g
                p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(epoch)
        result.loss_history.append(epoch_loss)
        result.epochs_run = epoch
        if epoch % cfg.eval_every and epoch != cfg.max_epochs:
            continue
        sup = float(np.max(np.abs(net.predict(Xv) - yv)))
        result.val_history.append(sup)
        if sup < result.best_sup_error:
            result.best_sup_error = sup
            result.best_epoch = epoch
            best = net.get_params()
        result.best_history.append(result.best_sup_error)
        if cfg.target_eps is not None and sup <= cfg.target_eps:
            result.converged = True
            break

    if best is not None:
        net.set_params(best)
    if cfg.standardize:
        w0, b0 = net.weights[0], net.biases[0]
        w0 /= sd[:, None]
        b0 -= mu @ w0
    log.debug("trained %s for %d epochs, best sup error %.3g", net.dims, result.epochs_run, result.best_sup_error)
    return result


def lipschitz_upper(net: MlpNetwork) -> float:
    """Product of layer spectral norms; valid since ReLU is 1-Lipschitz."""
    return float(np.prod([np.linalg.norm(w, 2) for w in net.weights]))


def lipschitz_empirical(net: MlpNetwork, samples) -> float:
    """Largest difference quotient ``|F(s) - F(s')| / ||s - s'||`` over pairs."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    out = net.predict(X)
    dx = pdist(X)
    dy = pdist(out[:, None])
    ok = dx > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(dy[ok] / dx[ok]))
