"""Experiment drivers, CSV persistence and static SVG plots.

Every driver takes one integer seed and derives the stream of each cell
from it, so reruns with the same seed write identical files.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import tempfile
import threading
import types
import typing
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import datasets as ds
from ._seeding import derive_seed
from .hpfit import DEFAULT_KNOT_STEP, DEFAULT_LAMBDA, FitError, cached_basis, default_knots, fit
from .net import MlpSpec, TrainConfig, complexity, init, train
from .oracle import AlphaSearchConfig, OracleError, optimal_alpha_batch
from .stability import GenGapRecord

log = logging.getLogger(__name__)

__all__ = [
    "SweepConfig",
    "SweepRow",
    "ScenarioConfig",
    "ScenarioRow",
    "ScenarioReport",
    "Series",
    "run_table1",
    "reconstruction_table",
    "run_scenarios",
    "write_csv",
    "read_csv",
    "csv_text",
    "parse_csv",
    "emit_plot",
    "plot_gengap",
    "plot_scenario",
    "load_config",
]

TABLE1_EPS = (0.10, 0.07, 0.008)
TABLE1_DEPTHS = (3, 4, 5)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------
_write_lock = threading.Lock()


def _atomic_write(path, data: str):
    """Write through a temporary file in the target directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with _write_lock:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _parser_for(tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType) and type(None) in args:
        inner = _parser_for(next(a for a in args if a is not type(None)))
        return lambda s: None if s == "" else inner(s)
    if tp is bool:
        return lambda s: {"true": True, "false": False}[s]
    if tp in (int, float, str):
        return tp
    raise TypeError(f"unsupported CSV field type {tp!r}")


def csv_text(records) -> str:
    """CSV for a homogeneous list of dataclass records (floats as repr)."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    names = [f.name for f in fields(records[0])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in records:
        w.writerow([_fmt(getattr(r, n)) for n in names])
    return buf.getvalue()


def parse_csv(text: str, cls) -> list:
    hints = typing.get_type_hints(cls)
    rows = list(csv.DictReader(io.StringIO(text)))
    conv = {f.name: _parser_for(hints[f.name]) for f in fields(cls)}
    return [cls(**{k: conv[k](v) for k, v in row.items()}) for row in rows]


def write_csv(path, records) -> Path:
    _atomic_write(path, csv_text(records))
    return Path(path)


def read_csv(path, cls) -> list:
    return parse_csv(Path(path).read_text(encoding="utf-8"), cls)


# ---------------------------------------------------------------------------
# Architecture sweep
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SweepConfig:
    n_train: int = 1000
    n_val: int = 200
    n_test: int = 200
    d: int = 32
    lam: float = DEFAULT_LAMBDA
    knot_step: float = DEFAULT_KNOT_STEP
    max_width: int = 8
    max_epochs: int = 20000
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0


@dataclass(frozen=True)
class SweepRow:
    fn: str
    eps: float
    L: int
    W: int
    C_tot: int
    met: bool
    epochs: int
    max_alpha_err: float
    mse_alpha_err: float
    max_rec_pred: float
    mse_rec_pred: float
    max_rec_nom: float
    mse_rec_nom: float
    mse_propagation: float
    seed: int


def reconstruction_table(alpha_true, alpha_pred, signals, t, lam=DEFAULT_LAMBDA, knot_step=DEFAULT_KNOT_STEP) -> dict:
    """Parameter and HP-spline reconstruction errors over a test set.

    Reconstructions are evaluated on the sample grid `t` against the exact
    signals; the propagation error compares the predicted-alpha and
    nominal-alpha reconstructions with each other.
    """
    alpha_true = np.asarray(alpha_true, dtype=float)
    alpha_pred = np.asarray(alpha_pred, dtype=float)
    S = np.atleast_2d(signals)
    knots = default_knots(t, knot_step)
    rec_nom = np.empty_like(S)
    rec_pred = np.empty_like(S)
    for k, (a, f, s) in enumerate(zip(alpha_true, alpha_pred, S)):
        rec_nom[k] = cached_basis(a, knots).design_matrix(t) @ fit(t, s, a, lam, knots).coeffs
        rec_pred[k] = cached_basis(f, knots).design_matrix(t) @ fit(t, s, f, lam, knots).coeffs
    da = alpha_pred - alpha_true
    return dict(
        max_alpha_err=float(np.max(np.abs(da))),
        mse_alpha_err=float(np.mean(da**2)),
        max_rec_pred=float(np.max(np.abs(S - rec_pred))),
        mse_rec_pred=float(np.mean((S - rec_pred) ** 2)),
        max_rec_nom=float(np.max(np.abs(S - rec_nom))),
        mse_rec_nom=float(np.mean((S - rec_nom) ** 2)),
        mse_propagation=float(np.mean((rec_pred - rec_nom) ** 2)),
    )


def _sweep_data(fn, cfg: SweepConfig):
    fn = ds.get_alpha_function(fn)
    t = ds.unit_grid(cfg.d)
    X, y = ds.stack(ds.make_sweep_dataset(fn, cfg.n_train, cfg.d))
    xv = ds.make_validation_grid(cfg.n_train, cfg.n_val)
    yv = np.atleast_1d(ds.eval_alpha(fn, xv))
    Xv = np.exp(-np.outer(yv, t))
    rng = np.random.default_rng(derive_seed("table1-test", cfg.seed, fn.id))
    yt = np.atleast_1d(ds.eval_alpha(fn, rng.uniform(0.0, 1.0, cfg.n_test)))
    return t, (X, y), (Xv, yv), (np.exp(-np.outer(yt, t)), yt)


def run_table1(alpha_fn, eps_list=TABLE1_EPS, depth_list=TABLE1_DEPTHS, cfg: SweepConfig = SweepConfig(),
               exact_alpha: bool = False) -> list[SweepRow]:
    """Smallest width reaching each sup-norm target, with error metrics.

    For every ``(eps, L)`` the widths ``1..cfg.max_width`` are trained in
    order until the validation sup-norm error drops to ``eps``.  When no
    width succeeds, the last one is reported with ``met=False``.

    With `exact_alpha` the test-set predictions are replaced by the true
    frequencies, which isolates the spline error.
    """
    fn = ds.get_alpha_function(alpha_fn)
    t, (X, y), val, (Xt, yt) = _sweep_data(fn, cfg)
    rows = []
    for eps in eps_list:
        for L in depth_list:
            for W in range(1, cfg.max_width + 1):
                spec = MlpSpec(cfg.d, L, W)
                cell = ("table1", cfg.seed, fn.id, float(eps), L, W)
                tcfg = TrainConfig(
                    learning_rate=cfg.learning_rate,
                    batch_size=cfg.batch_size,
                    max_epochs=cfg.max_epochs,
                    seed=derive_seed(*cell, "order"),
                    target_eps=float(eps),
                )
                res = train(init(spec, derive_seed(*cell, "init")), X, y, tcfg, validation=val)
                if res.converged or W == cfg.max_width:
                    break
            pred = yt.copy() if exact_alpha else res.net.predict(Xt)
            metrics = reconstruction_table(yt, pred, Xt, t, cfg.lam, cfg.knot_step)
            rows.append(SweepRow(fn.id, float(eps), L, W, complexity(spec), bool(res.converged),
                                 res.epochs_run, seed=cfg.seed, **metrics))
            log.info("table1 %s eps=%g L=%d -> W=%d met=%s", fn.id, eps, L, W, res.converged)
    return rows


# ---------------------------------------------------------------------------
# Scenario comparison
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ScenarioConfig:
    n_train: int = 200
    n_enrich: int = 200
    n_test: int = 50
    d: int = 32
    alpha_range: tuple = (0.5, 5.0)
    amp_range: tuple = (0.5, 2.0)
    noise_sigma: float = 1e-2
    depth: int = 3
    width: int = 8
    epochs: int = 1000
    learning_rate: float = 1e-3
    batch_size: int = 32
    lam: float = DEFAULT_LAMBDA
    knot_step: float = DEFAULT_KNOT_STEP
    seed: int = 0


@dataclass(frozen=True)
class ScenarioRow:
    scenario: int
    seed: int
    instance: int
    kind: str
    alpha_true: float
    alpha_pred: float
    alpha_oracle: float
    mse_pred: float
    mse_oracle: float
    re_pred: float
    re_oracle: float


@dataclass
class ScenarioReport:
    scenario: int
    rows: list = field(default_factory=list)
    skipped: int = 0

    def _mean(self, name):
        return float(np.mean([getattr(r, name) for r in self.rows]))

    @property
    def mean_mse_pred(self):
        return self._mean("mse_pred")

    @property
    def mean_mse_oracle(self):
        return self._mean("mse_oracle")

    @property
    def mean_re_pred(self):
        return self._mean("re_pred")

    @property
    def mean_re_oracle(self):
        return self._mean("re_oracle")


def _exp_family(n, cfg: ScenarioConfig, tag, t):
    """Half ``A exp(-r t)``, half ``A t exp(-r t)``, labelled with ``r``.

    The growing exponential ``A exp(r t)`` is generated with a negative
    frequency so that the label is the frequency the HP-spline conserves.
    """
    rng = np.random.default_rng(derive_seed(tag, cfg.seed))
    rates = rng.uniform(*cfg.alpha_range, n)
    amps = rng.uniform(*cfg.amp_range, n)
    out = []
    for k, (r, A) in enumerate(zip(rates, amps)):
        if k % 2 == 0:
            s = ds.make_scenario_signals("s1", A, -r, t_grid=t)
        else:
            s = ds.make_scenario_signals("s2", A, r, t_grid=t)
        out.append(ds.LabeledSignal(s.samples, float(r), s.provenance))
    return out


def _s3_family(n, cfg: ScenarioConfig, tag, t):
    rng = np.random.default_rng(derive_seed(tag, cfg.seed))
    return [ds.make_scenario_signals("s3", 1.0, a, t_grid=t) for a in rng.uniform(*cfg.alpha_range, n)]


def _oracle_cfg(cfg: ScenarioConfig):
    return AlphaSearchConfig(lam=cfg.lam, knot_step=cfg.knot_step)


def _train_scenario_net(X, y, cfg: ScenarioConfig, tag):
    spec = MlpSpec(cfg.d, cfg.depth, cfg.width)
    tcfg = TrainConfig(learning_rate=cfg.learning_rate, batch_size=cfg.batch_size, max_epochs=cfg.epochs,
                       seed=derive_seed(tag, "order", cfg.seed))
    return train(init(spec, derive_seed(tag, "init", cfg.seed)), X, y, tcfg).net


@lru_cache(maxsize=8)
def _base_net(cfg: ScenarioConfig):
    t = ds.unit_grid(cfg.d)
    X, y = ds.stack(_exp_family(cfg.n_train, cfg, "scenario-train", t))
    return _train_scenario_net(X, y, cfg, "scenario-base")


@lru_cache(maxsize=8)
def _enriched_net(cfg: ScenarioConfig):
    t = ds.unit_grid(cfg.d)
    base = _exp_family(cfg.n_train, cfg, "scenario-train", t)
    extra = _s3_family(cfg.n_enrich, cfg, "scenario-enrich", t)
    Xe, _ = ds.stack(extra)
    a_star, _ = optimal_alpha_batch(t, Xe, _oracle_cfg(cfg))
    X, y = ds.stack(base)
    return _train_scenario_net(np.vstack([X, Xe]), np.concatenate([y, a_star]), cfg, "scenario-enriched")


def _instance_errors(t, y, alpha, cfg):
    knots = default_knots(t, cfg.knot_step)
    rec = cached_basis(alpha, knots).design_matrix(t) @ fit(t, y, alpha, cfg.lam, knots).coeffs
    r = y - rec
    return float(np.mean(r**2)), float(np.linalg.norm(r) / np.linalg.norm(y))


def run_scenarios(scenario_id: int, cfg: ScenarioConfig = ScenarioConfig()) -> ScenarioReport:
    """Predicted versus grid-search frequency on one test scenario.

    1. train on exponential families, test on noisy copies of the same;
    2. same network, test on the multi-exponential ``s3``;
    3. training enriched with ``s3`` labelled by the grid search, test on
       ``s3``.

    Errors are measured against the test samples themselves.  Scenarios 2
    and 3 share the test set, 1 and 2 the network.
    """
    if scenario_id not in (1, 2, 3):
        raise ValueError("scenario must be 1, 2 or 3")
    t = ds.unit_grid(cfg.d)
    if scenario_id == 1:
        clean = _exp_family(cfg.n_test, cfg, "scenario-test1", t)
        test = ds.add_noise(clean, 1.0, cfg.noise_sigma, seed=derive_seed("scenario-noise", cfg.seed))
        net = _base_net(cfg)
    else:
        test = _s3_family(cfg.n_test, cfg, "scenario-test3", t)
        net = _base_net(cfg) if scenario_id == 2 else _enriched_net(cfg)
    Y, a_true = ds.stack(test)
    a_pred = net.predict(Y)
    report = ScenarioReport(scenario_id)
    try:
        a_star, _ = optimal_alpha_batch(t, Y, _oracle_cfg(cfg))
    except OracleError:
        a_star = np.full(len(test), np.nan)
    for k, (sig, y) in enumerate(zip(test, Y)):
        if not np.isfinite(a_star[k]):
            log.warning("scenario %d instance %d: grid search failed, skipped", scenario_id, k)
            report.skipped += 1
            continue
        try:
            mp, rp = _instance_errors(t, y, a_pred[k], cfg)
            mo, ro = _instance_errors(t, y, a_star[k], cfg)
        except (FitError, ValueError) as exc:
            log.warning("scenario %d instance %d skipped: %s", scenario_id, k, exc)
            report.skipped += 1
            continue
        kind = sig.provenance.split(":")[1]
        report.rows.append(ScenarioRow(scenario_id, cfg.seed, k, kind, float(a_true[k]), float(a_pred[k]),
                                       float(a_star[k]), mp, mo, rp, ro))
    return report


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------
@dataclass
class Series:
    label: str
    x: typing.Sequence
    y: typing.Sequence
    style: str = "solid"
    markers: bool = True


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
_DASH = {"solid": "", "dashed": ' stroke-dasharray="6,4"', "dotted": ' stroke-dasharray="1,3"'}
_W, _H = 640, 420
_M = dict(left=70, right=170, top=40, bottom=50)


def _n(v) -> str:
    return f"{v:.2f}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _ticks(lo, hi, log_scale):
    if log_scale:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo - 1e-9 <= k <= hi + 1e-9]
    step = 10 ** math.floor(math.log10((hi - lo) / 4)) if hi > lo else 1.0
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step - 1e-9) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def emit_plot(series, path, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> Path:
    """Write a standalone line plot as SVG.

    Every point is drawn as one ``<circle>`` (for series with markers);
    log-scale axes drop non-positive values.  Output depends only on the
    inputs, so equal inputs give byte-identical files.

    Raises
    ------
    ValueError
        If there is nothing to plot; no file is written.
    """
    prepared = []
    for s in series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        if x.shape != y.shape:
            raise ValueError(f"series {s.label!r}: x and y differ in length")
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        if np.any(keep):
            prepared.append((s, x[keep], y[keep]))
    if not prepared:
        raise ValueError("nothing to plot")

    def tr(v, use_log):
        return np.log10(v) if use_log else v

    xs = np.concatenate([tr(x, logx) for _, x, _ in prepared])
    ys = np.concatenate([tr(y, logy) for _, _, y in prepared])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = _W - _M["left"] - _M["right"]
    ph = _H - _M["top"] - _M["bottom"]

    def px(v):
        return _M["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _M["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2 - _M["right"] / 2:.2f}" y="22" text-anchor="middle" font-size="15">{_esc(title)}</text>',
        f'<g stroke="black" stroke-width="1"><line x1="{_M["left"]}" y1="{_H - _M["bottom"]}" '
        f'x2="{_W - _M["right"]}" y2="{_H - _M["bottom"]}"/><line x1="{_M["left"]}" y1="{_M["top"]}" '
        f'x2="{_M["left"]}" y2="{_H - _M["bottom"]}"/></g>',
    ]
    for v in _ticks(x0, x1, logx):
        tv = tr(v, logx)
        label = f"1e{int(round(tv))}" if logx else f"{v:.4g}"
        out.append(f'<line x1="{_n(px(tv))}" y1="{_H - _M["bottom"]}" x2="{_n(px(tv))}" '
                   f'y2="{_H - _M["bottom"] + 5}" stroke="black"/>')
        out.append(f'<text x="{_n(px(tv))}" y="{_H - _M["bottom"] + 18}" text-anchor="middle" '
                   f'font-size="11">{label}</text>')
    for v in _ticks(y0, y1, logy):
        tv = tr(v, logy)
        label = f"1e{int(round(tv))}" if logy else f"{v:.4g}"
        out.append(f'<line x1="{_M["left"] - 5}" y1="{_n(py(tv))}" x2="{_M["left"]}" y2="{_n(py(tv))}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{_M["left"] - 8}" y="{_n(py(tv) + 4)}" text-anchor="end" '
                   f'font-size="11">{label}</text>')
    out.append(f'<text x="{_M["left"] + pw / 2:.2f}" y="{_H - 12}" text-anchor="middle" '
               f'font-size="12">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{_M["top"] + ph / 2:.2f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {_M["top"] + ph / 2:.2f})">{_esc(ylabel)}</text>')

    for k, (s, x, y) in enumerate(prepared):
        color = _PALETTE[k % len(_PALETTE)]
        dash = _DASH.get(s.style, "")
        pts = " ".join(f"{_n(px(a))},{_n(py(b))}" for a, b in zip(tr(x, logx), tr(y, logy)))
        if x.size > 1:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.markers:
            for a, b in zip(tr(x, logx), tr(y, logy)):
                out.append(f'<circle cx="{_n(px(a))}" cy="{_n(py(b))}" r="2.5" fill="{color}"/>')
        ly = _M["top"] + 14 + 18 * k
        lx = _W - _M["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="11">{_esc(s.label)}</text>')
    out.append("</svg>\n")
    _atomic_write(path, "\n".join(out))
    return Path(path)


def plot_gengap(records: list[GenGapRecord], out_dir) -> list[Path]:
    """One figure per amplitude: seed-mean gap and bound against ``n`` for each level."""
    if not records:
        raise ValueError("no records")
    out_dir = Path(out_dir)
    paths = []
    for A in sorted({r.A for r in records}):
        series = []
        for J in sorted({r.J or 0 for r in records}):
            sel = [r for r in records if r.A == A and (r.J or 0) == J]
            ns = sorted({r.n for r in sel})
            gap = [np.mean([r.gengap for r in sel if r.n == n]) for n in ns]
            bound = [np.mean([r.bound for r in sel if r.n == n]) for n in ns]
            tag = "raw" if J == 0 else f"J={J}"
            series.append(Series(f"gap {tag}", ns, gap, "solid"))
            series.append(Series(f"D/sqrt(n) {tag}", ns, bound, "dashed", markers=False))
        paths.append(emit_plot(series, out_dir / f"gengap_A{A:g}.svg", title=f"Generalization gap, A = {A:g}",
                               xlabel="n", ylabel="GenGap", logx=True, logy=True))
    return paths


def plot_scenario(report: ScenarioReport, out_dir) -> list[Path]:
    """Per-instance MSE and RE under both frequencies, with mean lines."""
    if not report.rows:
        raise ValueError("empty scenario report")
    out_dir = Path(out_dir)
    idx = np.arange(len(report.rows))
    paths = []
    for metric in ("mse", "re"):
        pred = [getattr(r, f"{metric}_pred") for r in report.rows]
        orc = [getattr(r, f"{metric}_oracle") for r in report.rows]
        ends = [idx[0], idx[-1]]
        series = [
            Series("predicted alpha", idx, pred, "solid"),
            Series("grid-search alpha*", idx, orc, "dashed"),
            Series("mean predicted", ends, [np.mean(pred)] * 2, "dotted", markers=False),
            Series("mean grid-search", ends, [np.mean(orc)] * 2, "dotted", markers=False),
        ]
        paths.append(emit_plot(series, out_dir / f"scenario{report.scenario}_{metric}.svg",
                               title=f"Scenario {report.scenario}", xlabel="test instance",
                               ylabel=metric.upper(), logy=True))
    return paths


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------
def load_config(path) -> dict:
    """Flat key/value TOML file; dashes in keys become underscores."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    flat = {}
    for k, v in doc.items():
        if isinstance(v, dict):
            flat.update({kk.replace("-", "_"): vv for kk, vv in v.items()})
        else:
            flat[k.replace("-", "_")] = v
    return flat
