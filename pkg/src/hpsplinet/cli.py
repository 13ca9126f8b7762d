"""Command-line entry point ``hpsplinet``.

Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures (rank-deficient fits, diverging training, failed searches).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import harness as hs
from ._seeding import derive_seed
from .hbasis import BasisConstructionError, UniformKnots, build_basis
from .hpfit import FitError, default_knots, fit
from .net import MlpNetwork, MlpSpec, TrainConfig, TrainingDiverged, init, train
from .oracle import AlphaSearchConfig, OracleError, optimal_alpha, optimal_alpha_batch
from .stability import GenGapConfig, audit_composite, audit_prop1, gengap_sweep
from .wavelets import WaveletProjector, diameter, project

log = logging.getLogger("hpsplinet")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class _Numeric(Exception):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _out(args, name) -> Path:
    p = Path(name)
    return p if p.is_absolute() or args.out_dir is None else Path(args.out_dir) / p


def _write_text(path: Path, text: str):
    hs._atomic_write(path, text)


def _emit(args, text):
    if args.out:
        _write_text(_out(args, args.out), text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Signal CSV: alpha_target, s_0 .. s_{d-1}
# ---------------------------------------------------------------------------
def signals_csv(X, y) -> str:
    X = np.atleast_2d(X)
    lines = [",".join(["alpha_target"] + [f"s_{k}" for k in range(X.shape[1])])]
    for a, row in zip(y, X):
        lines.append(",".join([repr(float(a))] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def read_signals(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "alpha_target":
        raise ValueError(f"{path}: expected a signal CSV with an alpha_target column")
    body = np.array([[float(v) if v else np.nan for v in r] for r in rows[1:]], dtype=float)
    if body.size == 0:
        raise ValueError(f"{path}: no signals")
    return body[:, 1:], body[:, 0]


def read_ty(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["t", "y"]:
        raise ValueError(f"{path}: expected columns t,y")
    body = np.array([[float(v) for v in r[:2]] for r in rows[1:]], dtype=float)
    return body[:, 0], body[:, 1]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_basis(args):
    knots = UniformKnots(args.t_start, args.h, args.m)
    basis = build_basis(args.alpha, knots)
    if args.all:
        t = np.linspace(knots.t_start, knots.t_end, args.points)
        B = basis.design_matrix(t)
        header = ["t"] + [f"B_{j}" for j in range(basis.n_basis)]
        table = np.column_stack([t, B])
    else:
        # prototype: the basis function centred on the middle knot
        j = basis.n_basis // 2
        c = basis.center(j)
        t = np.linspace(c - 2 * knots.h, c + 2 * knots.h, args.points)
        header = ["t", "B", "dB", "d2B"]
        table = np.column_stack([t] + [basis.eval(j, t, order=k) for k in range(3)])
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in table]
    _emit(args, "\n".join(lines) + "\n")


def cmd_fit(args):
    t, y = read_ty(args.data)
    knots = default_knots(t, args.knot_step)
    sp = fit(t, y, args.alpha, args.lam, knots)
    doc = dict(alpha=sp.alpha, lam=sp.lam, sse=sp.sse, penalty_value=sp.penalty_value, rank=sp.rank,
               knots=dict(t_start=knots.t_start, h=knots.h, m=knots.m), coeffs=sp.coeffs.tolist())
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if not args.out:
        sys.stdout.write(text)
        return
    yhat = sp(t)
    lines = ["t,y,yhat,residual"] + [",".join(repr(float(v)) for v in row) for row in zip(t, y, yhat, y - yhat)]
    out = _out(args, args.out)
    _write_text(out, "\n".join(lines) + "\n")
    _write_text(out.with_suffix(".json"), text)


def cmd_gen(args):
    seed = args.seed
    d = args.d or (ds.MULTISCALE_DIM if args.kind == "multiscale" else ds.SWEEP_DIM)
    if args.kind == "sweep":
        sig = ds.make_sweep_dataset(args.fn, args.n, d, seed=seed, sampling=args.sampling)
    elif args.kind == "multiscale":
        rng = np.random.default_rng(derive_seed("gen-multiscale", seed))
        t = ds.multiscale_grid(d, not args.no_endpoint)
        sig = [ds.make_multiscale(args.A, a, seed, t=t) for a in rng.uniform(0.5, 5.0, args.n)]
    else:
        rng = np.random.default_rng(derive_seed("gen-scenario", seed))
        sig = [ds.make_scenario_signals(args.scenario, args.A, a, d) for a in rng.uniform(0.5, 5.0, args.n)]
    if args.noise_fraction:
        sig = ds.add_noise(sig, args.noise_fraction, args.noise_sigma, seed=derive_seed("gen-noise", seed))
    X, y = ds.stack(sig)
    _emit(args, signals_csv(X, y))


def cmd_train(args):
    if args.alpha_fn:
        # architecture-sweep protocol: 1000 grid signals, interleaved validation grid
        cfg = hs.SweepConfig(n_train=args.n_train)
        _, (X, y), val, _ = hs._sweep_data(args.alpha_fn, cfg)
    elif args.data:
        X, y = read_signals(args.data)
        val = read_signals(args.val) if args.val else None
    else:
        raise ValueError("give --data or --alpha-fn")
    spec = MlpSpec(X.shape[1], args.depth, args.width)
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
                      seed=derive_seed("train-order", args.seed), target_eps=args.eps)
    res = train(init(spec, derive_seed("train-init", args.seed)), X, y, cfg, validation=val)
    res.net.save(_out(args, args.out))
    print(json.dumps(dict(dims=res.net.dims, epochs=res.epochs_run, best_sup_error=res.best_sup_error,
                          converged=res.converged)))


def cmd_predict(args):
    net = MlpNetwork.load(args.model)
    X, y = read_signals(args.data)
    p = net.predict(X)
    lines = ["alpha_target,alpha_pred"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(y, p)]
    _emit(args, "\n".join(lines) + "\n")


def cmd_oracle(args):
    cfg = AlphaSearchConfig(args.alpha_min, args.alpha_max, args.grid_size, not args.no_refine,
                            lam=args.lam, knot_step=args.knot_step)
    with open(args.data) as fh:
        head = fh.readline()
    try:
        if head.startswith("alpha_target"):
            X, _ = read_signals(args.data)
            a, s = optimal_alpha_batch(ds.unit_grid(X.shape[1]), X, cfg)
            doc = dict(alpha=a.tolist(), sse=s.tolist())
        else:
            a, s = optimal_alpha(*read_ty(args.data), cfg)
            doc = dict(alpha=a, sse=s)
    except OracleError as exc:
        raise _Numeric(str(exc)) from exc
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_table1(args):
    cfg = hs.SweepConfig(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test, max_width=args.max_width,
                         max_epochs=args.max_epochs, learning_rate=args.lr, seed=args.seed)
    rows = []
    for fn in args.fn.split(","):
        rows += hs.run_table1(fn, _floats(args.eps), _ints(args.depths), cfg)
    hs.write_csv(_out(args, args.out), rows)
    for r in rows:
        print(f"{r.fn} eps={r.eps:g} L={r.L} W={r.W} C_tot={r.C_tot} met={r.met} max_alpha={r.max_alpha_err:.3e}")


def cmd_scenarios(args):
    rows = []
    for s in range(args.seeds):
        cfg = hs.ScenarioConfig(n_train=args.n_train, n_enrich=args.n_enrich, n_test=args.n_test,
                                epochs=args.epochs, seed=derive_seed("scenarios", args.seed, s) % 2**31)
        for k in _ints(args.scenarios):
            rep = hs.run_scenarios(k, cfg)
            rows += rep.rows
            if args.plots and s == 0:
                hs.plot_scenario(rep, _out(args, args.plots))
            print(f"seed {s} scenario {k}: mean RE pred {rep.mean_re_pred:.3e} grid-search {rep.mean_re_oracle:.3e}")
    hs.write_csv(_out(args, args.out), rows)


def cmd_gengap(args):
    cfg = GenGapConfig(width=args.width, depth=args.depth, epochs=args.epochs, family=args.family)
    seeds = [args.seed + s for s in range(args.seeds)]
    recs = gengap_sweep(_ints(args.n_list), _floats(args.amplitudes), _ints(args.levels), seeds, cfg,
                        workers=args.threads or 1)
    hs.write_csv(_out(args, args.out), recs)
    if args.plots:
        hs.plot_gengap(recs, _out(args, args.plots))
    print(f"{len(recs)} records written")


def cmd_wavelet(args):
    X, y = read_signals(args.data)
    proj = WaveletProjector(args.family, args.level, X.shape[1])
    P = project(proj, X)
    if args.out:
        _write_text(_out(args, args.out), signals_csv(P, y))
    if X.shape[0] > 1:
        print(json.dumps(dict(diameter=diameter(X), diameter_projected=diameter(P))))


def cmd_audit(args):
    net = MlpNetwork.load(args.model)
    if args.kind == "prop1":
        rep = audit_prop1(args.fn, net.predict, grid=np.linspace(0.0, 1.0, args.grid))
        doc = dict(fn=args.fn, holds=rep.holds, eps_hat=rep.eps_hat, L_eff=rep.L_eff, L_flat=rep.L_flat, C=rep.C,
                   singular={repr(k): v for k, v in rep.singular.items()}, singular_term=rep.singular_term,
                   max_err_pred=float(rep.err_pred.max()), max_err_nominal=float(rep.err_nominal.max()),
                   max_propagation=float(rep.propagation.max()))
    else:
        X, _ = read_signals(args.data) if args.data else ds.stack(ds.make_sweep_dataset(args.fn, 200, net.dims[0]))
        rep = audit_composite(net, X, ds.unit_grid(X.shape[1]), seed=args.seed)
        doc = dict(vars(rep), holds=rep.holds())
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _emit(args, text)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    """Argument parser; `defaults` (e.g. from a config file) replace flag defaults."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global seed; every cell stream derives from it")
    common.add_argument("--config", help="TOML file with flag defaults; command-line flags win")
    common.add_argument("--out-dir", help="directory for relative output paths")
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent cells")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hpsplinet", parents=[common],
                                description="HP-spline regression with network-predicted frequency.")
    sub = p.add_subparsers(dest="command", required=True)
    subparsers = []

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        subparsers.append(sp)
        return sp

    sp = add("basis", cmd_basis, "tabulate the hyperbolic B-spline basis")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--knot-step", "--h", dest="h", type=float, default=0.1)
    sp.add_argument("--m", type=int, default=11)
    sp.add_argument("--t-start", type=float, default=0.0)
    sp.add_argument("--points", type=int, default=101)
    sp.add_argument("--all", action="store_true", help="tabulate every basis function over the knot range")
    sp.add_argument("--out")

    sp = add("fit", cmd_fit, "fit an HP-spline to a t,y CSV")
    sp.add_argument("--data", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.1)
    sp.add_argument("--knot-step", type=float, default=0.1)
    sp.add_argument("--out")

    sp = add("gen", cmd_gen, "generate labelled signals")
    sp.add_argument("--kind", choices=("sweep", "multiscale", "scenario"), required=True)
    sp.add_argument("--fn", default="a1")
    sp.add_argument("--scenario", choices=("s1", "s2", "s3"), default="s2")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--d", type=int)
    sp.add_argument("--A", type=float, default=1.0)
    sp.add_argument("--sampling", choices=("grid", "random"), default="grid")
    sp.add_argument("--no-endpoint", action="store_true", help="multiscale grid i/d instead of i/(d-1)")
    sp.add_argument("--noise-fraction", type=float, default=0.0)
    sp.add_argument("--noise-sigma", type=float, default=1e-2)
    sp.add_argument("--out")

    sp = add("train", cmd_train, "train a ReLU network on a signal CSV or a parameter function")
    sp.add_argument("--data")
    sp.add_argument("--alpha-fn", choices=tuple(ds.ALPHA_FUNCTIONS))
    sp.add_argument("--n-train", type=int, default=1000)
    sp.add_argument("--val")
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--width", type=int, default=2)
    sp.add_argument("--epochs", type=int, default=2000)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--out", default="net.json")

    sp = add("predict", cmd_predict, "predict frequencies with a saved network")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out")

    sp = add("oracle", cmd_oracle, "grid-search frequency for t,y or signal CSV data")
    sp.add_argument("--data", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.1)
    sp.add_argument("--knot-step", type=float, default=0.1)
    sp.add_argument("--alpha-min", type=float, default=0.05)
    sp.add_argument("--alpha-max", type=float, default=10.0)
    sp.add_argument("--grid-size", type=int, default=200)
    sp.add_argument("--no-refine", action="store_true")
    sp.add_argument("--out")

    sp = add("table1", cmd_table1, "architecture sweep over targets and depths")
    sp.add_argument("--fn", default="a1,a2,a3,a4")
    sp.add_argument("--eps", default="0.10,0.07,0.008")
    sp.add_argument("--depths", default="3,4,5")
    sp.add_argument("--max-width", type=int, default=8)
    sp.add_argument("--max-epochs", type=int, default=20000)
    sp.add_argument("--n-train", type=int, default=1000)
    sp.add_argument("--n-val", type=int, default=200)
    sp.add_argument("--n-test", type=int, default=200)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--out", default="table1.csv")

    sp = add("scenarios", cmd_scenarios, "predicted versus grid-search frequency")
    sp.add_argument("--scenarios", default="1,2,3")
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--n-train", type=int, default=200)
    sp.add_argument("--n-enrich", type=int, default=200)
    sp.add_argument("--n-test", type=int, default=50)
    sp.add_argument("--epochs", type=int, default=1000)
    sp.add_argument("--out", default="scenarios.csv")
    sp.add_argument("--plots")

    sp = add("gengap", cmd_gengap, "generalization-gap sweep")
    sp.add_argument("--n-list", default="32,64,128,256,512")
    sp.add_argument("--amplitudes", default="0.5,1,2,4.5,5,6,8,10.5")
    sp.add_argument("--levels", default="0,1,2,3,4", help="0 means no projection")
    sp.add_argument("--seeds", type=int, default=10)
    sp.add_argument("--family", default="haar")
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--width", type=int, default=16)
    sp.add_argument("--epochs", type=int, default=300)
    sp.add_argument("--out", default="gengap.csv")
    sp.add_argument("--plots")

    sp = add("wavelet", cmd_wavelet, "project signals onto a wavelet approximation space")
    sp.add_argument("--in", "--data", dest="data", required=True)
    sp.add_argument("--family", default="haar")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--out")

    sp = add("audit", cmd_audit, "check the reconstruction and Lipschitz bounds for a saved network")
    sp.add_argument("--model", required=True)
    sp.add_argument("--kind", choices=("prop1", "composite"), default="prop1")
    sp.add_argument("--fn", default="a1")
    sp.add_argument("--grid", type=int, default=101)
    sp.add_argument("--data")
    sp.add_argument("--out")

    if defaults:
        dests = {a.dest for q in [p] + subparsers for a in q._actions}
        unknown = sorted(set(defaults) - dests)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        for q in [p] + subparsers:
            own = {a.dest for a in q._actions}
            q.set_defaults(**{k: v for k, v in defaults.items() if k in own})
    return p


def parse_args(argv=None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if args.config:
        # reparse with the file values as defaults so explicit flags win
        conf = {k: v for k, v in hs.load_config(args.config).items() if k != "config"}
        args = build_parser(conf).parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INPUT if exc.code else EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"hpsplinet: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads and args.threads > 0:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        args.func(args)
    except (FitError, TrainingDiverged, OracleError, BasisConstructionError, _Numeric,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"hpsplinet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, IndexError, OSError, TypeError) as exc:
        print(f"hpsplinet: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
