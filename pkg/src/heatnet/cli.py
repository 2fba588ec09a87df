"""Command line entry point: ``heatnet train|eval|mc|bench``.

Exit status is 0 on success, 2 for configuration or input errors and 3 for
numerical failures. CSV output starts with ``#`` lines echoing the resolved
configuration; with ``--out -`` only data goes to stdout.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, HeatnetError, ModelFormatError
from .mc import estimate_solution
from .metrics import TestPoints, evaluate_model, make_test_grid, percentile_bands
from .model_io import load_model, save_model
from .sampling import RngState
from .trainer import train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
INLINE_MAX_D = 10

BENCH_COLUMNS = [
    "example", "variant", "d", "D", "T", "M0", "M1", "N_pde", "N_ic", "ic_weight", "ridge",
    "sampler", "seed", "rel_l1", "rel_l2", "rel_linf", "build_s", "train_s",
]
BAND_NAMES = ("P10", "P25", "P50", "P75", "P90")


def point_hash(x) -> str:
    """Stable 64-bit digest of a point's float64 little-endian coordinates."""
    raw = np.ascontiguousarray(x, dtype="<f8").tobytes()
    return hashlib.blake2b(raw, digest_size=8).hexdigest()


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def _write_echo(fh, cfg: RunConfig, command: str, extra=()):
    fh.write(f"# heatnet {command} (version {__version__})\n")
    for line in cfg.echo():
        fh.write(f"# {line}\n")
    for line in extra:
        fh.write(f"# {line}\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _point_columns(d):
    return ["t"] + ([f"x{i + 1}" for i in range(d)] if d <= INLINE_MAX_D else []) + ["x_hash"]


def _point_values(t, x):
    coords = [_fmt(float(v)) for v in x] if x.shape[0] <= INLINE_MAX_D else []
    return [_fmt(float(t))] + coords + [point_hash(x)]


def _bench_row(cfg: RunConfig, tc, seed, report, timings: bool):
    p = cfg.values
    return {
        "example": cfg.example, "variant": tc.variant, "d": p["problem.d"], "D": p["problem.D"],
        "T": p["problem.T"], "M0": tc.M0, "M1": tc.M1, "N_pde": tc.N_pde, "N_ic": tc.N_ic,
        "ic_weight": tc.ic_weight, "ridge": tc.ridge, "sampler": tc.sampler.value, "seed": seed,
        "rel_l1": report.rel_l1, "rel_l2": report.rel_l2, "rel_linf": report.rel_linf,
        "build_s": report.build_seconds if timings else None,
        "train_s": report.train_seconds if timings else None,
    }


def _test_points(cfg: RunConfig, p) -> TestPoints:
    mode = cfg["test.mode"]
    return make_test_grid(p, cfg["test.n"], mode, RngState(cfg["test.seed"], 2))


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


# -- commands ------------------------------------------------------------------


def cmd_bench(cfg: RunConfig, dry_run: bool = False):
    """Train and score one model per seed; append percentile rows when repeating."""
    p = cfg.problem()
    points = _test_points(cfg, p)
    timings = cfg["run.report_timings"]
    rows = []
    with _open_out(cfg["run.out"]) as fh:
        _write_echo(fh, cfg, "bench", [f"problem.fingerprint = {p.fingerprint}"])
        writer = csv.DictWriter(fh, BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        fh.flush()
        if dry_run:
            return rows
        for seed in cfg.seeds():
            tc = cfg.train_config(seed)
            model = train(p, tc)
            report = evaluate_model(model, points)
            row = _bench_row(cfg, model.config, seed, report, timings)
            rows.append(row)
            writer.writerow({k: _fmt(v) for k, v in row.items()})
            fh.flush()
            _log(f"seed {seed}: rel_l2 = {report.rel_l2:.3e}")
        if len(rows) > 1:
            for band_idx, name in enumerate(BAND_NAMES):
                band = dict(rows[0])
                band["seed"] = name
                for col in ("rel_l1", "rel_l2", "rel_linf", "build_s", "train_s"):
                    vals = [r[col] for r in rows]
                    band[col] = None if vals[0] is None else percentile_bands(vals)[band_idx]
                writer.writerow({k: _fmt(v) for k, v in band.items()})
    return rows


def cmd_train(cfg: RunConfig, dry_run: bool = False):
    """Train one model, save it (``run.model``) and report its test errors."""
    p = cfg.problem()
    with _open_out(cfg["run.out"]) as fh:
        _write_echo(fh, cfg, "train", [f"problem.fingerprint = {p.fingerprint}"])
        writer = csv.DictWriter(fh, BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        if dry_run:
            return None
        tc = cfg.train_config()
        model = train(p, tc)
        if cfg["run.model"]:
            save_model(model, cfg["run.model"])
            _log(f"model written to {cfg['run.model']}")
        report = evaluate_model(model, _test_points(cfg, p))
        row = _bench_row(cfg, model.config, tc.seed, report, cfg["run.report_timings"])
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return model


def _read_points(path, d):
    """Points file: CSV with header ``t,x1,...,xd``; ``#`` lines ignored."""
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError("points", f"cannot read {path}: {exc}") from None
    if data.shape[1] != d + 1:
        raise ConfigError("points", f"expected {d + 1} columns (t, x1..x{d}), got {data.shape[1]}")
    return TestPoints(data[:, 0], data[:, 1:])


def cmd_eval(cfg: RunConfig, model_path, points_path=None, grid=None, allow_mismatch=False):
    """Predictions of a saved model, with exact values and errors when known."""
    if model_path is None:
        raise ConfigError("model", "eval needs --model (or run.model)")
    try:
        model = load_model(model_path, None if allow_mismatch else cfg.problem(), allow_mismatch)
    except FileNotFoundError:
        raise ConfigError("model", f"no such file: {model_path}") from None
    p = model.problem
    if points_path:
        pts = _read_points(points_path, p.d)
    elif grid is not None:
        pts = make_test_grid(p, grid, "grid_1d")
    else:
        pts = _test_points(cfg, p)
    pred = model.predict(pts.t, pts.x)
    exact = p.exact(pts.t, pts.x) if p.exact is not None else None
    with _open_out(cfg["run.out"]) as fh:
        _write_echo(fh, cfg, "eval", [f"model = {model_path}", f"model.fingerprint = {model.bank.fingerprint}"])
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_point_columns(p.d) + ["prediction", "exact", "abs_error"])
        for i in range(len(pts)):
            ex = None if exact is None else float(exact[i])
            err = None if ex is None else abs(float(pred[i]) - ex)
            w.writerow(_point_values(pts.t[i], pts.x[i]) + [_fmt(float(pred[i])), _fmt(ex), _fmt(err)])
    return pred


def cmd_mc(cfg: RunConfig, points_path=None):
    """Pointwise Monte Carlo estimates of the solution."""
    p = cfg.problem()
    if points_path:
        pts = _read_points(points_path, p.d)
    elif cfg["mc.t"] is not None and cfg["mc.x"] is not None:
        pts = TestPoints(np.array([cfg["mc.t"]]), np.array([cfg["mc.x"]]))
    else:
        raise ConfigError("mc.t", "give mc.t and mc.x or a points file")
    gen = RngState(cfg["train.seed"], 3).generator()
    rows = []
    with _open_out(cfg["run.out"]) as fh:
        _write_echo(fh, cfg, "mc")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_point_columns(p.d) + ["mean", "std_error", "n", "mode", "exact"])
        for i in range(len(pts)):
            est = estimate_solution(p, float(pts.t[i]), pts.x[i], cfg["mc.M0"], cfg["mc.M1"], cfg["mc.mode"], gen)
            ex = float(p.exact(pts.t[i], pts.x[i])) if p.exact is not None else None
            rows.append(est)
            w.writerow(_point_values(pts.t[i], pts.x[i]) + [_fmt(est.mean), _fmt(est.std_error), est.n_samples, cfg["mc.mode"], _fmt(ex)])
            fh.flush()
    return rows


# -- argument handling -----------------------------------------------------------


def _parse_grid(text):
    try:
        nt, nx = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {text!r}") from None
    return nt, nx


def _parse_set(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatnet", description="Random-feature heat equation solver")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--example", help="benchmark name (ex1, ex2a, ex2b, ex3)")
    common.add_argument("--d", help="spatial dimension")
    common.add_argument("--T", help="time horizon")
    common.add_argument("--D", help="diffusion coefficient")
    common.add_argument("--variant", help="gaussian or importance features")
    common.add_argument("--sampler", help="pseudo_uniform, sobol_uniform, pseudo or sobol")
    common.add_argument("--seed", help="base seed")
    common.add_argument("--repeat", help="number of consecutive seeds")
    common.add_argument("--out", help="output CSV path, '-' for stdout")
    common.add_argument("--set", action="append", type=_parse_set, default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("--dry-run", action="store_true", help="echo the configuration only")
    common.add_argument("--timings", action="store_true", help="fill the build_s/train_s columns")

    sub.add_parser("train", parents=[common], help="train and save a model").add_argument("--model")
    sub.add_parser("bench", parents=[common], help="train, score and tabulate over seeds")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a saved model")
    ev.add_argument("--model")
    ev.add_argument("--points", help="CSV file with columns t,x1..xd")
    ev.add_argument("--grid", type=_parse_grid, help="NTxNX test grid (d = 1)")
    ev.add_argument("--allow-mismatch", action="store_true", help="skip the problem fingerprint check")
    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo point estimates")
    mc.add_argument("--points", "--x-file", dest="points", help="CSV file with columns t,x1..xd")
    mc.add_argument("--t", dest="mc_t", help="time of a single query point")
    mc.add_argument("--x", dest="mc_x", help="comma-separated coordinates of a single query point")
    mc.add_argument("--mode", help="importance or transformed")
    mc.add_argument("--samples", help="samples per integral term (sets mc.M0 and mc.M1)")
    return parser


def _overrides(args):
    out = {}
    flag_keys = {
        "example": "problem.example", "d": "problem.d", "T": "problem.T", "D": "problem.D",
        "variant": "train.variant", "sampler": "train.sampler", "seed": "train.seed",
        "repeat": "run.repeat", "out": "run.out",
    }
    for attr, key in flag_keys.items():
        if getattr(args, attr) is not None:
            out[key] = getattr(args, attr)
    for attr, key in (("mc_t", "mc.t"), ("mc_x", "mc.x"), ("mode", "mc.mode")):
        if getattr(args, attr, None) is not None:
            out[key] = getattr(args, attr)
    if getattr(args, "samples", None) is not None:
        out["mc.M0"] = out["mc.M1"] = args.samples
    if getattr(args, "model", None):
        out["run.model"] = args.model
    if args.timings:
        out["run.report_timings"] = "true"
    for k, v in args.set:
        out[k] = v
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "bench":
            cmd_bench(cfg, args.dry_run)
        elif args.command == "train":
            cmd_train(cfg, args.dry_run)
        elif args.command == "eval":
            if not args.dry_run:
                cmd_eval(cfg, cfg["run.model"], args.points, args.grid, args.allow_mismatch)
        elif args.command == "mc":
            if not args.dry_run:
                cmd_mc(cfg, args.points)
    except (ConfigError, ModelFormatError) as exc:
        _log(f"heatnet: configuration error: {exc}")
        return EXIT_CONFIG
    except (HeatnetError, ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _log(f"heatnet: numerical failure: {type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
