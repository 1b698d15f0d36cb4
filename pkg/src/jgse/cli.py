"""Command-line interface.

Every subcommand writes into one run directory and finishes with a
``manifest.json`` recording the command line, configuration, seed, input and
artifact digests, wall times and the library version.  Wall times appear only
in the manifest (and in the timing table of the ``tableII`` benchmark), so
all other artifacts of two runs with the same inputs and seed are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import scdg, sgtg
from .benchmark import PROTOCOLS, make_estimator, replicate_seeds, run_protocol
from .config import config_to_dict, load_config
from .decompose import eigengap_suggest_d, exact_blocks, spectral_cluster
from .flog import FlogConfig, flog
from .gist import GistConfig, gist_screen
from .io import (read_matrix_csv, read_series_csv, sha256_file, write_dot, write_edges_csv,
                 write_json, write_labels_csv, write_matrix_csv, write_table_csv)
from .metrics import ForecastConfig, rolling_mse
from .model import DataError, assemble_dataset
from .pipeline import (ConfigError, JgseConfig, default_workers, jgse, log_grid,
                       penalty_scales, tune_by_bic, tune_by_validation)
from .synth import NetworkSpec, generate_network, simulate_series
from .thresholding import build_jag

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INTERNAL = 0, 2, 3, 4, 5, 1

EPILOG = """\
exit codes:
  0  success
  1  unexpected internal error
  2  usage error (unknown subcommand or flag, bad flag value)
  3  data error (unreadable or malformed CSV; message names the line)
  4  configuration error (invalid config or spec JSON, inconsistent options)
  5  numerical failure (non-positive-definite matrix, non-stationary system)

environment:
  JGSE_WORKERS   default worker count (otherwise the number of CPUs)
  JGSE_RUN_ROOT  directory that relative --out paths are resolved against
"""

logger = logging.getLogger("jgse")


class Run:
    """Run directory bookkeeping: artifacts, inputs and timings."""

    def __init__(self, command: str, argv: list, out: str, seed: int):
        root = Path(os.environ.get("JGSE_RUN_ROOT", "."))
        path = Path(out)
        self.dir = path if path.is_absolute() else root / path
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.argv = list(argv)
        self.seed = seed
        self.inputs = {}
        self.artifacts = []
        self.timings = {}
        self.config = None
        self._t0 = time.perf_counter()

    def path(self, rel: str) -> Path:
        self.artifacts.append(rel)
        return self.dir / rel

    def add_input(self, path) -> None:
        if path is not None:
            self.inputs[str(path)] = sha256_file(path)

    def finish(self) -> Path:
        self.timings["total"] = time.perf_counter() - self._t0
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "artifacts": {rel: sha256_file(self.dir / rel) for rel in sorted(set(self.artifacts))},
            "timings": self.timings,
            "version": __version__,
        }
        return write_json(self.dir / "manifest.json", manifest)


# ---------------------------------------------------------------- helpers

def _load_data(args, run: Run, path=None):
    path = path or args.data
    run.add_input(path)
    values, names = read_series_csv(path)
    return assemble_dataset(values, log=args.log, difference=args.difference,
                            center=args.center, normalize=args.normalize, names=names)


def _grid_span(args):
    lo, hi = args.grid_span
    if not 0 < lo <= hi:
        raise ConfigError(f"invalid --grid-span {lo} {hi}")
    return (lo, hi)


def _write_estimates(run: Run, names, B=None, Omega=None):
    if B is not None:
        write_matrix_csv(run.path("B.csv"), B, names)
        write_edges_csv(run.path("edges_B.csv"), B, names, directed=True)
        write_dot(run.path("graphs/gtg.dot"), B, names, directed=True, name="GTG")
    if Omega is not None:
        write_matrix_csv(run.path("Omega.csv"), Omega, names)
        write_edges_csv(run.path("edges_Omega.csv"), Omega, names, directed=False)
        write_dot(run.path("graphs/cdg.dot"), Omega, names, directed=False, name="CDG")


def _gist_config(args) -> GistConfig:
    try:
        return GistConfig(q=args.q, phi=args.phi, max_iter=args.max_iter, tol=args.tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- subcommands

def cmd_simulate(args, run: Run):
    try:
        spec = NetworkSpec.from_json(Path(args.spec).read_text())
    except OSError as exc:
        raise ConfigError(f"{args.spec}: cannot read ({exc.strerror})") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{args.spec}: {exc}") from None
    run.add_input(args.spec)
    if args.n < 2:
        raise ConfigError("--n must be at least 2")
    s_net, s_series, s_valid = replicate_seeds(args.seed, 0)
    spec = replace(spec, seed=s_net)
    run.config = {"spec": json.loads(spec.to_json()), "n": args.n, "burn_in": args.burn_in,
                  "n_valid": args.n_valid}
    B, Omega = generate_network(spec)
    names = [f"x{i}" for i in range(spec.p)]
    series = simulate_series(B, omega=Omega, length=args.n + 1, burn_in=args.burn_in, seed=s_series)
    write_matrix_csv(run.path("series.csv"), series, names)
    if args.n_valid:
        valid = simulate_series(B, omega=Omega, length=args.n_valid + 1, burn_in=args.burn_in,
                                seed=s_valid)
        write_matrix_csv(run.path("valid.csv"), valid, names)
    write_matrix_csv(run.path("B_true.csv"), B, names)
    write_matrix_csv(run.path("Omega_true.csv"), Omega, names)
    labels = np.repeat(np.arange(len(spec.block_sizes)), spec.block_sizes)
    write_labels_csv(run.path("labels_true.csv"), labels, names)
    write_json(run.path("spec.json"), json.loads(spec.to_json()))


def cmd_screen(args, run: Run):
    data = _load_data(args, run)
    cfg = _gist_config(args)
    run.config = {"gist": asdict(cfg)}
    t = time.perf_counter()
    res = gist_screen(data.with_unit_norm_columns(), cfg)
    run.timings["screening"] = time.perf_counter() - t
    names = list(data.names)
    write_matrix_csv(run.path("pattern.csv"), res.pattern, names)
    write_matrix_csv(run.path("jag.csv"), res.C_hat, names)
    write_edges_csv(run.path("edges.csv"), res.C_hat, names, directed=False,
                    columns=("i", "j", "c_ij"))
    write_dot(run.path("graphs/jag.dot"), res.C_hat, names, directed=False, name="JAG")
    write_json(run.path("report.json"), {
        "screened_pairs": res.n_pairs, "iterations": res.iterations,
        "stop": res.convergence_reason, "objective_trace": res.objective_trace})


def cmd_decompose(args, run: Run):
    names = None
    if args.jag:
        run.add_input(args.jag)
        C = read_matrix_csv(args.jag)
        _, names = read_series_csv(args.jag)
        report = {"source": "jag"}
    else:
        if not args.data:
            raise ConfigError("decompose needs --data or --jag")
        data = _load_data(args, run)
        cfg = _gist_config(args)
        res = gist_screen(data.with_unit_norm_columns(), cfg)
        C = res.C_hat
        names = data.names
        write_matrix_csv(run.path("pattern.csv"), res.pattern, list(names))
        report = {"source": "gist", "screened_pairs": res.n_pairs}
    if args.method == "exact":
        dec = exact_blocks(C)
    else:
        if args.clusters == "auto":
            d = eigengap_suggest_d(C)
        else:
            try:
                d = int(args.clusters)
            except ValueError:
                raise ConfigError(f"--clusters must be an integer or 'auto', got {args.clusters!r}") from None
        if d < 1 or d > C.shape[0]:
            raise ConfigError(f"--clusters must lie in [1, {C.shape[0]}]")
        dec = spectral_cluster(C, d, seed=args.seed)
        report["d_requested"] = d
    report.update({"method": args.method, "n_blocks": dec.d,
                   "block_sizes": [int(b.size) for b in dec.blocks]})
    run.config = {"method": args.method, "clusters": args.clusters, "q": args.q, "phi": args.phi}
    write_labels_csv(run.path("labels.csv"), dec.labels, names)
    perm = dec.permutation()
    write_matrix_csv(run.path("jag_permuted.csv"), C[np.ix_(perm, perm)], [names[i] for i in perm])
    write_json(run.path("report.json"), report)


def cmd_estimate(args, run: Run):
    data = _load_data(args, run)
    mask = None
    if args.mask:
        run.add_input(args.mask)
        mask = read_matrix_csv(args.mask) != 0
        if mask.shape != (data.p, data.p):
            raise DataError(f"{args.mask}: mask is {mask.shape}, expected {(data.p, data.p)}")
        np.fill_diagonal(mask, True)
    try:
        cfg = FlogConfig(lambda_b=args.lambda_b, lambda_omega=args.lambda_omega, mask=mask)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run.config = {"lambda_b": args.lambda_b, "lambda_omega": args.lambda_omega,
                  "mask": args.mask}
    t = time.perf_counter()
    res = flog(data, cfg)
    run.timings["estimation"] = time.perf_counter() - t
    _write_estimates(run, list(data.names), res.B, res.Omega)
    write_json(run.path("report.json"), {
        "outer_iterations": res.n_outer, "converged": res.converged,
        "objective_trace": res.objective_trace, "notes": res.notes})


def _single_graph(args, run: Run, method: str):
    data = _load_data(args, run)
    sb, so = penalty_scales(data)
    scale = sb if method == "sgtg" else so
    if args.lam is not None:
        if args.lam < 0:
            raise ConfigError("--lam must be nonnegative")
        lam, scores, grid = args.lam, None, None
    else:
        grid = list(log_grid(scale, args.grid_points, _grid_span(args)))
        res = tune_by_bic(data, method, grid)
        lam, scores = res.params, res.scores
    run.config = {"lam": args.lam, "grid_points": args.grid_points,
                  "grid_span": list(args.grid_span)}
    names = list(data.names)
    if method == "sgtg":
        _write_estimates(run, names, B=sgtg(data, lam))
    else:
        _write_estimates(run, names, Omega=scdg(data, lam))
    write_json(run.path("report.json"), {"lambda": lam, "grid": grid, "bic": scores})


def _jgse_config(args, run: Run) -> JgseConfig:
    if args.config:
        run.add_input(args.config)
        cfg = load_config(args.config)
    else:
        cfg = JgseConfig()
    if getattr(args, "tuning", None):
        cfg = replace(cfg, tuning=args.tuning)
    cfg = replace(cfg, seed=args.seed)
    run.config = config_to_dict(cfg)
    write_json(run.path("config.json"), run.config)
    return cfg


def cmd_jgse(args, run: Run):
    data = _load_data(args, run)
    cfg = _jgse_config(args, run)
    valid = _load_data(args, run, args.valid) if args.valid else None
    res = jgse(data, cfg, valid=valid, workers=args.workers)
    report = dict(res.report)
    run.timings.update(report.pop("timings"))
    names = list(data.names)
    write_matrix_csv(run.path("pattern.csv"), res.pattern, names)
    write_dot(run.path("graphs/jag.dot"), build_jag(res.B, res.Omega), names,
              directed=False, name="JAG")
    _write_estimates(run, names, res.B, res.Omega)
    write_labels_csv(run.path("labels.csv"), res.decomposition.labels, names)
    write_json(run.path("report.json"), report)


def cmd_benchmark(args, run: Run):
    overrides = {}
    if args.overrides:
        run.add_input(args.overrides)
        try:
            overrides = json.loads(Path(args.overrides).read_text())
        except OSError as exc:
            raise ConfigError(f"{args.overrides}: cannot read ({exc.strerror})") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.overrides}: invalid JSON at line {exc.lineno}") from None
        if not isinstance(overrides, dict):
            raise ConfigError("overrides must be a JSON object")
    run.config = {"protocol": args.protocol, "overrides": overrides}
    t = time.perf_counter()
    try:
        tables = run_protocol(args.protocol, overrides, seed=args.seed, workers=args.workers)
    except TypeError as exc:
        raise ConfigError(f"bad override: {exc}") from None
    run.timings["benchmark"] = time.perf_counter() - t
    for name, (columns, rows) in tables.items():
        write_table_csv(run.path(f"tables/{name}.csv"), rows, columns)
    write_json(run.path("report.json"), {"protocol": args.protocol,
                                         "tables": sorted(f"tables/{k}.csv" for k in tables)})


def cmd_forecast(args, run: Run):
    run.add_input(args.data)
    values, names = read_series_csv(args.data)
    series = assemble_dataset(values, log=args.log, difference=args.difference,
                              names=names).series
    cfg = _jgse_config(args, run)
    if not 0 < args.window_frac < 1:
        raise ConfigError("--window-frac must lie in (0, 1)")
    window = int(round(args.window_frac * (series.shape[0] - 1)))
    fc = ForecastConfig(window=window, horizon=args.horizon, center=args.center,
                        normalize=args.normalize)
    rows = []
    for method in args.method:
        t = time.perf_counter()
        try:
            mse = rolling_mse(series, fc, make_estimator(method, cfg))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        run.timings[method] = time.perf_counter() - t
        rows.append({"method": method, "window": window, "horizon": args.horizon,
                     "rolling_mse": mse})
    write_table_csv(run.path("tables/forecast.csv"), rows,
                    ["method", "window", "horizon", "rolling_mse"])
    write_json(run.path("report.json"), {"rows": rows})


def cmd_tune(args, run: Run):
    data = _load_data(args, run)
    valid = _load_data(args, run, args.valid) if args.valid else None
    sb, so = penalty_scales(data)
    span = _grid_span(args)
    if args.method == "flog":
        gb = log_grid(sb, args.grid_points, span)
        go = log_grid(so, args.grid_points, span)
        grid = [(b, o) for b in gb for o in go]
    else:
        grid = list(log_grid(sb if args.method == "sgtg" else so, args.grid_points, span))
    run.config = {"method": args.method, "grid_points": args.grid_points,
                  "grid_span": list(span), "criterion": "validation" if valid else "bic"}
    if valid is not None:
        res = tune_by_validation(data, valid, args.method, grid)
    else:
        res = tune_by_bic(data, args.method, grid)
    rows = []
    for k, (params, score) in enumerate(zip(grid, res.scores)):
        lb, lo = params if args.method == "flog" else (
            (params, "") if args.method == "sgtg" else ("", params))
        rows.append({"index": k, "lambda_b": lb, "lambda_omega": lo, "score": score})
    write_table_csv(run.path("tables/tuning.csv"), rows,
                    ["index", "lambda_b", "lambda_omega", "score"])
    chosen = list(res.params) if args.method == "flog" else res.params
    write_json(run.path("report.json"), {"method": args.method, "criterion": run.config["criterion"],
                                         "chosen": chosen, "index": res.index})


# ---------------------------------------------------------------- parser

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="single source of randomness")
    common.add_argument("--out", help="run directory (default: <command>-seed<seed>)")
    common.add_argument("--workers", type=_positive_int, default=None,
                        help="worker processes (default: JGSE_WORKERS or CPU count)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="CSV, one column per node, one row per time step")
    data.add_argument("--log", action="store_true", help="take logarithms first")
    data.add_argument("--diff", "--difference", dest="difference", action="store_true",
                      help="first differences")
    data.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                      help="remove column means")
    data.add_argument("--normalize", action="store_true", help="unit-norm X columns")

    screening = argparse.ArgumentParser(add_help=False)
    screening.add_argument("--q", type=float, default=0.3, help="quantile of kept pairs")
    screening.add_argument("--phi", type=float, default=1.0, help="JAG weight of Omega")
    screening.add_argument("--max-iter", type=_positive_int, default=200)
    screening.add_argument("--tol", type=float, default=1e-6, help="relative objective tolerance")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-points", type=_positive_int, default=10)
    grid.add_argument("--grid-span", type=float, nargs=2, default=(1e-3, 1.0),
                      metavar=("LO", "HI"), help="grid range as fractions of the penalty scale")

    parser = argparse.ArgumentParser(
        prog="jgse", description="Joint graphical screening and estimation of VAR(1) networks.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text, parents, func):
        p = sub.add_parser(name, help=help_text, parents=[common] + parents, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("simulate", "simulate a block network and its series", [], cmd_simulate)
    p.add_argument("--spec", required=True, help="network spec JSON")
    p.add_argument("--n", type=int, required=True, help="number of transitions")
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--n-valid", type=int, default=0, help="also write a validation series")

    add("screen", "GIST screening of the joint association graph", [data, screening], cmd_screen)

    p = add("decompose", "split the network into subnetworks", [data, screening], cmd_decompose)
    p.add_argument("--jag", help="decompose this JAG CSV instead of screening --data")
    p.add_argument("--method", choices=("exact", "spectral"), default="spectral")
    p.add_argument("--clusters", "--d", default="auto", help="cluster count or 'auto' (eigengap)")

    p = add("estimate", "FLOG at fixed penalties", [data], cmd_estimate)
    p.add_argument("--lambda-b", type=float, required=True)
    p.add_argument("--lambda-omega", type=float, required=True)
    p.add_argument("--mask", help="0/1 CSV of allowed pairs (e.g. pattern.csv)")

    for name, help_text, method in (("sgtg", "sparse transition graph only", "sgtg"),
                                    ("scdg", "sparse conditional dependence graph only", "scdg")):
        p = add(name, help_text, [data, grid],
                lambda a, r, m=method: _single_graph(a, r, m))
        p.add_argument("--lam", type=float, help="fixed penalty (default: BIC over the grid)")

    p = add("jgse", "two-stage screening and estimation", [data], cmd_jgse)
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--valid", help="validation CSV (for tuning=validation)")
    p.add_argument("--tuning", choices=("bic", "validation"))

    p = add("benchmark", "synthetic experiment protocols", [], cmd_benchmark)
    p.add_argument("--protocol", choices=PROTOCOLS, required=True)
    p.add_argument("--overrides", help="JSON object of protocol keyword overrides")

    p = add("forecast", "rolling-window forecast error", [data], cmd_forecast)
    p.add_argument("--window-frac", type=float, default=0.8)
    p.add_argument("--horizon", type=_positive_int, default=1)
    p.add_argument("--method", nargs="+", choices=("sgtg", "flogw", "jgse", "zero"),
                   default=["jgse"])
    p.add_argument("--config", help="run configuration JSON (penalty grid)")

    p = add("tune", "penalty selection by validation loss or BIC", [data, grid], cmd_tune)
    p.add_argument("--method", choices=("flog", "sgtg", "scdg"), default="flog")
    p.add_argument("--valid", help="validation CSV (default: BIC)")
    return parser


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    needs_data = args.command not in ("simulate", "benchmark", "decompose")
    if needs_data and not args.data:
        return _error("usage", f"{args.command} requires --data", EXIT_USAGE)
    try:
        if args.workers is None:
            args.workers = default_workers()
        run = Run(args.command, argv, args.out or f"{args.command}-seed{args.seed}", args.seed)
        args.func(args, run)
        run.finish()
    except DataError as exc:
        return _error("data", str(exc), EXIT_DATA)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL)
    except ValueError as exc:
        # stationarity and positive-definiteness checks raise ValueError
        return _error("numerical", str(exc), EXIT_NUMERICAL)
    except Exception as exc:
        logger.debug("internal error", exc_info=True)
        return _error("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
