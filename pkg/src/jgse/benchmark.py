"""Synthetic experiment protocols producing CSV-ready tables.

Each protocol returns ``{table_name: (columns, rows)}`` where ``rows`` is a
list of dicts.  Replicates are independent tasks whose seeds derive from
``(seed, replicate)``, so any single row can be re-run in isolation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .decompose import spectral_cluster
from .gist import GistConfig, gist_screen
from .metrics import (ForecastConfig, model_error_B, model_error_Omega, rand_index,
                      rolling_mse, tpr_fpr, trimmed_mean)
from .pipeline import (JgseConfig, flog_whole, jgse, log_grid, penalty_scales, run_tasks,
                       tune_by_bic, tune_by_validation)
from .synth import NetworkSpec, generate_network, simulate, simulate_series
from .thresholding import build_jag

PROTOCOLS = ("tableI", "fig3", "tableII")


def replicate_seeds(seed: int, replicate: int) -> tuple:
    """``(network, train, valid)`` seeds for one replicate."""
    state = np.random.SeedSequence([int(seed), int(replicate)]).generate_state(3)
    return tuple(int(s) for s in state)


@dataclass(frozen=True)
class ExampleSetup:
    name: str
    spec: NetworkSpec
    n: int
    target: str = "B"  # which model error to report: "B" or "Omega"


def table_i_examples() -> dict:
    """Network regimes of the method comparison (seeds filled in per replicate)."""
    return {
        "example1": ExampleSetup("example1", NetworkSpec(p=40, block_sizes=(20, 20)), 100),
        "example2": ExampleSetup("example2", NetworkSpec(p=80, block_sizes=(40, 20, 20)), 200),
        "example3": ExampleSetup("example3", NetworkSpec(p=160, block_sizes=(40,) * 4), 300),
        "example4": ExampleSetup("example4", NetworkSpec(p=20, block_sizes=(20,),
                                                         omega_style="identity"), 50),
        "example5": ExampleSetup("example5", NetworkSpec(p=20, block_sizes=(20,), b_density=0.0),
                                 50, target="Omega"),
    }


TABLE_I_METHODS = ("sGTG", "sCDG", "FLOGw", "JGSE")


def _scalar_grid(scale, points, span):
    return list(log_grid(scale, points, span))


def _table_i_task(args):
    setup, r, seed, n_valid, cfg, methods = args
    s_net, s_train, s_valid = replicate_seeds(seed, r)
    spec = replace(setup.spec, seed=s_net)
    B, Omega = generate_network(spec)
    train = simulate(B, omega=Omega, n=setup.n, seed=s_train, center=True)
    valid = simulate(B, omega=Omega, n=n_valid, seed=s_valid, center=True)
    truth = build_jag(B, Omega)
    Sigma_xx = train.Sxx / train.n
    cfg = replace(cfg, n_clusters=len(spec.block_sizes), seed=s_net % (2 ** 31))
    sb, so = penalty_scales(train)
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        if method == "sGTG":
            res = tune_by_validation(train, valid, "sgtg", _scalar_grid(sb, cfg.grid_points, cfg.grid_span))
            Bh, Oh, lam = res.fit.B, res.fit.Omega, (res.params, None)
        elif method == "sCDG":
            res = tune_by_validation(train, valid, "scdg", _scalar_grid(so, cfg.grid_points, cfg.grid_span))
            Bh, Oh, lam = res.fit.B, res.fit.Omega, (None, res.params)
        elif method == "FLOGw":
            out = flog_whole(train, cfg, valid=valid)
            Bh, Oh, lam = out.B, out.Omega, (out.report["lambda_b"], out.report["lambda_omega"])
        elif method == "JGSE":
            out = jgse(train, cfg, valid=valid)
            Bh, Oh, lam = out.B, out.Omega, (out.report["lambda_b"], out.report["lambda_omega"])
        else:
            raise ValueError(f"unknown method {method!r}")
        elapsed = time.perf_counter() - t0
        est = build_jag(Bh, Oh if method != "sGTG" else np.diag(np.diag(Oh)))
        tpr, fpr = tpr_fpr(est, truth)
        if setup.target == "Omega":
            me = model_error_Omega(Oh, Omega)
        else:
            me = model_error_B(Bh, B, Sigma_xx)
        rows.append({"example": setup.name, "replicate": r, "method": method,
                     "tpr": tpr, "fpr": fpr, "me": me,
                     "lambda_b": "" if lam[0] is None else lam[0],
                     "lambda_omega": "" if lam[1] is None else lam[1],
                     "seed_network": s_net, "seed_train": s_train, "seed_valid": s_valid,
                     "seconds": elapsed})
    return rows


REPLICATE_COLUMNS = ["example", "replicate", "method", "tpr", "fpr", "me", "lambda_b",
                     "lambda_omega", "seed_network", "seed_train", "seed_valid"]
SUMMARY_COLUMNS = ["example", "method", "replicates", "mean_tpr", "mean_fpr", "trimmed_mean_me"]


def summarize_table_i(rows: list) -> list:
    """Mean TPR / FPR and 25% trimmed-mean ME per (example, method)."""
    out = []
    keys = []
    for row in rows:
        key = (row["example"], row["method"])
        if key not in keys:
            keys.append(key)
    for ex, method in keys:
        sel = [r for r in rows if r["example"] == ex and r["method"] == method]
        out.append({"example": ex, "method": method, "replicates": len(sel),
                    "mean_tpr": float(np.nanmean([r["tpr"] for r in sel])),
                    "mean_fpr": float(np.nanmean([r["fpr"] for r in sel])),
                    "trimmed_mean_me": trimmed_mean([r["me"] for r in sel], 0.25)})
    return out


def table_i(examples=("example1",), *, replicates: int = 20, seed: int = 0, n_valid: int = 1000,
            methods=TABLE_I_METHODS, cfg: Optional[JgseConfig] = None,
            setups: Optional[dict] = None, workers: Optional[int] = 1) -> dict:
    """Identification and estimation accuracy of sGTG, sCDG, FLOG^w and JGSE.

    All penalties are chosen by the joint loss on ``n_valid`` fresh samples
    from the same system.  ME_B uses the training ``X^T X / n``.
    """
    cfg = cfg or JgseConfig(tuning="validation")
    cfg = replace(cfg, tuning="validation", decomposition="spectral")
    setups = setups or table_i_examples()
    tasks = []
    for name in examples:
        if name not in setups:
            raise ValueError(f"unknown example {name!r}; choose from {sorted(setups)}")
        for r in range(replicates):
            tasks.append((setups[name], r, seed, n_valid, cfg, tuple(methods)))
    rows = [row for chunk in run_tasks(_table_i_task, tasks, workers) for row in chunk]
    return {"tableI_replicates": (REPLICATE_COLUMNS, rows),
            "tableI": (SUMMARY_COLUMNS, summarize_table_i(rows))}


# ---------------------------------------------------------------- decomposition study

def _fig3_task(args):
    p, r, seed, n, q_values, density, grid_points, grid_span = args
    s_net, s_train, _ = replicate_seeds(seed, r)
    spec = NetworkSpec(p=p, block_sizes=(p // 2, p - p // 2), b_density=density,
                       omega_style="compound", rho=0.5, seed=s_net)
    B, Omega = generate_network(spec)
    data = simulate(B, omega=Omega, n=n, seed=s_train, center=True)
    truth = np.repeat([0, 1], spec.block_sizes)
    km_seed = s_net % (2 ** 31)
    rows = []
    screen_data = data.with_unit_norm_columns()
    for q in q_values:
        g = gist_screen(screen_data, GistConfig(q=q))
        labels = spectral_cluster(g.C_hat, 2, seed=km_seed).labels
        rows.append({"p": p, "q": q, "replicate": r, "method": "GIST",
                     "rand_index": rand_index(labels, truth), "seed_network": s_net,
                     "seed_train": s_train})
    sb, so = penalty_scales(data)
    res = tune_by_bic(data, "sgtg", _scalar_grid(sb, grid_points, grid_span))
    C = build_jag(res.fit.B, np.zeros((p, p)))
    labels = spectral_cluster(C, 2, seed=km_seed).labels
    rows.append({"p": p, "q": "", "replicate": r, "method": "sGTG",
                 "rand_index": rand_index(labels, truth), "seed_network": s_net, "seed_train": s_train})
    res = tune_by_bic(data, "scdg", _scalar_grid(so, grid_points, grid_span))
    C = build_jag(np.zeros((p, p)), res.fit.Omega)
    labels = spectral_cluster(C, 2, seed=km_seed).labels
    rows.append({"p": p, "q": "", "replicate": r, "method": "sCDG",
                 "rand_index": rand_index(labels, truth), "seed_network": s_net, "seed_train": s_train})
    return rows


def fig3(p_values=(60, 100), q_values=(0.2, 0.4, 0.6, 0.8), *, replicates: int = 20,
         n: int = 30, seed: int = 0, b_density: float = 0.1, grid_points: int = 6,
         grid_span=(1e-2, 1.0), workers: Optional[int] = 1) -> dict:
    """Rand index of two-cluster spectral decompositions from GIST, sGTG and sCDG.

    Networks have two equal blocks with compound-symmetric noise covariance
    (unit variances, within-block correlation 0.5).  sGTG and sCDG are tuned
    by BIC and do not depend on ``q``.
    """
    tasks = [(p, r, seed, n, tuple(q_values), b_density, grid_points, tuple(grid_span))
             for p in p_values for r in range(replicates)]
    rows = [row for chunk in run_tasks(_fig3_task, tasks, workers) for row in chunk]
    summary = []
    for p in p_values:
        for q in q_values:
            sel = [r["rand_index"] for r in rows if r["p"] == p and r["method"] == "GIST" and r["q"] == q]
            summary.append({"p": p, "q": q, "method": "GIST", "mean_rand_index": float(np.mean(sel))})
        for m in ("sGTG", "sCDG"):
            sel = [r["rand_index"] for r in rows if r["p"] == p and r["method"] == m]
            summary.append({"p": p, "q": "", "method": m, "mean_rand_index": float(np.mean(sel))})
    return {"fig3_replicates": (["p", "q", "replicate", "method", "rand_index", "seed_network",
                                 "seed_train"], rows),
            "fig3": (["p", "q", "method", "mean_rand_index"], summary)}


# ---------------------------------------------------------------- timing

def table_ii(settings=((200, 50),), *, n: int = 100, seed: int = 0, b_density: float = 0.1,
             cfg: Optional[JgseConfig] = None, replicates: int = 1) -> dict:
    """Wall time of JGSE versus FLOG^w over the same penalty grid.

    Runs serially so the two timings are comparable.  Both trace the whole
    grid and select by BIC; the grid is built from the full data.
    """
    cfg = cfg or JgseConfig(grid_points=3, grid_span=(0.03, 0.3))
    rows = []
    for p, ps in settings:
        if p % ps:
            raise ValueError(f"p={p} is not a multiple of p_s={ps}")
        for r in range(replicates):
            s_net, s_train, _ = replicate_seeds(seed, r)
            spec = NetworkSpec(p=p, block_sizes=(ps,) * (p // ps), b_density=b_density,
                               omega_style="compound", rho=0.5, seed=s_net)
            B, Omega = generate_network(spec)
            data = simulate(B, omega=Omega, n=n, seed=s_train, center=True)
            run_cfg = replace(cfg, tuning="bic", decomposition="spectral",
                              n_clusters=p // ps, seed=s_net % (2 ** 31))
            t0 = time.perf_counter()
            out = jgse(data, run_cfg, workers=1)
            t_jgse = time.perf_counter() - t0
            t0 = time.perf_counter()
            flog_whole(data, run_cfg, workers=1)
            t_whole = time.perf_counter() - t0
            rows.append({"p": p, "p_s": ps, "replicate": r, "grid_size": out.report["grid_size"],
                         "t_jgse": t_jgse, "t_flogw": t_whole, "ratio": t_jgse / t_whole,
                         "n_blocks": out.report["n_blocks"], "seed_network": s_net,
                         "seed_train": s_train})
    return {"tableII": (["p", "p_s", "replicate", "grid_size", "t_jgse", "t_flogw", "ratio",
                         "n_blocks", "seed_network", "seed_train"], rows)}


# ---------------------------------------------------------------- forecasting

def make_estimator(method: str, cfg: Optional[JgseConfig] = None, *, B_true=None):
    """Window estimator for ``rolling_mse``.

    ``sgtg`` and ``flogw`` / ``jgse`` are tuned by BIC on each window;
    ``true`` returns ``B_true`` and ``zero`` the zero matrix.
    """
    cfg = replace(cfg or JgseConfig(), tuning="bic")
    if method == "true":
        if B_true is None:
            raise ValueError("the true estimator needs B_true")
        return lambda data: np.asarray(B_true, dtype=float)
    if method == "zero":
        return lambda data: np.zeros((data.p, data.p))
    if method == "sgtg":
        def est(data):
            sb, _ = penalty_scales(data)
            return tune_by_bic(data, "sgtg", _scalar_grid(sb, cfg.grid_points, cfg.grid_span)).fit.B
        return est
    if method == "flogw":
        return lambda data: flog_whole(data, cfg).B
    if method == "jgse":
        return lambda data: jgse(data, cfg).B
    raise ValueError(f"unknown forecasting method {method!r}")


def _forecast_task(args):
    r, seed, spec, n, window, horizon, methods, cfg = args
    s_net, s_train, _ = replicate_seeds(seed, r)
    B, Omega = generate_network(replace(spec, seed=s_net))
    series = simulate_series(B, omega=Omega, length=n + 1, seed=s_train)
    fc = ForecastConfig(window=window, horizon=horizon)
    cfg = replace(cfg, seed=s_net % (2 ** 31))
    return [{"replicate": r, "method": m,
             "rolling_mse": rolling_mse(series, fc, make_estimator(m, cfg, B_true=B)),
             "seed_network": s_net, "seed_train": s_train} for m in methods]


def forecast_study(spec: NetworkSpec, *, n: int = 100, window_frac: float = 0.8,
                   horizon: int = 1, replicates: int = 10, seed: int = 0,
                   methods=("true", "zero", "flogw", "jgse"),
                   cfg: Optional[JgseConfig] = None, workers: Optional[int] = 1) -> dict:
    """Rolling-origin forecast errors on simulated series, one row per (seed, method)."""
    cfg = cfg or JgseConfig(grid_points=4, grid_span=(0.01, 0.3))
    window = int(round(window_frac * n))
    tasks = [(r, seed, spec, n, window, horizon, tuple(methods), cfg) for r in range(replicates)]
    rows = [row for chunk in run_tasks(_forecast_task, tasks, workers) for row in chunk]
    return {"forecast": (["replicate", "method", "rolling_mse", "seed_network", "seed_train"], rows)}


def run_protocol(protocol: str, overrides: Optional[dict] = None, *, seed: int = 0,
                 workers: Optional[int] = 1) -> dict:
    """Dispatch a protocol by name with keyword overrides (as parsed from JSON)."""
    overrides = dict(overrides or {})
    cfg_raw = overrides.pop("config", None)
    if cfg_raw is not None:
        from .config import jgse_config_from_dict
        overrides["cfg"] = jgse_config_from_dict(cfg_raw)
    if protocol == "tableI":
        return table_i(seed=seed, workers=workers, **overrides)
    if protocol == "fig3":
        if "cfg" in overrides:
            raise ValueError("fig3 does not take a 'config' override")
        return fig3(seed=seed, workers=workers, **overrides)
    if protocol == "tableII":
        return table_ii(seed=seed, **overrides)
    raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
