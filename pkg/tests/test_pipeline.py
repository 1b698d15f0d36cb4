import os
from dataclasses import replace

import numpy as np
import pytest

import jgse.pipeline as P
from jgse.flog import FlogConfig
from jgse.gist import GistConfig
from jgse.pipeline import (ConfigError, JgseConfig, bic_score, default_workers, fit_method,
                           flog_whole, jgse, log_grid, penalty_scales, run_tasks,
                           tune_by_bic, tune_by_validation, validation_loss)
from jgse.synth import NetworkSpec, generate_network, simulate

SMALL = dict(grid_points=2, grid_span=(0.05, 0.3))


def _square(x):
    return x * x


def _planted(seed=0, p=16, blocks=(8, 8), n=60):
    B, Omega = generate_network(NetworkSpec(p=p, block_sizes=blocks, seed=seed))
    train = simulate(B, omega=Omega, n=n, seed=seed + 10, center=True)
    valid = simulate(B, omega=Omega, n=200, seed=seed + 20, center=True)
    return train, valid


# ------------------------------------------------------------ plumbing

def test_run_tasks_keeps_order():
    assert run_tasks(_square, range(6), workers=1) == [0, 1, 4, 9, 16, 25]
    assert run_tasks(_square, range(6), workers=2) == [0, 1, 4, 9, 16, 25]
    with pytest.raises(ConfigError):
        run_tasks(_square, [1], workers=0)


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("JGSE_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("JGSE_WORKERS", "zero")
    with pytest.raises(ConfigError):
        default_workers()
    monkeypatch.delenv("JGSE_WORKERS")
    assert default_workers() == (os.cpu_count() or 1)


def test_log_grid():
    g = log_grid(10.0, 3, (0.01, 1.0))
    np.testing.assert_allclose(g, [10.0, 1.0, 0.1])
    with pytest.raises(ConfigError):
        log_grid(1.0, 0)
    with pytest.raises(ConfigError):
        log_grid(1.0, 3, (0.5, 0.1))


def test_penalty_scales_zero_the_first_step():
    train, _ = _planted()
    sb, so = penalty_scales(train)
    fit = fit_method("flog", train, (sb * 1.001, so * 1.001))
    off = ~np.eye(train.p, dtype=bool)
    assert np.all(fit.B[off] == 0)
    assert np.all(fit.Omega[off] == 0)


@pytest.mark.parametrize("kwargs", [
    dict(decomposition="kmeans"), dict(tuning="cv"), dict(constraint_mode="loose"),
    dict(grid_points=0), dict(grid_span=(0.0, 1.0)), dict(lambda_b=()), dict(lambda_b=(-1.0,)),
    dict(n_clusters=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        JgseConfig(**kwargs)


def test_constraint_mode_default_follows_q():
    assert JgseConfig(gist=GistConfig(q=0.3)).effective_constraint_mode == "enforce_mask"
    assert JgseConfig(gist=GistConfig(q=0.1)).effective_constraint_mode == "blocks_only"
    assert JgseConfig(gist=GistConfig(q=0.1), constraint_mode="enforce_mask"
                      ).effective_constraint_mode == "enforce_mask"


def test_explicit_grid_is_product():
    train, _ = _planted()
    cfg = JgseConfig(lambda_b=(3.0, 1.0), lambda_omega=(2.0, 0.5, 0.1))
    assert cfg.grid(train) == [(3.0, 2.0), (3.0, 0.5), (3.0, 0.1), (1.0, 2.0), (1.0, 0.5), (1.0, 0.1)]


# ------------------------------------------------------------ tuning

def test_singleton_grid():
    train, valid = _planted()
    res = tune_by_validation(train, valid, "flog", [(5.0, 3.0)])
    assert res.params == (5.0, 3.0) and res.index == 0


def test_validation_selects_exact_argmin():
    train, valid = _planted(1)
    sb, so = penalty_scales(train)
    grid = [(b, o) for b in log_grid(sb, 3, (0.02, 0.5)) for o in log_grid(so, 3, (0.02, 0.5))]
    res = tune_by_validation(train, valid, "flog", grid)
    assert res.scores[res.index] == min(res.scores)
    assert res.scores[res.index] == validation_loss(res.fit, valid)


@pytest.mark.parametrize("method", ["sgtg", "scdg"])
def test_refined_grid_never_worse(method):
    train, valid = _planted(2)
    sb, so = penalty_scales(train)
    scale = sb if method == "sgtg" else so
    coarse = list(log_grid(scale, 3, (0.01, 1.0)))
    fine = sorted(set(coarse) | set(log_grid(scale, 9, (0.01, 1.0))), reverse=True)
    a = tune_by_validation(train, valid, method, coarse)
    b = tune_by_validation(train, valid, method, fine)
    assert min(b.scores) <= min(a.scores) * (1 + 1e-9)


def test_nan_scores_never_win(monkeypatch):
    train, valid = _planted()
    calls = iter([np.nan, 5.0, np.inf])
    monkeypatch.setattr(P, "validation_loss", lambda fit, v: next(calls))
    res = tune_by_validation(train, valid, "scdg", [10.0, 5.0, 1.0])
    assert res.index == 1


def test_empty_grid_rejected():
    train, valid = _planted()
    with pytest.raises(ConfigError):
        tune_by_validation(train, valid, "flog", [])
    with pytest.raises(ConfigError):
        tune_by_bic(train, "flog", [])


def test_bic_degrees_of_freedom_by_method():
    train, _ = _planted()
    fit = fit_method("sgtg", train, 0.5 * penalty_scales(train)[0])
    s = bic_score(fit, train, "sgtg")
    nnz = np.count_nonzero(fit.B)
    expected = 2 * P.neg_log_likelihood(fit.B, fit.Omega, train) + nnz * np.log(train.n)
    assert s == pytest.approx(expected)
    fit = fit_method("scdg", train, 0.5 * penalty_scales(train)[1])
    assert np.all(fit.B == 0)
    assert bic_score(P.Fit(fit.B, -np.eye(train.p)), train, "scdg") == np.inf
    with pytest.raises(ConfigError):
        fit_method("ridge", train, 1.0)


# ------------------------------------------------------------ JGSE

def test_inactive_screening_equals_whole_network_fit():
    train, valid = _planted(3)
    cfg = JgseConfig(gist=GistConfig(q=1.0), decomposition="none", constraint_mode="enforce_mask",
                     tuning="validation", **SMALL)
    a = jgse(train, cfg, valid=valid)
    b = flog_whole(train, cfg, valid=valid)
    assert a.report["screened_pairs"] == train.p * (train.p - 1) // 2
    np.testing.assert_allclose(a.B, b.B, atol=1e-12)
    np.testing.assert_allclose(a.Omega, b.Omega, atol=1e-12)
    assert a.report["grid_index"] == b.report["grid_index"]


def test_estimates_block_diagonal_in_recovered_labels():
    train, _ = _planted(4)
    res = jgse(train, JgseConfig(n_clusters=2, **SMALL))
    labels = res.decomposition.labels
    cross = labels[:, None] != labels[None, :]
    assert res.decomposition.d == 2
    assert np.all(res.B[cross] == 0) and np.all(res.Omega[cross] == 0)
    np.linalg.cholesky(res.Omega)


def test_block_order_does_not_matter(monkeypatch):
    train, valid = _planted(5)
    cfg = JgseConfig(n_clusters=2, tuning="validation", **SMALL)
    ref = jgse(train, cfg, valid=valid)

    def reversed_tasks(fn, tasks, workers=None):
        out = [fn(t) for t in reversed(list(tasks))]
        return out[::-1]

    monkeypatch.setattr(P, "run_tasks", reversed_tasks)
    other = jgse(train, cfg, valid=valid)
    np.testing.assert_allclose(other.B, ref.B, atol=1e-8)
    np.testing.assert_allclose(other.Omega, ref.Omega, atol=1e-8)


def test_parallel_blocks_match_serial():
    train, _ = _planted(6)
    cfg = JgseConfig(n_clusters=2, **SMALL)
    a = jgse(train, cfg, workers=1)
    b = jgse(train, cfg, workers=2)
    np.testing.assert_array_equal(a.B, b.B)
    np.testing.assert_array_equal(a.Omega, b.Omega)


def test_report_contents_and_timings():
    train, _ = _planted(7)
    res = jgse(train, JgseConfig(decomposition="exact", **SMALL))
    r = res.report
    t = r["timings"]
    stages = t["screening"] + t["decomposition"] + t["estimation"]
    assert abs(stages - t["total"]) <= 0.05 * t["total"]
    assert r["grid_size"] == 4 and len(r["scores"]) == 4
    assert r["scores"][r["grid_index"]] == min(r["scores"])
    assert sum(r["block_sizes"]) == train.p and r["n_blocks"] == len(r["block_sizes"])
    assert r["screening_stop"] in ("pattern-stable", "tolerance", "max-iter", "step-floor")


def test_blocks_only_mode_leaves_blocks_unmasked():
    train, _ = _planted(8)
    cfg = JgseConfig(gist=GistConfig(q=0.05), n_clusters=2, lambda_b=(1e-3,), lambda_omega=(1e-3,))
    assert cfg.effective_constraint_mode == "blocks_only"
    res = jgse(train, cfg)
    labels = res.decomposition.labels
    within = (labels[:, None] == labels[None, :]) & ~np.eye(train.p, dtype=bool)
    # screened-out pairs inside a block may still be estimated
    assert np.any((res.B != 0) & within & ~res.pattern)


def test_validation_tuning_requires_data():
    train, _ = _planted()
    with pytest.raises(ConfigError):
        jgse(train, JgseConfig(tuning="validation", **SMALL))
    with pytest.raises(ConfigError):
        jgse(train, JgseConfig(tuning="validation", **SMALL), valid=_planted(p=4, blocks=(4,))[1])


def test_flog_settings_reach_the_fit():
    train, _ = _planted()
    cfg = JgseConfig(flog=FlogConfig(max_outer=1), decomposition="none", **SMALL)
    loose = flog_whole(train, cfg)
    tight = flog_whole(train, replace(cfg, flog=FlogConfig()))
    assert not np.allclose(loose.Omega, tight.Omega)
