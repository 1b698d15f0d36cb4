import numpy as np
import pytest

from jgse.gist import GistConfig, gist_screen, line_search_step
from jgse.model import TimeSeriesDataset, assemble_dataset, grad_B, grad_Omega, neg_log_likelihood
from jgse.synth import NetworkSpec, generate_network, simulate
from jgse.thresholding import build_jag, pairs_for_quantile, top_pairs_mask

from conftest import random_data


def _planted(p, blocks, n, seed):
    B, Omega = generate_network(NetworkSpec(p=p, block_sizes=blocks, seed=seed))
    return simulate(B, omega=Omega, n=n, seed=100 + seed, center=True, normalize=True)


def _pairs(B, Omega, phi):
    C = build_jag(B, Omega, phi)
    return int(np.count_nonzero(np.triu(C, 1)))


@pytest.mark.parametrize("seed", range(4))
def test_descent_pd_and_budget(seed):
    data = _planted(24, (12, 12), 60, seed)
    cfg = GistConfig(q=0.3)
    m = pairs_for_quantile(cfg.q, data.p)
    seen = []

    def check(it, B, Omega, f):
        np.linalg.cholesky(Omega)
        assert _pairs(B, Omega, cfg.phi) <= m
        seen.append(f)

    res = gist_screen(data, cfg, callback=check)
    trace = np.array(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]))
    assert trace[1:].tolist() == seen
    assert max(res.pattern_sizes[1:]) <= m
    assert res.n_pairs <= m
    assert np.array_equal(res.pattern, res.pattern.T)
    assert not res.pattern.diagonal().any()


def test_q_one_keeps_every_pair():
    data = random_data(6, 40, seed=3, normalize=True)
    res = gist_screen(data, GistConfig(q=1.0, max_iter=60))
    assert res.n_pairs == 6 * 5 // 2
    assert np.all(np.diff(res.objective_trace) <= 0)


def test_output_follows_node_relabeling():
    rng = np.random.default_rng(7)
    series = rng.standard_normal((41, 10)) @ (np.eye(10) + 0.3 * rng.standard_normal((10, 10)))
    perm = rng.permutation(10)
    cfg = GistConfig(q=0.2)
    a = gist_screen(assemble_dataset(series, center=True, normalize=True), cfg)
    b = gist_screen(assemble_dataset(series[:, perm], center=True, normalize=True), cfg)
    np.testing.assert_array_equal(a.pattern[np.ix_(perm, perm)], b.pattern)
    np.testing.assert_allclose(a.B_screened[np.ix_(perm, perm)], b.B_screened, atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_phi_extremes_order_by_one_component(seed):
    rng = np.random.default_rng(seed)
    p = 9
    B = rng.standard_normal((p, p))
    W = rng.standard_normal((p, p))
    Omega = W + W.T
    strength_b = np.sqrt(B ** 2 + B.T ** 2)
    for m in (3, 10, 20):
        np.testing.assert_array_equal(top_pairs_mask(build_jag(B, Omega, 1e3), m),
                                      top_pairs_mask(np.abs(Omega), m))
        np.testing.assert_array_equal(top_pairs_mask(build_jag(B, Omega, 1e-3), m),
                                      top_pairs_mask(strength_b, m))


def test_cross_block_budget_is_forced_at_q_03():
    # 114 pairs must survive but only 90 lie inside the two blocks.
    m = pairs_for_quantile(0.3, 20)
    assert m == 114
    for seed in range(3):
        res = gist_screen(_planted(20, (10, 10), 200, seed), GistConfig(q=0.3))
        assert res.n_pairs == m
        assert res.pattern[:10, 10:].sum() >= m - 90


def test_tight_budget_avoids_cross_block_pairs():
    clean = sum(not gist_screen(_planted(20, (10, 10), 200, s), GistConfig(q=0.05)).pattern[:10, 10:].any()
                for s in range(20))
    assert clean >= 19


def _mle_point(data):
    B = np.linalg.solve(data.Sxx, data.Sxy)
    R = data.Y - data.X @ B
    return B, data.n * np.linalg.inv(R.T @ R)


def test_zero_gradient_is_rejected():
    data = random_data(3, 30, seed=1)
    B, Omega = _mle_point(data)
    f = neg_log_likelihood(B, Omega, data)
    cfg = GistConfig(q=1.0)
    out = line_search_step(B, Omega, f, np.zeros((3, 3)), "B", data, 3, cfg)
    assert not out.accepted
    assert out.f == f


def test_stationary_start_terminates_immediately():
    data = random_data(3, 30, seed=1)
    B, Omega = _mle_point(data)
    assert np.abs(grad_B(B, Omega, data)).max() < 1e-8
    assert np.abs(grad_Omega(B, Omega, data)).max() < 1e-8
    res = gist_screen(data, GistConfig(q=1.0), init=(B, Omega))
    assert res.iterations <= 2
    assert res.convergence_reason in ("step-floor", "tolerance")
    np.testing.assert_allclose(res.B_screened, B, atol=1e-12)


def test_small_lipschitz_quadratic_accepts_unit_step():
    rng = np.random.default_rng(2)
    X = 0.1 * rng.standard_normal((20, 2))
    Y = X @ np.array([[0.5, 0.2], [0.0, -0.3]]) + 0.05 * rng.standard_normal((20, 2))
    z = np.zeros(2)
    data = TimeSeriesDataset(series=np.vstack([X, Y[-1:]]), X=X, Y=Y, x_mean=z, y_mean=z,
                             x_scale=np.ones(2), names=("a", "b"))
    assert np.linalg.eigvalsh(data.Sxx).max() < 1.0
    B, Omega = np.zeros((2, 2)), np.eye(2)
    f = neg_log_likelihood(B, Omega, data)
    out = line_search_step(B, Omega, f, grad_B(B, Omega, data), "B", data,
                           pairs_for_quantile(1.0, 2), GistConfig(q=1.0))
    assert out.accepted and out.alpha == 1.0
    assert out.f < f


def test_indefinite_omega_trial_is_shrunk():
    data = assemble_dataset(10.0 * np.random.default_rng(4).standard_normal((31, 3)), center=True)
    B, Omega = np.zeros((3, 3)), np.eye(3)
    f = neg_log_likelihood(B, Omega, data)
    G = grad_Omega(B, Omega, data)
    assert neg_log_likelihood(B, Omega - G, data) == np.inf
    out = line_search_step(B, Omega, f, G, "Omega", data, 3, GistConfig(q=1.0))
    assert out.accepted and out.alpha < 1.0
    np.linalg.cholesky(out.Omega)
    assert out.f < f


def test_rejects_indefinite_start():
    data = random_data(3, 20)
    with pytest.raises(ValueError, match="positive definite"):
        gist_screen(data, init=(np.zeros((3, 3)), -np.eye(3)))


@pytest.mark.parametrize("kwargs", [{"q": 0.0}, {"q": 1.5}, {"phi": 0.0}, {"c1": 1.0}, {"c2": 0.0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        GistConfig(**kwargs)
