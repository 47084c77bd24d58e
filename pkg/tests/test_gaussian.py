import math

import numpy as np
import pytest
from scipy.integrate import quad

from oracles import grid_sinkhorn_cross_moment
from sinkhorn_bridge.drift import drift, drift_batch, from_potentials
from sinkhorn_bridge.gaussian import (
    GaussianParams,
    MSERow,
    drift_mse,
    gaussian_bridge,
    loglog_slopes,
    mse_experiment,
    oracle_drift,
    oracle_drift_batch,
    oracle_marginal,
    benchmark_bridge,
    random_spd,
    reversed_bridge,
    sample_marginal,
    sqrtm_spd,
    summarize,
    write_mse_csv,
)
from sinkhorn_bridge.sinkhorn import SolverConfig, fit


def one_d(alpha, beta, eps, a=0.0, b=0.0):
    return gaussian_bridge(GaussianParams([a], [[alpha]]), GaussianParams([b], [[beta]]), eps)


def test_golden_ratio_cross_covariance():
    c = one_d(1.0, 1.0, 1.0).cross_cov[0, 0]
    assert c == pytest.approx(math.sqrt(1.25) - 0.5, rel=1e-14)


def test_small_eps_gives_identity_coupling():
    assert one_d(2.0, 2.0, 1e-6).cross_cov[0, 0] == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("eps", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("beta", [1.0, 1.5])
def test_cross_covariance_vs_dense_grid_sinkhorn(eps, beta):
    want = grid_sinkhorn_cross_moment(1.0, beta, eps)
    assert one_d(1.0, beta, eps).cross_cov[0, 0] == pytest.approx(want, rel=1e-3)


def test_cross_covariance_solves_the_fixed_point():
    """``C`` satisfies ``S^{-1} C' A^{-1} = I / eps`` with ``S = B - C' A^{-1} C``."""
    A, B = random_spd(3, 1), random_spd(3, 2)
    br = gaussian_bridge(GaussianParams(np.zeros(3), A), GaussianParams(np.zeros(3), B), 0.7)
    C = br.cross_cov
    S = B - C.T @ np.linalg.solve(A, C)
    lhs = np.linalg.solve(S, C.T @ np.linalg.inv(A))
    assert np.allclose(lhs, np.eye(3) / 0.7, atol=1e-9)
    assert np.all(np.linalg.eigvalsh(br.joint_cov()) > 0)


def test_diagonal_tensorises():
    a, b = np.array([0.3, -1.0]), np.array([1.0, 0.5])
    A, B = np.diag([1.0, 2.5]), np.diag([0.7, 1.9])
    eps = 0.8
    full = gaussian_bridge(GaussianParams(a, A), GaussianParams(b, B), eps)
    parts = [one_d(A[k, k], B[k, k], eps, a[k], b[k]) for k in range(2)]
    assert np.allclose(np.diag(full.cross_cov), [p.cross_cov[0, 0] for p in parts], atol=1e-10)
    assert abs(full.cross_cov[0, 1]) < 1e-10 and abs(full.cross_cov[1, 0]) < 1e-10
    z = np.array([0.4, -0.9])
    for t in (0.0, 0.3, 0.8):
        d = oracle_drift(full, t, z)
        for k in range(2):
            assert d[k] == pytest.approx(oracle_drift(parts[k], t, z[k:k + 1])[0], abs=1e-10)
        m = oracle_marginal(full, t)
        for k in range(2):
            mk = oracle_marginal(parts[k], t)
            assert m.mean[k] == pytest.approx(mk.mean[0], abs=1e-10)
            assert m.cov[k, k] == pytest.approx(mk.cov[0, 0], abs=1e-10)


def test_symmetric_centered_drift_vanishes_at_origin():
    br = gaussian_bridge(GaussianParams(np.zeros(2), np.eye(2)), GaussianParams(np.zeros(2), np.eye(2)), 1.0)
    for t in np.linspace(0, 0.99, 12):
        assert np.allclose(oracle_drift(br, t, [0.0, 0.0]), 0.0, atol=1e-15)


def quadrature_drift(br, t, z):
    """``(E_w[Y] - z) / (1 - t)`` with ``w(y) ∝ exp((g(y) - (z - y)^2 / (2 (1 - t))) / eps) nu(y)``."""
    Q, q = br.target_potential()
    Q, q = Q[0, 0], q[0]
    b, B, eps, s = br.target.mean[0], br.target.cov[0, 0], br.eps, 1.0 - t

    def log_w(y):
        g = 0.5 * Q * y * y + q * y
        return (g - (z - y) ** 2 / (2 * s)) / eps - (y - b) ** 2 / (2 * B)

    # centre the exponent at its maximiser so the integrand is O(1)
    grid = np.linspace(b - 20, b + 20, 40001)
    y0 = grid[np.argmax(log_w(grid))]
    c = log_w(y0)
    kw = dict(epsabs=0, epsrel=1e-13, limit=200, points=None)
    lo, hi = y0 - 40, y0 + 40
    num = quad(lambda y: y * math.exp(log_w(y) - c), lo, hi, **kw)[0]
    den = quad(lambda y: math.exp(log_w(y) - c), lo, hi, **kw)[0]
    return (num / den - z) / s


@pytest.mark.parametrize("alpha, beta, a, b, eps", [
    (1.0, 1.0, 0.0, 0.0, 1.0),
    (0.5, 2.0, 1.0, -0.5, 1.0),
    (1.5, 0.8, -0.3, 0.7, 0.4),
])
def test_drift_matches_quadrature(alpha, beta, a, b, eps):
    br = one_d(alpha, beta, eps, a, b)
    for t, z in [(0.5, 1.0), (0.0, -0.3), (0.9, 2.0)]:
        want = quadrature_drift(br, t, z)
        assert oracle_drift(br, t, [z])[0] == pytest.approx(want, abs=1e-8)


def test_reversal_keeps_1d_cross_covariance():
    br = one_d(1.2, 0.6, 0.9, 0.4, -0.2)
    rev = reversed_bridge(br)
    assert rev.cross_cov[0, 0] == pytest.approx(br.cross_cov[0, 0], rel=1e-12)


def test_marginal_endpoints_exact():
    A, B = random_spd(3, 3), random_spd(3, 4)
    src = GaussianParams(np.array([1.0, 2.0, 3.0]), A)
    tgt = GaussianParams(np.array([-1.0, 0.0, 0.5]), B)
    br = gaussian_bridge(src, tgt, 1.0)
    assert np.array_equal(oracle_marginal(br, 0.0).mean, src.mean)
    assert np.array_equal(oracle_marginal(br, 1.0).mean, tgt.mean)
    assert np.allclose(oracle_marginal(br, 0.0).cov, A, atol=1e-12)
    assert np.allclose(oracle_marginal(br, 1.0).cov, B, atol=1e-12)
    # the formula itself also lands on the endpoints
    m, S = br.marginal(1.0)
    assert np.allclose(S, B, atol=1e-12) and np.allclose(m, tgt.mean, atol=1e-15)


def test_singular_time():
    with pytest.raises(ValueError):
        oracle_drift(one_d(1, 1, 1), 1.0, [0.0])
    with pytest.raises(ValueError):
        oracle_marginal(one_d(1, 1, 1), 1.5)


def simulate_affine_1d(br, t_end, steps, paths, seed):
    rng = np.random.default_rng(seed)
    x = br.source.mean[0] + math.sqrt(br.source.cov[0, 0]) * rng.standard_normal(paths)
    eta = t_end / steps
    for k in range(steps):
        G, h = br.drift_coefficients(k * eta)
        x = x + eta * (G[0, 0] * x + h[0]) + math.sqrt(eta * br.eps) * rng.standard_normal(paths)
    return x


@pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
def test_fine_step_simulation_reproduces_marginal(t):
    br = one_d(1.0, 1.0, 1.0) if t == 0.5 else one_d(0.7, 1.6, 1.0, 0.5, -1.0)
    paths = 1_000_000
    x = simulate_affine_1d(br, t, int(2000 * t / 0.5), paths, seed=int(t * 100))
    m = oracle_marginal(br, t)
    mu, var = m.mean[0], m.cov[0, 0]
    se_mean = math.sqrt(var / paths)
    se_var = var * math.sqrt(2 / paths)
    # Euler bias is O(eta) ~ 2.5e-4; the SE bounds here are ~1e-3
    assert abs(x.mean() - mu) < 3 * se_mean + 5e-4
    assert abs(x.var() - var) < 3 * se_var + 5e-4


def test_sample_marginal_moments_and_determinism():
    A = random_spd(2, 5)
    br = gaussian_bridge(GaussianParams([1.0, -2.0], A), GaussianParams([0.0, 0.0], random_spd(2, 6)), 1.0)
    s0 = sample_marginal(br, 0.0, 100_000, 1).points
    sd = np.sqrt(np.diag(A))
    assert np.all(np.abs(s0.mean(axis=0) - [1.0, -2.0]) < 3 * sd / math.sqrt(100_000))
    assert np.array_equal(sample_marginal(br, 0.3, 50, 9).points, sample_marginal(br, 0.3, 50, 9).points)
    s = sample_marginal(br, 0.5, 100_000, 2).points
    cov = np.cov(s.T, bias=True)
    target = oracle_marginal(br, 0.5).cov
    assert np.linalg.norm(cov - target) / np.linalg.norm(target) < 0.05


def test_random_spd_in_range():
    M = random_spd(4, 0, 0.5, 2.0)
    vals = np.linalg.eigvalsh(M)
    assert np.all(vals >= 0.5 - 1e-12) and np.all(vals <= 2.0 + 1e-12)
    assert np.array_equal(M, random_spd(4, 0))
    assert np.allclose(sqrtm_spd(M) @ sqrtm_spd(M), M, atol=1e-12)


def test_batch_drift_matches_single():
    br = benchmark_bridge(3, 1.0, 0)
    Z = np.random.default_rng(0).normal(size=(10, 3))
    B = oracle_drift_batch(br, 0.4, Z)
    for z, row in zip(Z, B):
        assert np.allclose(oracle_drift(br, 0.4, z), row, atol=1e-13)


def test_oracle_vs_oracle_mse_is_zero():
    br = benchmark_bridge(2, 1.0, 3)
    assert drift_mse(br, br, 0.5, 1000, 0) == 0.0


def test_empirical_drift_close_to_oracle():
    src = GaussianParams([0.0], [[1.0]])
    tgt = GaussianParams([0.5], [[2.0]])
    br = gaussian_bridge(src, tgt, 1.0)
    X, Y = src.sample(4096, 1), tgt.sample(4096, 2)
    model = from_potentials(fit(X, Y, SolverConfig(eps=1.0)), X, Y)
    assert abs(drift(model, 0.3, [0.7])[0] - oracle_drift(br, 0.3, [0.7])[0]) < 0.05


def test_mse_consistent_under_more_mc_points():
    br = benchmark_bridge(1, 1.0, 0)
    X, Y = br.source.sample(256, 1), br.target.sample(256, 2)
    model = from_potentials(fit(X, Y, SolverConfig(eps=1.0)), X, Y)
    t = 0.5
    Z = sample_marginal(br, t, 20_000, 5).points
    err = ((drift_batch(model, t, Z) - oracle_drift_batch(br, t, Z)) ** 2).sum(axis=1)
    se = err.std() / math.sqrt(len(err))
    assert abs(drift_mse(model, br, t, 10_000, 5) - err.mean()) < 3 * se


def test_mse_experiment_shape_and_determinism(tmp_path):
    kw = dict(dim=1, eps=1.0, n_grid=[32, 64], tau_grid=[0.2, 0.5], trials=2, n_mc=500, seed=3)
    rows = mse_experiment(**kw)
    assert len(rows) == 2 * 2 * 2
    assert rows == mse_experiment(**kw)
    write_mse_csv(rows, tmp_path / "m.csv")
    text = (tmp_path / "m.csv").read_text().splitlines()
    assert text[0] == "n,tau,trial,mse" and len(text) == 9
    with pytest.raises(ValueError):
        mse_experiment(1, 1.0, [8], [1.0], 1, 10, 0)


def test_summaries_and_slopes():
    rows = [MSERow(n, 0.5, k, 3.0 / n * (1 + 0.1 * k)) for n in (10, 100, 1000) for k in range(3)]
    cells = summarize(rows)
    assert [c["n"] for c in cells] == [10, 100, 1000]
    assert cells[0]["median"] == pytest.approx(0.3 * 1.1)
    assert loglog_slopes(rows)[0.5] == pytest.approx(-1.0, abs=1e-12)
