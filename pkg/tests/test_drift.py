import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import nnls

from oracles import fd_jacobian, mp_drift, power_iteration_norm
from sinkhorn_bridge.data import SampleSet
from sinkhorn_bridge.drift import (
    BridgeModel,
    barycentric_map,
    barycentric_map_batch,
    drift,
    drift_batch,
    follmer_model,
    from_potentials,
    lipschitz_bound,
    weights,
)
from sinkhorn_bridge.errors import DimensionError
from sinkhorn_bridge.gaussian import (
    GaussianParams,
    drift_mse,
    gaussian_bridge,
    reversed_bridge,
)
from sinkhorn_bridge.sinkhorn import PotentialPair, SolverConfig, fit


def five_atom_model(eps=0.7):
    rng = np.random.default_rng(42)
    return BridgeModel(rng.normal(size=(5, 2)), rng.normal(size=5), eps)


def test_single_atom_weight_and_drift():
    Y = np.array([0.3, -1.2])
    m = BridgeModel(Y[None, :], [4.0], 0.5)
    for t, z in [(0.0, [1.0, 1.0]), (0.6, [-3.0, 2.0]), (0.99, [0.0, 0.0])]:
        assert np.array_equal(weights(m, t, z).weights, [1.0])
        assert np.array_equal(barycentric_map(m, t, z), Y)
        expected = (Y - np.array(z)) / (1 - t)
        assert np.allclose(drift(m, t, z), expected, rtol=1e-15, atol=1e-15)


def test_symmetric_pair_gives_midpoint_and_zero_drift():
    m = BridgeModel(np.array([[-1.0, 0.0], [1.0, 0.0]]), [0.3, 0.3], 1.0)
    z = np.array([0.0, 2.0])
    assert np.allclose(weights(m, 0.4, z).weights, [0.5, 0.5], atol=1e-15)
    assert np.allclose(barycentric_map(m, 0.4, z), [0.0, 0.0], atol=1e-15)
    assert np.allclose(drift(m, 0.4, [0.0, 0.0]), 0.0, atol=1e-15)


def test_weights_shift_invariant():
    m = five_atom_model()
    shifted = BridgeModel(m.atoms, m.potential + 17.3, m.eps)
    z = [0.2, -0.4]
    assert np.allclose(weights(m, 0.3, z).weights, weights(shifted, 0.3, z).weights, atol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.3, 0.9, 0.999])
def test_drift_matches_extended_precision_formula(t):
    m = five_atom_model()
    rng = np.random.default_rng(int(t * 1000))
    for z in rng.normal(scale=2.0, size=(5, 2)):
        want = mp_drift(m.atoms, m.potential, m.eps, t, z)
        got = drift(m, t, z)
        assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, np.max(np.abs(want)))


@pytest.mark.parametrize("c", [-100.0, 1.0, 1e6])
def test_potential_shift_invariance(c):
    m = five_atom_model()
    moved = BridgeModel(m.atoms, m.potential + c, m.eps)
    rng = np.random.default_rng(1)
    for t in (0.0, 0.5, 0.95):
        Z = rng.normal(size=(20, 2))
        a, b = drift_batch(m, t, Z), drift_batch(moved, t, Z)
        assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


def test_batch_equals_loop_and_permutes():
    m = five_atom_model()
    Z = np.random.default_rng(2).normal(size=(64, 2))
    B = drift_batch(m, 0.4, Z)
    loop = np.array([drift(m, 0.4, z) for z in Z])
    assert np.max(np.abs(B - loop)) <= 1e-12
    perm = np.random.default_rng(3).permutation(64)
    assert np.array_equal(drift_batch(m, 0.4, Z[perm]), B[perm])
    assert np.array_equal(drift_batch(m, 0.4, Z[:1])[0], drift(m, 0.4, Z[0]))


def test_batch_rows_independent_of_batch_composition():
    rng = np.random.default_rng(4)
    m = BridgeModel(rng.normal(size=(3000, 2)), rng.normal(size=3000), 0.2)
    Z = rng.normal(size=(100, 2))
    full = drift_batch(m, 0.5, Z)
    assert np.array_equal(full[37], drift(m, 0.5, Z[37]))
    assert np.array_equal(full[50:], drift_batch(m, 0.5, Z[50:]))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    t=st.floats(0.0, 0.999),
    eps=st.sampled_from([0.01, 0.1, 1.0]),
    dim=st.sampled_from([1, 2]),
)
def test_barycenter_in_convex_hull(seed, t, eps, dim):
    rng = np.random.default_rng(seed)
    atoms = rng.normal(size=(7, dim))
    m = BridgeModel(atoms, rng.normal(size=7), eps)
    z = rng.normal(scale=3.0, size=dim)
    p = barycentric_map(m, t, z)
    # distance to hull: min ||atoms' w - p|| over the simplex, via NNLS with a heavy sum row
    A = np.vstack([atoms.T, 1e4 * np.ones(7)])
    _, resid = nnls(A, np.concatenate([p, [1e4]]))
    assert resid <= 1e-8


def test_nearest_atom_limit():
    rng = np.random.default_rng(5)
    m = BridgeModel(rng.normal(size=(6, 2)), rng.normal(size=6), 0.5)
    for z in rng.normal(size=(10, 2)):
        d = np.linalg.norm(m.atoms - z, axis=1)
        nearest = m.atoms[np.argmin(d)]
        assert np.max(np.abs(barycentric_map(m, 1 - 1e-9, z) - nearest)) <= 1e-6


def test_singular_time_rejected():
    m = five_atom_model()
    for t in (1.0, 1.5):
        with pytest.raises(ValueError):
            drift(m, t, [0.0, 0.0])
        with pytest.raises(ValueError):
            lipschitz_bound(m, t)
    with pytest.raises(ValueError):
        drift(m, -0.1, [0.0, 0.0])


def test_wrong_point_dimension():
    with pytest.raises(DimensionError):
        drift_batch(five_atom_model(), 0.1, np.zeros((3, 3)))


def test_follmer_potential_literals():
    assert np.array_equal(follmer_model(SampleSet(np.zeros((1, 2))), 1.0).potential, [0.0])
    assert follmer_model(SampleSet(np.array([[3.0, 4.0]])), 1.0).potential[0] == 12.5


def test_follmer_drift_matches_explicit_form():
    rng = np.random.default_rng(6)
    Y = rng.normal(size=(9, 2))
    eps = 0.8
    m = follmer_model(SampleSet(Y), eps)
    for _ in range(20):
        t, z = rng.uniform(0, 0.95), rng.normal(size=2)
        s = 1 - t
        logits = (Y @ z - 0.5 * t * (Y**2).sum(1)) / (s * eps)
        w = np.exp(logits - logits.max())
        w /= w.sum()
        want = (w @ Y - z) / s
        assert np.allclose(drift(m, t, z), want, rtol=1e-12, atol=1e-12)


def test_lipschitz_literals():
    one = BridgeModel(np.array([[1.0, 0.0]]), [0.0], 1.0)
    assert lipschitz_bound(one, 0.0, R=1.0) == 1.0
    assert lipschitz_bound(one, 0.5, R=2.0) == 16.0
    assert lipschitz_bound(one, 0.0) == 1.0  # R defaults to the atom radius


@pytest.mark.parametrize("eps", [0.1, 1.0])
def test_fd_jacobian_below_bound(eps):
    rng = np.random.default_rng(7)
    atoms = rng.uniform(-1, 1, size=(12, 2))
    m = BridgeModel(atoms, rng.normal(size=12), eps)
    for _ in range(50):
        t = rng.uniform(0, 0.9)
        z = rng.normal(size=2)
        J = fd_jacobian(lambda v: drift(m, t, v), z, h=1e-6)
        assert power_iteration_norm(J) <= lipschitz_bound(m, t) * (1 + 1e-6)


def test_stress_small_eps_stays_finite():
    rng = np.random.default_rng(8)
    m = BridgeModel(rng.normal(scale=5, size=(200, 2)), rng.normal(scale=50, size=200), 0.01)
    Z = rng.normal(scale=10, size=(500, 2))
    for t in (0.0, 0.5, 0.999999):
        out = drift_batch(m, t, Z)
        assert np.all(np.isfinite(out))


def test_from_potentials_directions():
    rng = np.random.default_rng(9)
    X, Y = SampleSet(rng.normal(size=(6, 2))), SampleSet(rng.normal(size=(4, 2)))
    pair = fit(X, Y, SolverConfig(eps=0.5))
    fwd = from_potentials(pair, X, Y, "forward")
    bwd = from_potentials(pair, X, Y, "backward")
    assert np.array_equal(fwd.atoms, Y.points) and np.array_equal(fwd.potential, pair.g)
    assert np.array_equal(bwd.atoms, X.points) and np.array_equal(bwd.potential, pair.f)
    with pytest.raises(ValueError):
        from_potentials(pair, X, Y, "sideways")
    with pytest.raises(DimensionError):
        from_potentials(pair, Y, X)


def test_symmetric_instance_forward_equals_backward():
    S = SampleSet(np.random.default_rng(10).normal(size=(10, 2)))
    pair = fit(S, S, SolverConfig(eps=0.3, tol=1e-12))
    fwd = from_potentials(pair, S, S, "forward")
    bwd = from_potentials(pair, S, S, "backward")
    gauge = np.mean(fwd.potential - bwd.potential)
    z = np.array([0.1, 0.2])
    assert np.allclose(fwd.potential - gauge, bwd.potential, atol=1e-9)
    assert np.allclose(drift(fwd, 0.3, z), drift(bwd, 0.3, z), atol=1e-9)


def test_unconverged_potentials_warn(caplog):
    X = SampleSet(np.zeros((2, 1)) + [[0.0], [1.0]])
    pair = PotentialPair(np.zeros(2), np.zeros(2), 1.0, 1, 0.5, False)
    with caplog.at_level("WARNING"):
        from_potentials(pair, X, X)
    assert "unconverged" in caplog.text


def test_backward_drift_matches_reversed_oracle():
    src = GaussianParams(np.array([0.5]), np.array([[1.0]]))
    tgt = GaussianParams(np.array([-0.3]), np.array([[1.8]]))
    bridge = gaussian_bridge(src, tgt, 1.0)
    X, Y = src.sample(2000, 1), tgt.sample(2000, 2)
    pair = fit(X, Y, SolverConfig(eps=1.0))
    fwd = drift_mse(from_potentials(pair, X, Y, "forward"), bridge, 0.5, 4000, 3)
    bwd = drift_mse(from_potentials(pair, X, Y, "backward"), reversed_bridge(bridge), 0.5, 4000, 3)
    assert fwd < 0.02 and bwd < 0.02
    assert 0.1 < bwd / fwd < 10


def test_model_json_round_trip(tmp_path):
    m = five_atom_model()
    m.save(tmp_path / "m.json")
    back = BridgeModel.load(tmp_path / "m.json")
    assert np.array_equal(back.atoms, m.atoms) and np.array_equal(back.potential, m.potential)
    assert back.eps == m.eps


def test_barycentric_batch_empty_rows():
    m = five_atom_model()
    assert barycentric_map_batch(m, 0.2, np.zeros((0, 2))).shape == (0, 2)
