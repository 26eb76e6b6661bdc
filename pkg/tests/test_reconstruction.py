import numpy as np
import pytest

from sensorsel.errors import IllConditionedError, ValidationError
from sensorsel.harness import synthetic_snapshots
from sensorsel.pod import compute_pod, truncation_error
from sensorsel.reconstruction import (Measurement, NoiseModel, estimate_state, estimation_error,
                                      reconstruct_field, reconstruct_snapshots, verify_error_covariance)
from sensorsel.selection import select_dg, select_qd


@pytest.fixture
def basis(rng):
    q, _ = np.linalg.qr(rng.standard_normal((40, 5)))
    return q


def test_square_exact(basis, rng):
    s = select_qd(basis, 5)
    x = rng.standard_normal(5)
    np.testing.assert_allclose(estimate_state(basis, s, basis[s.indices] @ x), x, rtol=1e-9)


def test_overdetermined_exact(basis, rng):
    s = select_dg(basis, 12)
    x = rng.standard_normal(5)
    y = Measurement(basis[s.indices] @ x, s)
    np.testing.assert_allclose(estimate_state(basis, s, y), x, rtol=1e-9)


def test_underdetermined_min_norm(basis, rng):
    s = select_dg(basis, 3)
    c = basis[s.indices]
    x = rng.standard_normal(5)
    y = c @ x
    xh = estimate_state(basis, s, y)
    np.testing.assert_allclose(c @ xh, y, atol=1e-9)
    np.testing.assert_allclose(xh, np.linalg.pinv(c) @ y, atol=1e-9)
    assert np.linalg.norm(xh) <= np.linalg.norm(x) + 1e-12


def test_branch_consistency(basis, rng):
    s = select_dg(basis, 5)
    c = basis[s.indices]
    y = rng.standard_normal(5)
    a = c.T @ np.linalg.solve(c @ c.T, y)
    b = np.linalg.solve(c.T @ c, c.T @ y)
    np.testing.assert_allclose(a, b, rtol=1e-9)
    np.testing.assert_allclose(estimate_state(basis, s, y), a, rtol=1e-9)


def test_ill_conditioned():
    u = np.array([[1.0, 0.0], [1.0, 1e-9], [0.0, 1.0]])
    with pytest.raises(IllConditionedError):
        estimate_state(u, [0, 1], [1.0, 1.0])


def test_reconstruct_field(basis, rng):
    assert np.all(reconstruct_field(basis, np.zeros(5)) == 0)
    np.testing.assert_array_equal(reconstruct_field(basis, np.eye(5)[0]), basis[:, 0])
    x = rng.standard_normal(40)
    s = select_dg(basis, 9)
    np.testing.assert_allclose(reconstruct_field(basis, estimate_state(basis, s, (basis @ (basis.T @ x))[s.indices])),
                               basis @ (basis.T @ x), atol=1e-8)
    with pytest.raises(ValidationError):
        reconstruct_field(basis, np.zeros(4))


def test_estimation_error_trivial(rng):
    x = rng.standard_normal((6, 4))
    assert estimation_error(x, x) == 0.0
    assert estimation_error(x, np.zeros_like(x)) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        estimation_error(np.zeros((3, 2)), np.zeros((3, 2)))
    x[:, 0] = 0
    with pytest.warns(RuntimeWarning):
        estimation_error(x, x)


def test_estimation_error_independent_oracle():
    data = synthetic_snapshots(200, 60, 10, 0.01, seed=3)
    b = compute_pod(data, 10)
    s = select_qd(b, 10)
    e = estimation_error(data, reconstruct_snapshots(b, s, data))
    x = data.data
    u = b.modes
    c = u[s.indices]
    errs = [np.sum((x[:, j] - u @ np.linalg.solve(c, x[s.indices, j])) ** 2) / np.sum(x[:, j] ** 2)
            for j in range(x.shape[1])]
    assert e == pytest.approx(np.mean(errs), rel=0.05)


def test_full_observation_baseline(rng):
    x = rng.standard_normal((30, 20))
    b = compute_pod(x, 6)
    u = b.modes
    assert abs(estimation_error(x, u @ (u.T @ x)) - truncation_error(x, b)) <= 1e-12


def test_covariance_sigma_zero(basis):
    rep = verify_error_covariance(basis, select_dg(basis, 8), NoiseModel(0.0), 200)
    assert np.all(rep.empirical == 0)
    assert rep.unbiased


def test_covariance_monte_carlo(rng):
    u = rng.standard_normal((40, 4))
    s = select_dg(u, 8)
    rep = verify_error_covariance(u, s, NoiseModel(0.1), 10_000, seed=2)
    assert rep.distance <= 0.05
    assert rep.unbiased
    rep2 = verify_error_covariance(u, s, NoiseModel(0.2), 10_000, seed=2)
    np.testing.assert_allclose(rep2.empirical, 4 * rep.empirical, rtol=1e-12)


def test_covariance_preconditions(basis):
    with pytest.raises(ValidationError):
        verify_error_covariance(basis, select_dg(basis, 5), NoiseModel(0.1))
    with pytest.raises(ValidationError):
        verify_error_covariance(basis, select_dg(basis, 8), NoiseModel(0.1), draws=50)
    with pytest.raises(ValidationError):
        NoiseModel(-1.0)


def test_centered_reconstruction(rng):
    q, _ = np.linalg.qr(rng.standard_normal((30, 3)))
    x = q @ rng.standard_normal((3, 15)) + 2.0
    b = compute_pod(x, 3, center=True)
    s = select_qd(b, 3)
    # centered data lies in a 3-dim affine subspace: exact recovery
    assert estimation_error(x, reconstruct_snapshots(b, s, x)) <= 1e-20
