import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from genreplay.linalg import (
    DegenerateVectorError,
    cosine_distance,
    energy_basis,
    numerical_rank,
    project,
    svd,
)


def _orthonormal_cols(q, tol=1e-8):
    return np.abs(q.T @ q - np.eye(q.shape[1])).max() <= tol


def test_identity_singular_values():
    res = svd(np.eye(2))
    np.testing.assert_array_equal(res.singular_values, [1.0, 1.0])


def test_diagonal_with_negative_entry():
    res = svd(np.diag([3.0, -2.0]))
    np.testing.assert_allclose(res.singular_values, [3.0, 2.0], atol=1e-14)
    np.testing.assert_allclose(res.reconstruct(), np.diag([3.0, -2.0]), atol=1e-14)


def test_random_5x3_reconstruction():
    a = np.random.default_rng(0).standard_normal((5, 3))
    res = svd(a)
    assert res.left.shape == (5, 3) and res.right.shape == (3, 3)
    assert np.linalg.norm(a - res.reconstruct()) <= 1e-8 * np.linalg.norm(a)


@pytest.mark.parametrize("shape", [(20, 20), (20, 3), (3, 20), (1, 7), (7, 1), (600, 65)])
def test_svd_against_numpy(shape):
    a = np.random.default_rng(sum(shape)).standard_normal(shape)
    res = svd(a)
    k = min(shape)
    assert res.singular_values.shape == (k,)
    np.testing.assert_allclose(res.singular_values, np.linalg.svd(a, compute_uv=False), rtol=1e-10, atol=1e-12)
    assert _orthonormal_cols(res.left) and _orthonormal_cols(res.right)
    assert np.linalg.norm(a - res.reconstruct()) <= 1e-8 * np.linalg.norm(a)


def test_rank_deficient_keeps_orthonormal_factors():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((8, 2)) @ rng.standard_normal((2, 6))
    res = svd(a)
    assert numerical_rank(res.singular_values, a.shape) == 2
    assert _orthonormal_cols(res.left) and _orthonormal_cols(res.right)
    assert np.linalg.norm(a - res.reconstruct()) <= 1e-8 * np.linalg.norm(a)


def test_equal_singular_values_keep_column_order():
    res = svd(np.diag([2.0, 2.0, 1.0]))
    np.testing.assert_allclose(np.abs(res.left[:, 0]), [1, 0, 0], atol=1e-14)
    np.testing.assert_allclose(np.abs(res.left[:, 1]), [0, 1, 0], atol=1e-14)


def test_zero_matrix():
    res = svd(np.zeros((4, 3)))
    np.testing.assert_array_equal(res.singular_values, 0.0)
    assert _orthonormal_cols(res.left) and _orthonormal_cols(res.right)


@pytest.mark.parametrize("bad", [np.array([[1.0, np.nan]]), np.array([[np.inf, 0.0]]), np.zeros((0, 3)), np.ones(3)])
def test_svd_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        svd(bad)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 20)),
              elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)))
def test_svd_properties(a):
    res = svd(a)
    s = res.singular_values
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    assert _orthonormal_cols(res.left) and _orthonormal_cols(res.right)
    assert np.linalg.norm(a - res.reconstruct()) <= 1e-8 * max(np.linalg.norm(a), 1e-300)


# energy_basis


def test_energy_diag_example():
    b = energy_basis(np.diag([3.0, 2.0, 1.0]), 0.9)
    assert b.shape == (3, 2)  # 13/14 >= 0.9 > 9/14


def test_energy_rank_one():
    a = np.outer([1.0, 2.0, 3.0], [4.0, -1.0])
    assert energy_basis(a, 0.5).shape[1] == 1
    assert energy_basis(a, 1.0).shape[1] == 1


def test_energy_full_equals_numerical_rank():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 8))
    assert energy_basis(a, 1.0).shape[1] == np.linalg.matrix_rank(a) == 3


def test_energy_zero_matrix_is_empty_basis():
    assert energy_basis(np.zeros((4, 5)), 0.9).shape == (4, 0)


@pytest.mark.parametrize("energy", [0.0, -0.1, 1.01])
def test_energy_out_of_range(energy):
    with pytest.raises(ValueError):
        energy_basis(np.eye(2), energy)


def _hand_cutoff(s, energy):
    total = float(np.sum(s ** 2))
    running = 0.0
    for k, v in enumerate(s, start=1):
        running += v * v
        if running >= energy * total:
            return k
    return len(s)


@pytest.mark.parametrize("trial", range(20))
def test_energy_matches_hand_cutoff(trial):
    rng = np.random.default_rng(100 + trial)
    m, n = rng.integers(2, 12, size=2)
    energy = float(rng.uniform(0.3, 0.99))
    a = rng.standard_normal((m, n)) * rng.uniform(0.1, 5.0, size=n)
    s = np.linalg.svd(a, compute_uv=False)
    basis = energy_basis(a, energy)
    assert basis.shape == (m, _hand_cutoff(s, energy))
    assert _orthonormal_cols(basis)
    # the kept columns are the leading left singular space
    u = np.linalg.svd(a)[0][:, : basis.shape[1]]
    np.testing.assert_allclose(basis @ basis.T, u @ u.T, atol=1e-8)


# project


def test_project_examples():
    e1 = np.array([[1.0], [0.0]])
    np.testing.assert_array_equal(project([3.0, 4.0], e1), [3.0, 0.0])
    np.testing.assert_allclose(project([5.0, 0.0], e1), [5.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(project([0.0, 2.0], e1), [0.0, 0.0], atol=1e-10)


def test_project_empty_basis_and_mismatch():
    np.testing.assert_array_equal(project([1.0, 2.0, 3.0], np.zeros((3, 0))), np.zeros(3))
    with pytest.raises(ValueError):
        project([1.0, 2.0], np.eye(3)[:, :1])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12), st.integers(0, 12))
def test_projection_idempotent_and_complement_orthogonal(seed, m, k):
    rng = np.random.default_rng(seed)
    k = min(k, m)
    basis = np.linalg.qr(rng.standard_normal((m, m)))[0][:, :k]
    v = rng.standard_normal(m) * 10
    p = project(v, basis)
    assert np.abs(project(p, basis) - p).max() <= 1e-10
    assert abs(p @ (v - p)) <= 1e-10 * max(v @ v, 1.0)


# cosine distance


def test_cosine_examples():
    assert cosine_distance([2.0, 1.0], [2.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
    assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == 2.0


def test_cosine_degenerate_and_mismatch():
    with pytest.raises(DegenerateVectorError):
        cosine_distance([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        cosine_distance([1.0, 0.0], [1.0, 0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_cosine_symmetric_and_scale_invariant(seed, alpha):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(5), rng.standard_normal(5)
    d = cosine_distance(a, b)
    assert 0.0 <= d <= 2.0
    assert abs(d - cosine_distance(b, a)) <= 1e-12
    assert abs(d - cosine_distance(alpha * a, b)) <= 1e-12
