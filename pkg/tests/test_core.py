import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from furthest.core import (
    DimensionMismatchError,
    SparseVector,
    VectorDataset,
    derive_seed,
    dot,
    l2_distance,
    make_rng,
    sample_gaussian_matrix,
    sample_gaussian_vector,
    sample_unit_matrix,
    sample_unit_vector,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def vec_pair(draw_dim=st.integers(1, 8)):
    return draw_dim.flatmap(
        lambda d: st.tuples(st.lists(finite, min_size=d, max_size=d), st.lists(finite, min_size=d, max_size=d))
    )


# --- dot / distance examples -------------------------------------------------


def test_dot_basis_projection():
    assert dot([1, 0, 0], [3, 4, 5]) == 3


def test_dot_squared_norm():
    assert dot([3, 4], [3, 4]) == 25


def test_dot_sparse_dense():
    s = SparseVector.from_pairs([(1, 2.0), (5, -1.0)], dim=6)
    assert dot(s, np.array([0, 3, 0, 0, 0, 4.0])) == 2.0
    assert dot(np.array([0, 3, 0, 0, 0, 4.0]), s) == 2.0


def test_dot_sparse_sparse():
    a = SparseVector.from_pairs([(0, 1.0), (3, 2.0)], dim=5)
    b = SparseVector.from_pairs([(3, 4.0), (4, 7.0)], dim=5)
    assert dot(a, b) == 8.0


def test_distance_examples():
    assert l2_distance([0, 0], [3, 4]) == 5
    assert l2_distance([1.5, -2], [1.5, -2]) == 0
    assert l2_distance([1, 1, 1], [2, 3, 4]) == pytest.approx(math.sqrt(14), abs=1e-12)
    assert l2_distance([1, 1, 1], [2, 3, 4]) == pytest.approx(3.74166, abs=1e-5)


def test_distance_sparse_matches_dense():
    a = SparseVector.from_pairs([(2, 1.0), (0, -3.0)], dim=4)
    b = np.array([1.0, 0.0, 1.0, 2.0])
    assert l2_distance(a, b) == pytest.approx(l2_distance(a.to_dense(), b), abs=1e-15)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        dot([1, 2], [1, 2, 3])
    with pytest.raises(DimensionMismatchError):
        l2_distance(SparseVector.from_pairs([], 3), [1.0, 2.0])


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        dot([math.nan], [1.0])
    with pytest.raises(ValueError):
        SparseVector(np.array([0]), np.array([math.inf]), 2)


@settings(max_examples=200, deadline=None)
@given(vec_pair())
def test_dot_symmetric(pair):
    x, y = pair
    assert dot(x, y) == dot(y, x)


@settings(max_examples=200, deadline=None)
@given(vec_pair())
def test_distance_symmetric_nonnegative(pair):
    x, y = pair
    d = l2_distance(x, y)
    assert d >= 0
    assert d == l2_distance(y, x)
    assert l2_distance(x, x) == 0


@settings(max_examples=100, deadline=None)
@given(vec_pair())
def test_distance_matches_numpy(pair):
    x, y = pair
    ref = float(np.linalg.norm(np.array(x) - np.array(y)))
    assert l2_distance(x, y) == pytest.approx(ref, rel=1e-12, abs=1e-9)


# --- sparse vectors ----------------------------------------------------------


def test_sparse_canonicalization():
    s = SparseVector.from_pairs([(4, 1.0), (1, 2.0), (4, 3.0), (2, 0.0)], dim=5)
    assert s.indices.tolist() == [1, 4]
    assert s.values.tolist() == [2.0, 3.0]
    assert s == SparseVector.from_dense([0, 2.0, 0, 0, 3.0])
    assert hash(s) == hash(SparseVector.from_dense([0, 2.0, 0, 0, 3.0]))


def test_sparse_invariants_enforced():
    with pytest.raises(ValueError):
        SparseVector(np.array([2, 1]), np.array([1.0, 1.0]), 3)
    with pytest.raises(ValueError):
        SparseVector(np.array([3]), np.array([1.0]), 3)
    with pytest.raises(ValueError):
        SparseVector(np.array([1, 1]), np.array([1.0, 1.0]), 3)


# --- sampling ----------------------------------------------------------------


def test_gaussian_determinism():
    a = sample_gaussian_vector(3, make_rng(42))
    b = sample_gaussian_vector(3, make_rng(42))
    assert np.array_equal(a, b)


def test_gaussian_seed_independence():
    assert not np.array_equal(sample_gaussian_vector(3, make_rng(1)), sample_gaussian_vector(3, make_rng(2)))
    assert not np.array_equal(sample_gaussian_vector(3, make_rng(1, 0)), sample_gaussian_vector(3, make_rng(1, 1)))


def test_gaussian_moments():
    x = sample_gaussian_vector(100_000, make_rng(7))
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.05


def test_matrix_equals_successive_vectors():
    m = sample_gaussian_matrix(4, 3, make_rng(5))
    rng = make_rng(5)
    rows = np.array([sample_gaussian_vector(3, rng) for _ in range(4)])
    assert np.array_equal(m, rows)


def test_unit_vectors():
    rng = make_rng(11)
    for d in (1, 2, 7, 50):
        v = sample_unit_vector(d, rng)
        assert abs(math.sqrt(math.fsum(v * v)) - 1.0) < 1e-12
    ones = {float(sample_unit_vector(1, rng)[0]) for _ in range(50)}
    assert ones <= {1.0, -1.0}
    assert ones == {1.0, -1.0}


def test_unit_vectors_centered():
    u = sample_unit_matrix(100_000, 5, make_rng(3))
    assert np.all(np.abs(u.mean(axis=0)) < 0.02)


def test_seed_range():
    with pytest.raises(ValueError):
        make_rng(-1)
    with pytest.raises(ValueError):
        make_rng(2**64)
    make_rng(2**64 - 1)
    s = derive_seed(3, 1, 2)
    assert 0 <= s < 2**64
    assert s == derive_seed(3, 1, 2)
    assert s != derive_seed(3, 2, 1)


# --- datasets ----------------------------------------------------------------


def test_dataset_dense_and_sparse_agree():
    rng = make_rng(0)
    dense = rng.standard_normal((6, 4))
    dense[dense < 0] = 0.0
    a = VectorDataset(dense)
    b = VectorDataset(sp.csr_matrix(dense))
    dirs = rng.standard_normal((3, 4))
    q = rng.standard_normal(4)
    assert b.is_sparse and not a.is_sparse
    np.testing.assert_allclose(a.project(dirs), b.project(dirs), atol=1e-12)
    np.testing.assert_allclose(a.distances(q), b.distances(q), atol=1e-12)
    assert b.point(2) == SparseVector.from_dense(dense[2])


def test_dataset_validation():
    with pytest.raises(ValueError):
        VectorDataset(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        VectorDataset(np.array([[1.0, math.nan]]))
    with pytest.raises(DimensionMismatchError):
        VectorDataset.from_vectors([[1.0, 2.0], [1.0]])
    ds = VectorDataset([[1.0, 2.0]])
    with pytest.raises(DimensionMismatchError):
        ds.check_query([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ds.data[0, 0] = 5.0


def test_dataset_from_mixed_vectors():
    ds = VectorDataset.from_vectors([SparseVector.from_pairs([(1, 3.0)], 3), np.array([1.0, 0, 0])])
    assert ds.is_sparse and ds.n == 2 and ds.dim == 3
    assert ds.distance(np.zeros(3), 0) == 3.0
