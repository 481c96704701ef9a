import math

import numpy as np
import pytest

from furthest.core import DimensionMismatchError, SparseVector, VectorDataset, make_rng
from furthest.lsh import (
    ConcatenatedHash,
    HashAtom,
    Sensitivity,
    collision_probability,
    hash_dataset,
    hash_point,
    sensitivity_for,
)


def test_collision_probability_limits():
    assert collision_probability(1e-6, 1.0) == pytest.approx(1.0, abs=1e-5)
    assert collision_probability(1e6, 1.0) == pytest.approx(0.0, abs=1e-5)
    vals = [collision_probability(s, 4.0) for s in np.linspace(0.1, 40, 50)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        collision_probability(0.0, 1.0)
    with pytest.raises(ValueError):
        collision_probability(1.0, -1.0)


def _empirical_collision(s, width, trials, seed, d=3):
    rng = make_rng(seed)
    g = ConcatenatedHash.sample(trials, d, width, rng)
    x = rng.standard_normal(d)
    u = rng.standard_normal(d)
    y = x + s * u / np.linalg.norm(u)
    return float(np.mean(np.array(hash_point(g, x)) == np.array(hash_point(g, y))))


def test_collision_probability_monte_carlo_at_width():
    emp = _empirical_collision(4.0, 4.0, 10**6, seed=21)
    assert abs(emp - collision_probability(4.0, 4.0)) < 0.005


def test_sensitivity_golden():
    s = sensitivity_for(1, 2, 2, 4)
    # 40-digit evaluation of the closed form at distances 2 and 4, width 4
    assert s.p1 == pytest.approx(0.6095484222153970, rel=1e-13)
    assert s.p2 == pytest.approx(0.3687463803725072, rel=1e-13)
    assert s.rho == pytest.approx(0.4962048607113523, rel=1e-12)
    assert (s.r1, s.r2) == (2, 4)
    assert abs(_empirical_collision(2.0, 4.0, 200_000, seed=5) - s.p1) < 0.01
    assert abs(_empirical_collision(4.0, 4.0, 200_000, seed=6) - s.p2) < 0.01


def test_sensitivity_shape():
    for width in (0.5, 4.0, 20.0):
        s = sensitivity_for(1.0, 2.0, 2.0, width)
        assert s.p1 > s.p2 and s.rho < 1
    rhos = [sensitivity_for(1.0, 2.0, c, 8.0).rho for c in (1.2, 1.5, 2.0, 3.0, 5.0)]
    assert all(a > b for a, b in zip(rhos, rhos[1:]))
    with pytest.raises(ValueError):
        Sensitivity(1, 2, 0.3, 0.5)
    with pytest.raises(ValueError):
        sensitivity_for(1.0, 1.0, 2.0, 4.0)


def test_hash_floor_example():
    atom = HashAtom(np.array([1.0, 0.0, 0.0]), 0.0, 1.0)
    assert atom([2.7, 5.0, -1.0]) == 2
    g = ConcatenatedHash(np.array([[1.0, 0.0, 0.0]]), np.array([0.0]), 1.0)
    assert hash_point(g, [2.7, 5.0, -1.0]) == (2,)
    assert hash_point(g, [-0.1, 0.0, 0.0]) == (-1,)


def test_aligned_step_changes_one_component():
    width = 2.5
    g = ConcatenatedHash(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), np.array([0.3, 1.1]), width)
    x = np.array([0.4, -3.2, 7.0])
    kx = hash_point(g, x)
    ky = hash_point(g, x + width * np.array([1.0, 0.0, 0.0]))
    assert ky[0] - kx[0] == 1 and ky[1] == kx[1]


def test_equal_points_equal_keys_and_dataset_path():
    rng = make_rng(2)
    g = ConcatenatedHash.sample(6, 4, 1.5, rng)
    pts = rng.standard_normal((30, 4))
    ds = VectorDataset(np.vstack([pts, pts[:3]]))
    keys = hash_dataset(g, ds)
    assert keys.shape == (33, 6)
    for i in range(33):
        assert tuple(keys[i].tolist()) == hash_point(g, ds.point(i))
    assert np.array_equal(keys[:3], keys[30:])


def test_sparse_point_hash_matches_dense():
    rng = make_rng(3)
    g = ConcatenatedHash.sample(5, 6, 2.0, rng)
    x = np.array([0.0, 1.5, 0.0, -2.0, 0.0, 0.25])
    assert hash_point(g, SparseVector.from_dense(x)) == hash_point(g, x)


def test_hash_validation():
    g = ConcatenatedHash.sample(2, 3, 1.0, make_rng(0))
    with pytest.raises(DimensionMismatchError):
        hash_point(g, [1.0, 2.0])
    with pytest.raises(ValueError):
        ConcatenatedHash(np.ones((2, 3)), np.array([0.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        HashAtom(np.ones(3), 0.0, 0.0)
    assert g.k == 2 and g.dim == 3 and len(g.atoms) == 2


def test_no_key_truncation():
    g = ConcatenatedHash(np.eye(3), np.zeros(3), 1.0)
    a, b = hash_point(g, [0.5, 0.5, 0.5]), hash_point(g, [0.5, 0.5, 1.5])
    assert a != b and a[:2] == b[:2]
    assert math.isclose(collision_probability(1.0, 1.0), 1 - 2 * 0.5 * math.erfc(1 / math.sqrt(2))
                        - 2 / math.sqrt(2 * math.pi) * (1 - math.exp(-0.5)))
