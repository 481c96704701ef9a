import math

import numpy as np
import pytest

from furthest import annulus
from furthest.annulus import (
    AnnulusIndex,
    AnnulusParams,
    HashTable,
    MemoryBudgetError,
    concatenation_length,
    derive_params,
    table_count,
)
from furthest.core import DimensionMismatchError, VectorDataset, dot, make_rng
from furthest.lsh import ConcatenatedHash, hash_point


def small_params(k=2, L=3, ell=4, m=10, r=1.0, w=2.0, c=2.0, width=8.0):
    return AnnulusParams(r=r, w=w, c=c, k=k, L=L, ell=ell, m=m, width=width)


def random_dataset(n, d, seed, scale=1.0):
    return VectorDataset(scale * make_rng(seed).standard_normal((n, d)))


# --- parameters --------------------------------------------------------------


def test_derive_params_golden():
    p = derive_params(10**4, r=1, w=2, c=2, width=8)
    # independent 40-digit evaluation of the same formulas
    assert (p.k, p.L, p.ell, p.m) == (19, 79, 46, 341)
    assert p.cap == 341 + 3 * 79
    assert p.sensitivity.p1 == pytest.approx(0.8005324324284999, rel=1e-13)
    assert p.sensitivity.p2 == pytest.approx(0.6095484222153970, rel=1e-13)
    assert p.sensitivity.rho == pytest.approx(0.4494174834400258, rel=1e-12)
    assert (p.inner, p.outer) == (0.25, 4.0)


def test_derive_params_default_width():
    assert derive_params(1000, r=0.5, w=3, c=2).width == 4 * 3 * 0.5


def test_table_and_concatenation_shape():
    assert table_count(10**6, 0.0, 0.8) == math.ceil(1 / 0.8)
    ks = [concatenation_length(10**4, p2) for p2 in (0.9, 0.7, 0.5, 0.1, 1e-6)]
    assert all(a >= b for a, b in zip(ks, ks[1:]))
    assert concatenation_length(10**4, 1e-6) == 1


def test_params_validation():
    with pytest.raises(ValueError):
        small_params(w=1.0)
    with pytest.raises(ValueError):
        small_params(L=0)
    with pytest.raises(ValueError):
        derive_params(1, 1, 2, 2)


# --- build -------------------------------------------------------------------


def test_bucket_membership_audit():
    ds = random_dataset(300, 5, 1, scale=3.0)
    params = small_params(k=3, L=6, ell=5, width=4.0)
    idx = AnnulusIndex.build(ds, params, seed=17)
    for pid in range(0, 300, 7):
        x = ds.point(pid)
        for j, g in enumerate(idx.hashes):
            key = hash_point(g, x)
            bucket = idx.bucket(j, key)
            assert bucket is not None
            assert pid in bucket.ids[0].tolist()
    for j, table in enumerate(idx.tables):
        sizes = np.diff(table.starts)
        assert sizes.min() >= 1 and sizes.sum() == 300
        for b in range(table.bucket_count):
            members = table.members(b)
            key = table.keys[b]
            for pid in members.tolist():
                assert hash_point(idx.hashes[j], ds.point(pid)) == tuple(key.tolist())


def test_bucket_lists_sorted_and_consistent():
    ds = random_dataset(200, 4, 2, scale=2.0)
    idx = AnnulusIndex.build(ds, small_params(k=2, L=3, ell=4, width=3.0), seed=4)
    for j, table in enumerate(idx.tables):
        for b in range(table.bucket_count):
            bucket = idx.bucket(j, table.keys[b])
            ids0 = sorted(bucket.ids[0].tolist())
            for i in range(4):
                assert sorted(bucket.ids[i].tolist()) == ids0
                assert np.all(np.diff(bucket.values[i]) <= 0)
                for v, pid in zip(bucket.values[i], bucket.ids[i]):
                    assert abs(v - dot(idx.projections[i], ds.point(int(pid)))) <= 1e-9


def test_identical_points_share_buckets():
    pts = make_rng(5).standard_normal((10, 3))
    ds = VectorDataset(np.vstack([pts, pts[4]]))
    idx = AnnulusIndex.build(ds, small_params(), seed=1)
    for j, g in enumerate(idx.hashes):
        members = idx.bucket(j, hash_point(g, ds.point(4))).ids[0].tolist()
        assert 4 in members and 10 in members


def test_single_point():
    ds = VectorDataset([[1.0, 2.0]])
    idx = AnnulusIndex.build(ds, small_params(L=4, ell=3), seed=0)
    assert len(idx.tables) == 4
    for j, table in enumerate(idx.tables):
        assert table.bucket_count == 1
        bucket = idx.bucket(j, table.keys[0])
        assert bucket.ids.shape == (3, 1)


def test_build_deterministic_and_budget():
    ds = random_dataset(50, 3, 3)
    a = AnnulusIndex.build(ds, small_params(), seed=9)
    b = AnnulusIndex.build(ds, small_params(), seed=9)
    assert all(np.array_equal(x.directions, y.directions) for x, y in zip(a.hashes, b.hashes))
    assert all(np.array_equal(x.ids, y.ids) for x, y in zip(a.tables, b.tables))
    with pytest.raises(MemoryBudgetError):
        AnnulusIndex.build(ds, small_params(L=10, ell=10), seed=0, max_entries=1000)


def test_fingerprint_collisions_are_redrawn(monkeypatch):
    real = annulus._multipliers
    calls = []

    def colliding(k, salt):
        calls.append(salt)
        return np.zeros(k, dtype=np.uint64) if salt == 0 else real(k, salt)

    monkeypatch.setattr(annulus, "_multipliers", colliding)
    keys = np.array([[0, 1], [1, 0], [0, 1], [2, 2]], dtype=np.int64)
    table = HashTable.from_keys(keys)
    assert calls == [0, 1]
    assert table.bucket_count == 3
    b = table.locate((0, 1))
    assert table.members(b).tolist() == [0, 2]
    assert table.locate((5, 5)) is None


def test_locate_rejects_unknown_key_with_same_fingerprint():
    keys = np.array([[0, 1], [3, 4]], dtype=np.int64)
    table = HashTable.from_keys(keys)
    assert table.locate((0, 1)) is not None
    assert table.locate((0, 2)) is None


# --- query -------------------------------------------------------------------


def test_soundness_on_random_data():
    ds = random_dataset(400, 4, 6, scale=2.0)
    params = small_params(k=2, L=5, ell=4, m=20, r=1.5, w=1.5, c=1.5, width=6.0)
    idx = AnnulusIndex.build(ds, params, seed=3)
    found = 0
    for q in make_rng(7).standard_normal((50, 4)):
        res = idx.query(q)
        assert res.candidates_examined <= params.cap
        if res.found:
            found += 1
            assert params.inner <= res.distance <= params.outer
            assert res.distance == ds.distance(q, res.point_id)
        else:
            assert res.status in ("cap", "exhausted")
    assert found > 0


def test_everything_inside_inner_ball_is_null():
    ds = VectorDataset(0.01 * make_rng(8).standard_normal((40, 3)))
    idx = AnnulusIndex.build(ds, small_params(L=2, ell=2, m=5), seed=2)
    res = idx.query(np.zeros(3))
    assert not res.found and res.point_id is None


def test_priorities_non_increasing():
    ds = random_dataset(300, 3, 9)
    idx = AnnulusIndex.build(ds, small_params(k=1, L=3, ell=5, width=10.0), seed=5)
    pr = [c.priority for c in idx.candidates(np.zeros(3), cap=200)]
    assert len(pr) == 200
    assert all(a >= b for a, b in zip(pr, pr[1:]))


def _fixed_index(points, hashes, projections, params):
    return AnnulusIndex(VectorDataset(points), params, hashes, projections, seed=0)


def test_policy_one_bucket_three_lists():
    # one point outside the widened annulus, one table, three lists: three evaluations
    params = small_params(k=1, L=1, ell=3, m=100, width=100.0)
    g = ConcatenatedHash(np.array([[1.0, 0.0]]), np.array([50.0]), 100.0)
    idx = _fixed_index([[20.0, 0.0]], [g], np.eye(3, 2), params)
    res = idx.query([0.0, 0.0])
    assert (res.found, res.candidates_examined, res.status) == (False, 3, "exhausted")


def test_policy_two_buckets_evaluated_twice():
    params = small_params(k=1, L=2, ell=1, m=100, width=100.0)
    g1 = ConcatenatedHash(np.array([[1.0, 0.0]]), np.array([50.0]), 100.0)
    g2 = ConcatenatedHash(np.array([[0.0, 1.0]]), np.array([50.0]), 100.0)
    idx = _fixed_index([[20.0, 0.0]], [g1, g2], np.array([[1.0, 0.0]]), params)
    seen = [(c.table, c.point_id) for c in idx.candidates([0.0, 0.0])]
    assert seen == [(0, 0), (1, 0)]
    assert idx.query([0.0, 0.0]).candidates_examined == 2


def test_cap_one_evaluates_once():
    ds = random_dataset(100, 3, 10, scale=20.0)
    idx = AnnulusIndex.build(ds, small_params(k=1, L=4, ell=4, width=1000.0), seed=1)
    res = idx.query(np.zeros(3), cap=1)
    assert res.candidates_examined == 1
    if not res.found:
        assert res.status == "cap"


def test_query_dimension_mismatch():
    idx = AnnulusIndex.build(random_dataset(10, 3, 0), small_params(), seed=0)
    with pytest.raises(DimensionMismatchError):
        idx.query(np.zeros(2))


def test_round_trip(tmp_path):
    ds = random_dataset(120, 4, 11, scale=2.0)
    params = derive_params(120, r=1.0, w=2.0, c=2.0)
    idx = AnnulusIndex.build(ds, params, seed=2**64 - 1)
    path = tmp_path / "annulus.npz"
    idx.save(path)
    back = AnnulusIndex.load(path, ds)
    assert back.seed == 2**64 - 1
    assert (back.params.k, back.params.L, back.params.ell, back.params.m) == (
        params.k, params.L, params.ell, params.m)
    for q in make_rng(3).standard_normal((10, 4)):
        assert back.query(q) == idx.query(q)
