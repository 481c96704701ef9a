"""Vectors, datasets, seeded sampling and the distance/projection primitives.

A vector is either a dense 1-D ``float64`` numpy array or a :class:`SparseVector`.
A :class:`VectorDataset` stores its points as a dense ``(n, d)`` array or a CSR
matrix and offers the batched projection/distance operations the indexes need.

Gaussian draws come from numpy's ``Generator.standard_normal`` (ziggurat method)
on a PCG64 bit generator whose state is derived from ``SeedSequence(seed,
spawn_key=key)``. The method is fixed so that seeded experiment output is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

MAX_SEED = 2**64 - 1


class DimensionMismatchError(ValueError):
    pass


class DegenerateDataError(ValueError):
    """Raised when a statistic is undefined for the given data."""


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Index/value pairs with strictly increasing indices, all below ``dim``.

    Use :meth:`from_pairs` to build one from unsorted input; the constructor
    only validates.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if idx.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError(f"sparse index out of range [0, {self.dim})")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("sparse indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("vector coordinates must be finite")
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs, dim: int) -> "SparseVector":
        """Canonicalize ``(index, value)`` pairs: sort, keep the last value of a
        repeated index, drop zeros."""
        merged = {}
        for i, v in pairs:
            merged[int(i)] = float(v)
        items = sorted((i, v) for i, v in merged.items() if v != 0.0)
        idx = np.array([i for i, _ in items], dtype=np.int64)
        val = np.array([v for _, v in items], dtype=np.float64)
        return cls(idx, val, dim)

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))


Vector = Union[np.ndarray, SparseVector]


def as_vector(x) -> Vector:
    """Coerce array-likes to a validated dense vector; sparse vectors pass through."""
    if isinstance(x, SparseVector):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError("a dense vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector coordinates must be finite")
    return arr


def dim_of(x: Vector) -> int:
    return x.dim if isinstance(x, SparseVector) else int(np.shape(x)[0])


def _check_dims(a: Vector, b: Vector) -> None:
    if dim_of(a) != dim_of(b):
        raise DimensionMismatchError(f"dimension mismatch: {dim_of(a)} vs {dim_of(b)}")


def _index_value(x: Vector):
    if isinstance(x, SparseVector):
        return x.indices, x.values
    x = np.asarray(x, dtype=np.float64)
    return np.arange(x.shape[0]), x


def dot(a: Vector, b: Vector) -> float:
    """Dot product of two vectors of any representation.

    Products are accumulated in ascending index order with ``math.fsum``, so the
    result is correctly rounded and independent of argument order.
    """
    a, b = as_vector(a), as_vector(b)
    _check_dims(a, b)
    if isinstance(a, SparseVector) or isinstance(b, SparseVector):
        ia, va = _index_value(a)
        ib, vb = _index_value(b)
        common, pa, pb = np.intersect1d(ia, ib, assume_unique=True, return_indices=True)
        return math.fsum(va[pa] * vb[pb])
    return math.fsum(a * b)


def _difference(a: Vector, b: Vector) -> np.ndarray:
    """Nonzero-support coordinates of ``a - b`` (order irrelevant for norms)."""
    if not isinstance(a, SparseVector) and not isinstance(b, SparseVector):
        return np.asarray(a) - np.asarray(b)
    ia, va = _index_value(a)
    ib, vb = _index_value(b)
    support = np.union1d(ia, ib)
    da = np.zeros(support.size)
    db = np.zeros(support.size)
    da[np.searchsorted(support, ia)] = va
    db[np.searchsorted(support, ib)] = vb
    return da - db


def l2_distance(a: Vector, b: Vector) -> float:
    a, b = as_vector(a), as_vector(b)
    _check_dims(a, b)
    diff = _difference(a, b)
    return math.sqrt(math.fsum(diff * diff))


# --- seeded randomness -------------------------------------------------------


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(seed, *key)``.

    Parallel tasks pass their coordinates as ``key`` so serial and parallel runs
    draw identical numbers.
    """
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if any(int(k) < 0 for k in key):
        raise ValueError("stream key components must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit seed for the sub-task ``key`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_gaussian_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return rng.standard_normal(d)


def sample_gaussian_matrix(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` Gaussian vectors as rows; identical to ``k`` successive
    :func:`sample_gaussian_vector` calls on the same stream."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    return rng.standard_normal((k, d))


def sample_unit_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        v = sample_gaussian_vector(d, rng)
        norm = math.sqrt(math.fsum(v * v))
        if norm > 0.0:
            return v / norm


def sample_unit_matrix(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    return np.array([sample_unit_vector(d, rng) for _ in range(k)]).reshape(k, d)


# --- datasets ----------------------------------------------------------------


class VectorDataset:
    """``n >= 1`` points of common dimension ``d``; point ids are row numbers.

    ``data`` may be a dense 2-D array or any scipy sparse matrix (stored as
    canonical CSR). The arrays are marked read-only.
    """

    def __init__(self, data, name: str | None = None):
        if sp.issparse(data):
            mat = sp.csr_matrix(data, dtype=np.float64)
            mat.sum_duplicates()
            mat.eliminate_zeros()
            mat.sort_indices()
            if not np.all(np.isfinite(mat.data)):
                raise ValueError("dataset coordinates must be finite")
            mat.data.flags.writeable = False
            self._sparse = True
        else:
            mat = np.array(data, dtype=np.float64)
            if mat.ndim != 2:
                raise ValueError("dense dataset must be a 2-D array")
            if not np.all(np.isfinite(mat)):
                raise ValueError("dataset coordinates must be finite")
            mat.flags.writeable = False
            self._sparse = False
        n, d = mat.shape
        if n < 1 or d < 1:
            raise ValueError(f"dataset needs n >= 1 and d >= 1, got shape {mat.shape}")
        self.data = mat
        self.name = name

    @classmethod
    def from_vectors(cls, vectors: Sequence[Vector], dim: int | None = None, name=None):
        vectors = [as_vector(v) for v in vectors]
        if not vectors:
            raise ValueError("dataset needs at least one point")
        dim = dim_of(vectors[0]) if dim is None else dim
        for i, v in enumerate(vectors):
            if dim_of(v) != dim:
                raise DimensionMismatchError(f"point {i} has dimension {dim_of(v)}, expected {dim}")
        if any(isinstance(v, SparseVector) for v in vectors):
            rows, cols, vals = [], [], []
            for i, v in enumerate(vectors):
                idx, val = _index_value(v)
                rows.append(np.full(idx.size, i))
                cols.append(idx)
                vals.append(val)
            mat = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(len(vectors), dim),
            )
            return cls(mat, name=name)
        return cls(np.vstack(vectors), name=name)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def is_sparse(self) -> bool:
        return self._sparse

    def __len__(self):
        return self.n

    def point(self, i: int) -> Vector:
        if not 0 <= i < self.n:
            raise IndexError(f"point id {i} out of range [0, {self.n})")
        if self._sparse:
            lo, hi = self.data.indptr[i], self.data.indptr[i + 1]
            return SparseVector(self.data.indices[lo:hi], self.data.data[lo:hi], self.dim)
        return self.data[i]

    def check_query(self, q) -> Vector:
        q = as_vector(q)
        if dim_of(q) != self.dim:
            raise DimensionMismatchError(f"query has dimension {dim_of(q)}, dataset has {self.dim}")
        return q

    def project(self, directions: np.ndarray) -> np.ndarray:
        """``(n, k)`` array of ``directions[i] . x`` for every point ``x``."""
        directions = np.asarray(directions, dtype=np.float64)
        if directions.ndim != 2 or directions.shape[1] != self.dim:
            raise DimensionMismatchError("directions must have shape (k, dim)")
        return np.asarray(self.data @ directions.T)

    def distances(self, q: Vector, ids=None) -> np.ndarray:
        """Euclidean distances from ``q`` to the points ``ids`` (all points if None)."""
        q = self.check_query(q)
        rows = self.data if ids is None else self.data[np.asarray(ids, dtype=np.int64)]
        if self._sparse:
            return _sparse_distances(rows, q)
        q = q.to_dense() if isinstance(q, SparseVector) else q
        diff = rows - q
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def distance(self, q: Vector, i: int) -> float:
        return float(self.distances(q, [i])[0])

    def to_dense(self) -> np.ndarray:
        return self.data.toarray() if self._sparse else np.asarray(self.data)


def _as_sparse_row(q: Vector) -> sp.csr_matrix:
    if isinstance(q, SparseVector):
        return sp.csr_matrix(
            (q.values, q.indices, np.array([0, q.nnz])), shape=(1, q.dim)
        )
    return sp.csr_matrix(np.asarray(q)[None, :])


def _sparse_distances(rows: sp.csr_matrix, q: Vector, budget: int = 4_000_000) -> np.ndarray:
    # Exact differences against the query tiled over a block of rows; blocks keep
    # the tiled copy under ``budget`` stored entries.
    qrow = _as_sparse_row(q)
    nnz = max(qrow.nnz, 1)
    step = max(1, budget // nnz)
    out = np.empty(rows.shape[0])
    for lo in range(0, rows.shape[0], step):
        block = rows[lo:lo + step]
        k = block.shape[0]
        tiled = sp.csr_matrix(
            (np.tile(qrow.data, k), np.tile(qrow.indices, k), np.arange(k + 1) * qrow.nnz),
            shape=block.shape,
        )
        diff = block - tiled
        out[lo:lo + k] = np.sqrt(np.asarray(diff.multiply(diff).sum(axis=1)).ravel())
    return out


def project_vector(directions: np.ndarray, q: Vector) -> np.ndarray:
    """``directions @ q`` for a dense or sparse ``q``."""
    if isinstance(q, SparseVector):
        return directions[:, q.indices] @ q.values
    return directions @ np.asarray(q)
