"""Gaussian-projection bucket hashing for Euclidean space.

An atom maps ``x`` to ``floor((a . x + b) / W)`` with ``a`` Gaussian and ``b``
uniform in ``[0, W)``. Two points at distance ``s`` collide under one atom with
probability :func:`collision_probability`. ``k`` atoms concatenated give a
bucket key that is a tuple of ``k`` integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import SparseVector, VectorDataset, as_vector, dim_of, DimensionMismatchError


@dataclass(frozen=True)
class HashAtom:
    direction: np.ndarray
    offset: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("bucket width must be positive")
        if not 0 <= self.offset < self.width:
            raise ValueError("offset must lie in [0, width)")

    def __call__(self, x) -> int:
        return hash_point(ConcatenatedHash(self.direction[None, :], np.array([self.offset]), self.width), x)[0]


@dataclass(frozen=True, eq=False)
class ConcatenatedHash:
    """``k`` atoms sharing a bucket width; ``directions`` has shape ``(k, d)``."""

    directions: np.ndarray
    offsets: np.ndarray
    width: float

    def __post_init__(self):
        directions = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        offsets = np.asarray(self.offsets, dtype=np.float64).ravel()
        if directions.shape[0] < 1 or directions.shape[0] != offsets.shape[0]:
            raise ValueError("need k >= 1 directions and one offset per direction")
        if not self.width > 0:
            raise ValueError("bucket width must be positive")
        if np.any(offsets < 0) or np.any(offsets >= self.width):
            raise ValueError("offsets must lie in [0, width)")
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "offsets", offsets)

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def atoms(self) -> list[HashAtom]:
        return [HashAtom(a, float(b), self.width) for a, b in zip(self.directions, self.offsets)]

    @classmethod
    def sample(cls, k: int, d: int, width: float, rng: np.random.Generator) -> "ConcatenatedHash":
        directions = rng.standard_normal((k, d))
        offsets = rng.uniform(0.0, width, size=k)
        return cls(directions, offsets, width)


def _project(directions: np.ndarray, rows) -> np.ndarray:
    # One code path for single points and whole datasets, so that a query equal
    # to a stored point always lands in that point's bucket.
    if sp.issparse(rows):
        return np.asarray(rows @ directions.T)
    return np.einsum("ij,kj->ik", rows, directions)


def hash_rows(hashes, rows) -> np.ndarray:
    """Bucket keys of several hash functions at once.

    ``rows`` is a dense ``(n, d)`` array or a CSR matrix; the result has shape
    ``(n, sum of k)`` with the keys of ``hashes[0]`` first. All hashes must share
    one bucket width.
    """
    width = hashes[0].width
    if any(g.width != width for g in hashes):
        raise ValueError("stacked hashes must share a bucket width")
    directions = np.concatenate([g.directions for g in hashes])
    offsets = np.concatenate([g.offsets for g in hashes])
    return np.floor((_project(directions, rows) + offsets) / width).astype(np.int64)


def point_rows(x, dim: int):
    """A single point as a one-row matrix for :func:`hash_rows`."""
    x = as_vector(x)
    if dim_of(x) != dim:
        raise DimensionMismatchError(f"point has dimension {dim_of(x)}, hash expects {dim}")
    if isinstance(x, SparseVector):
        return sp.csr_matrix((x.values, x.indices, np.array([0, x.nnz])), shape=(1, x.dim))
    return x[None, :]


def hash_point(g: ConcatenatedHash, x) -> tuple[int, ...]:
    return tuple(int(v) for v in hash_rows([g], point_rows(x, g.dim))[0])


def hash_dataset(g: ConcatenatedHash, dataset: VectorDataset) -> np.ndarray:
    """``(n, k)`` integer bucket keys for every point of ``dataset``."""
    if dataset.dim != g.dim:
        raise DimensionMismatchError(f"dataset has dimension {dataset.dim}, hash expects {g.dim}")
    return hash_rows([g], dataset.data)


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def collision_probability(s: float, width: float) -> float:
    """Probability that one atom of bucket width ``width`` maps two points at
    distance ``s`` to the same bucket."""
    if not s > 0:
        raise ValueError(f"distance must be positive, got {s}")
    if not width > 0:
        raise ValueError(f"bucket width must be positive, got {width}")
    ratio = width / s
    return (
        1.0
        - 2.0 * _normal_sf(ratio)
        - 2.0 / (math.sqrt(2.0 * math.pi) * ratio) * (1.0 - math.exp(-ratio * ratio / 2.0))
    )


@dataclass(frozen=True)
class Sensitivity:
    r1: float
    r2: float
    p1: float
    p2: float

    def __post_init__(self):
        if not (0 < self.p2 <= self.p1 < 1):
            raise ValueError(f"need 0 < p2 <= p1 < 1, got p1={self.p1}, p2={self.p2}")

    @property
    def rho(self) -> float:
        return math.log(1.0 / self.p1) / math.log(1.0 / self.p2)


def sensitivity_for(r: float, w: float, c: float, width: float) -> Sensitivity:
    """Collision bounds of one atom at distances ``w r`` and ``w c r``."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if not w > 1:
        raise ValueError(f"w must exceed 1, got {w}")
    if not c > 1:
        raise ValueError(f"c must exceed 1, got {c}")
    r1, r2 = w * r, w * c * r
    return Sensitivity(r1, r2, collision_probability(r1, width), collision_probability(r2, width))
