"""Approximate annulus queries: LSH buckets that each hold projection-sorted lists.

Every point is hashed into one bucket per table. A bucket keeps, for each of the
``ell`` shared Gaussian projections, its members sorted by projection value
descending. A query pulls the heads of all lists in the buckets it hashes to into
a max-priority queue keyed by ``a_i . (p - q)`` and walks down the lists until it
meets a point in the widened annulus ``[r/(c w), c w r]`` or runs out of budget.

Candidates are not deduplicated across buckets or lists; every dequeue costs one
distance evaluation against the ``m + 3L`` cap.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import _serial
from .core import VectorDataset, make_rng, project_vector, sample_gaussian_matrix
from .lsh import ConcatenatedHash, Sensitivity, hash_rows, point_rows, sensitivity_for

DEFAULT_MAX_ENTRIES = 200_000_000


class MemoryBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnnulusParams:
    r: float
    w: float
    c: float
    k: int
    L: int
    ell: int
    m: int
    width: float
    sensitivity: Sensitivity | None = None

    def __post_init__(self):
        if not (self.r > 0 and self.w > 1 and self.c > 1 and self.width > 0):
            raise ValueError("need r > 0, w > 1, c > 1 and a positive bucket width")
        if min(self.k, self.L, self.ell, self.m) < 1:
            raise ValueError("k, L, ell and m must all be >= 1")

    @property
    def cap(self) -> int:
        return self.m + 3 * self.L

    @property
    def inner(self) -> float:
        return self.r / (self.c * self.w)

    @property
    def outer(self) -> float:
        return self.c * self.w * self.r


def default_width(r: float, w: float) -> float:
    return 4.0 * w * r


def concatenation_length(n: int, p2: float) -> int:
    """Atoms per hash so that a far point collides with probability about ``1/n``."""
    return max(1, math.ceil(math.log(n) / math.log(1.0 / p2)))


def table_count(n: int, rho: float, p1: float) -> int:
    return math.ceil(n**rho / p1)


def derive_params(n: int, r: float, w: float, c: float, width: float | None = None) -> AnnulusParams:
    """Table count, concatenation length and projection budget for ``n`` points.

    ``k = ceil(ln n / ln(1/p2))``, ``L = ceil(n^rho / p1)``,
    ``phi = n^(1/c^2) (ln n)^((1 - 1/c^2)/2)``, ``ell = ceil(2 phi)`` and
    ``m = ceil(1 + e^2 ell)``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    width = default_width(r, w) if width is None else width
    sens = sensitivity_for(r, w, c, width)
    k = concatenation_length(n, sens.p2)
    L = table_count(n, sens.rho, sens.p1)
    log_n = math.log(n)
    inv_c2 = 1.0 / (c * c)
    phi = n**inv_c2 * log_n ** ((1.0 - inv_c2) / 2.0)
    ell = math.ceil(2.0 * phi)
    m = math.ceil(1.0 + math.e**2 * ell)
    return AnnulusParams(r=r, w=w, c=c, k=k, L=L, ell=ell, m=m, width=width, sensitivity=sens)


@dataclass(frozen=True)
class Bucket:
    """Read-only view of one bucket: ``ids[i]``/``values[i]`` is list ``i``."""

    ids: np.ndarray
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.ids.shape[1]


def _void_codes(keys: np.ndarray) -> np.ndarray:
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    return keys.view(np.dtype((np.void, 8 * keys.shape[1]))).ravel()


def _multipliers(k: int, salt: int) -> np.ndarray:
    return np.random.default_rng([0x5EED, salt]).integers(1, 2**63, size=k, dtype=np.uint64) | np.uint64(1)


def _fingerprint(keys: np.ndarray, mult: np.ndarray) -> np.ndarray:
    # Wrapping 64-bit linear combination of the key components.
    return keys.astype(np.uint64) @ mult


@dataclass(frozen=True)
class HashTable:
    """Non-empty buckets of one hash function.

    Buckets are found through a 64-bit fingerprint of the key. Build checks that
    distinct stored keys never share a fingerprint (redrawing the multipliers if
    they do) and lookups compare the full key, so no two keys are ever merged.
    ``codes`` is sorted; bucket ``b`` has key ``keys[b]`` and holds the point ids
    ``ids[starts[b]:starts[b+1]]`` in increasing order.
    """

    mult: np.ndarray
    codes: np.ndarray
    keys: np.ndarray
    starts: np.ndarray
    ids: np.ndarray

    @classmethod
    def from_keys(cls, keys: np.ndarray) -> "HashTable":
        n = keys.shape[0]
        salt = 0
        while True:
            mult = _multipliers(keys.shape[1], salt)
            point_codes = _fingerprint(keys, mult)
            # One stable sort groups points by bucket, ids ascending within a bucket.
            ids = np.argsort(point_codes, kind="stable")
            ordered = point_codes[ids]
            first = np.ones(n, dtype=bool)
            first[1:] = ordered[1:] != ordered[:-1]
            sorted_keys = keys[ids]
            same = ~first[1:]
            if np.array_equal(sorted_keys[1:][same], sorted_keys[:-1][same]):
                break
            salt += 1
        codes = ordered[first]
        starts = np.append(np.flatnonzero(first), n).astype(np.int64)
        ids = ids.astype(np.int32 if n < 2**31 else np.int64)
        table_keys = sorted_keys[first]
        for arr in (codes, table_keys, starts, ids):
            arr.flags.writeable = False
        return cls(mult, codes, table_keys, starts, ids)

    @property
    def bucket_count(self) -> int:
        return len(self.codes)

    def locate(self, key) -> int | None:
        key = np.asarray(key, dtype=np.int64).reshape(1, -1)
        code = _fingerprint(key, self.mult)[0]
        b = int(np.searchsorted(self.codes, code))
        if b < len(self.codes) and self.codes[b] == code and np.array_equal(self.keys[b], key[0]):
            return b
        return None

    def members(self, b: int) -> np.ndarray:
        return self.ids[self.starts[b]:self.starts[b + 1]]


class Candidate(NamedTuple):
    priority: float
    table: int
    list_index: int
    point_id: int


@dataclass(frozen=True)
class AnnulusResult:
    point_id: int | None
    distance: float | None
    candidates_examined: int
    status: str  # "found", "exhausted" (queue emptied) or "cap" (budget spent)

    @property
    def found(self) -> bool:
        return self.point_id is not None


class AnnulusIndex:
    """Buckets keep their members once per table; the ``ell`` sorted lists of a
    bucket are materialized the first time a query walks past a list head and
    cached afterwards. Iteration order is the same as with eagerly sorted lists.
    """

    def __init__(self, dataset: VectorDataset, params: AnnulusParams, hashes, projections, seed: int):
        self.dataset = dataset
        self.params = params
        self.hashes = list(hashes)
        self.projections = np.asarray(projections, dtype=np.float64)
        self.seed = int(seed)
        if len(self.hashes) != params.L or self.projections.shape[0] != params.ell:
            raise ValueError("hash/projection counts do not match params")
        self.point_projections = dataset.project(self.projections)
        self.point_projections.flags.writeable = False
        keys = hash_rows(self.hashes, dataset.data)
        k = params.k
        self.tables = [HashTable.from_keys(keys[:, j * k:(j + 1) * k]) for j in range(params.L)]
        self._lists: dict[tuple[int, int, int], np.ndarray] = {}

    @classmethod
    def build(
        cls,
        dataset: VectorDataset,
        params: AnnulusParams,
        seed: int,
        max_entries: int = DEFAULT_MAX_ENTRIES,
    ) -> "AnnulusIndex":
        entries = dataset.n * params.L * params.ell
        if entries > max_entries:
            raise MemoryBudgetError(
                f"index needs {entries} list entries (n*L*ell), budget is {max_entries}"
            )
        rng = make_rng(seed)
        hashes = [ConcatenatedHash.sample(params.k, dataset.dim, params.width, rng) for _ in range(params.L)]
        projections = sample_gaussian_matrix(params.ell, dataset.dim, rng)
        return cls(dataset, params, hashes, projections, seed)

    def query_keys(self, q) -> list[tuple[int, ...]]:
        """Bucket key of ``q`` in every table."""
        row = hash_rows(self.hashes, point_rows(q, self.dataset.dim))[0]
        k = self.params.k
        return [tuple(int(v) for v in row[j * k:(j + 1) * k]) for j in range(self.params.L)]

    def sorted_list(self, table: int, b: int, i: int) -> np.ndarray:
        """Members of bucket ``b`` of ``table`` by projection ``i`` descending,
        ties to the smaller id."""
        cache_key = (table, b, i)
        out = self._lists.get(cache_key)
        if out is None:
            members = self.tables[table].members(b).astype(np.int64)
            # members are ascending, so a stable sort breaks ties toward smaller ids
            out = members[np.argsort(-self.point_projections[members, i], kind="stable")]
            out.flags.writeable = False
            self._lists[cache_key] = out
        return out

    def bucket(self, table: int, key) -> Bucket | None:
        b = self.tables[table].locate(tuple(key))
        if b is None:
            return None
        ids = np.stack([self.sorted_list(table, b, i) for i in range(self.params.ell)])
        values = np.take_along_axis(self.point_projections.T, ids, axis=1)
        return Bucket(ids, values)

    def _heads(self, table: int, b: int) -> np.ndarray:
        members = self.tables[table].members(b)
        # argmax returns the first maximum, i.e. the smallest id among ties
        return members[np.argmax(self.point_projections[members], axis=0)].astype(np.int64)

    def candidates(self, q, cap: int | None = None) -> Iterator[Candidate]:
        """Priority-queue dequeues of a query, in order, at most ``cap`` of them."""
        q = self.dataset.check_query(q)
        cap = self.params.cap if cap is None else cap
        aq = project_vector(self.projections, q)
        proj = self.point_projections
        heap = []
        matched = {}
        qkeys = self.query_keys(q)
        for j, table in enumerate(self.tables):
            b = table.locate(qkeys[j])
            if b is None:
                continue
            matched[j] = b
            for i, pid in enumerate(self._heads(j, b).tolist()):
                heap.append((-(proj[pid, i] - aq[i]), j, i, pid, 0))
        heapq.heapify(heap)
        for _ in range(cap):
            if not heap:
                return
            neg, j, i, pid, pos = heapq.heappop(heap)
            yield Candidate(-neg, j, i, pid)
            table = self.tables[j]
            b = matched[j]
            pos += 1
            if pos < table.starts[b + 1] - table.starts[b]:
                nxt = int(self.sorted_list(j, b, i)[pos])
                heapq.heappush(heap, (-(proj[nxt, i] - aq[i]), j, i, nxt, pos))

    def query(self, q, cap: int | None = None) -> AnnulusResult:
        q = self.dataset.check_query(q)
        cap = self.params.cap if cap is None else cap
        lo, hi = self.params.inner, self.params.outer
        count = 0
        for cand in self.candidates(q, cap):
            count += 1
            dist = self.dataset.distance(q, cand.point_id)
            if lo <= dist <= hi:
                return AnnulusResult(cand.point_id, dist, count, "found")
        return AnnulusResult(None, None, count, "cap" if count >= cap else "exhausted")

    def save(self, path) -> None:
        p = self.params
        _serial.save_arrays(
            path,
            "annulus-index",
            scalars=np.array([p.r, p.w, p.c, p.width]),
            counts=np.array([p.k, p.L, p.ell, p.m]),
            seed=np.array(self.seed, dtype=np.uint64),
            directions=np.stack([g.directions for g in self.hashes]),
            offsets=np.stack([g.offsets for g in self.hashes]),
            projections=self.projections,
            dataset_shape=np.array([self.dataset.n, self.dataset.dim]),
        )

    @classmethod
    def load(cls, path, dataset: VectorDataset) -> "AnnulusIndex":
        """Restore hash functions and projections; buckets are rebuilt from ``dataset``."""
        a = _serial.load_arrays(path, "annulus-index")
        _serial.check_dataset(a, dataset)
        r, w, c, width = (float(v) for v in a["scalars"])
        k, L, ell, m = (int(v) for v in a["counts"])
        params = AnnulusParams(r, w, c, k, L, ell, m, width, sensitivity_for(r, w, c, width))
        hashes = [ConcatenatedHash(dirs, offs, width) for dirs, offs in zip(a["directions"], a["offsets"])]
        return cls(dataset, params, hashes, a["projections"], int(a["seed"]))


def build(dataset: VectorDataset, params: AnnulusParams, seed: int, **kwargs) -> AnnulusIndex:
    return AnnulusIndex.build(dataset, params, seed, **kwargs)
