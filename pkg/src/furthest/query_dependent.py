"""Query-dependent approximate furthest neighbor index.

``ell`` Gaussian projection vectors are drawn; for each one the ``m`` points with
the largest projection value are kept in descending order. A query merges the
lists through a max-priority queue keyed by ``a_i . x - a_i . q`` and evaluates
the true distance of the first ``m`` entries dequeued.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import _serial
from .core import VectorDataset, make_rng, project_vector, sample_gaussian_matrix


@dataclass(frozen=True)
class AfnParams:
    ell: int
    m: int
    c: float | None = None

    def __post_init__(self):
        if self.ell < 1 or self.m < 1:
            raise ValueError(f"need ell >= 1 and m >= 1, got ell={self.ell}, m={self.m}")
        if self.c is not None and not self.c > 1:
            raise ValueError(f"approximation factor must exceed 1, got {self.c}")


@dataclass(frozen=True)
class QueryResult:
    point_id: int
    distance: float
    candidates_examined: int


class Candidate(NamedTuple):
    key: float
    list_index: int
    point_id: int


def default_params(n: int, c: float) -> AfnParams:
    """Projection count and candidate budget that give the success guarantee.

    ``ell = ceil(2 n^(1/c^2))`` and ``m = ceil(1 + e^2 ell (ln n)^(c^2/2 - 1/3))``,
    with ``m`` clamped to ``n``.
    """
    if not c > 1:
        raise ValueError(f"approximation factor must exceed 1, got {c}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    c2 = c * c
    ell = math.ceil(2.0 * n ** (1.0 / c2))
    m = math.ceil(1.0 + math.e**2 * ell * math.log(n) ** (c2 / 2.0 - 1.0 / 3.0))
    return AfnParams(ell=ell, m=min(n, m), c=c)


class ProjectionIndex:
    """Per-projection top-``m`` lists over a dataset.

    ``values[i]`` and ``ids[i]`` hold list ``i`` sorted by projection value
    descending, ties toward the smaller point id.
    """

    def __init__(self, dataset: VectorDataset, projections, values, ids, m: int, seed: int):
        self.dataset = dataset
        self.projections = np.asarray(projections, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.m = int(m)
        self.seed = seed
        for arr in (self.projections, self.values, self.ids):
            arr.flags.writeable = False

    @property
    def ell(self) -> int:
        return self.projections.shape[0]

    @classmethod
    def build(cls, dataset: VectorDataset, params: AfnParams, seed: int) -> "ProjectionIndex":
        rng = make_rng(seed)
        projections = sample_gaussian_matrix(params.ell, dataset.dim, rng)
        proj = dataset.project(projections)
        size = min(params.m, dataset.n)
        point_ids = np.arange(dataset.n)
        values = np.empty((params.ell, size))
        ids = np.empty((params.ell, size), dtype=np.int64)
        for i in range(params.ell):
            order = np.lexsort((point_ids, -proj[:, i]))[:size]
            ids[i] = order
            values[i] = proj[order, i]
        return cls(dataset, projections, values, ids, params.m, seed)

    def candidates(self, q, m: int | None = None) -> Iterator[Candidate]:
        """Yield the priority-queue dequeues of a query, in order, at most ``m`` of them."""
        q = self.dataset.check_query(q)
        m = self.m if m is None else m
        if m > self.m:
            raise ValueError(f"index was built for m <= {self.m}, asked for {m}")
        aq = project_vector(self.projections, q)
        values, ids = self.values, self.ids
        length = values.shape[1]
        # Entries are (-key, list index, point id, position); min-heap on -key.
        heap = [(-(values[i, 0] - aq[i]), i, int(ids[i, 0]), 0) for i in range(self.ell)]
        heapq.heapify(heap)
        for _ in range(m):
            if not heap:
                return
            neg_key, i, pid, pos = heapq.heappop(heap)
            yield Candidate(-neg_key, i, pid)
            pos += 1
            if pos < length:
                heapq.heappush(heap, (-(values[i, pos] - aq[i]), i, int(ids[i, pos]), pos))

    def query(self, q, m: int | None = None) -> QueryResult:
        q = self.dataset.check_query(q)
        seen = [cand.point_id for cand in self.candidates(q, m)]
        dists = self.dataset.distances(q, seen)
        # argmax keeps the first maximum, i.e. only a strictly further point replaces the incumbent
        best = int(np.argmax(dists))
        return QueryResult(seen[best], float(dists[best]), len(seen))

    def query_with_radius(self, q, r: float, c: float, m: int | None = None) -> QueryResult:
        """Like :meth:`query` but stops at the first candidate at distance >= r/c."""
        if not r > 0:
            raise ValueError(f"radius must be positive, got {r}")
        q = self.dataset.check_query(q)
        target = r / c
        best_id, best_dist, count = -1, -math.inf, 0
        for cand in self.candidates(q, m):
            count += 1
            dist = self.dataset.distance(q, cand.point_id)
            if dist > best_dist:
                best_id, best_dist = cand.point_id, dist
            if dist >= target:
                break
        return QueryResult(best_id, best_dist, count)

    def save(self, path) -> None:
        _serial.save_arrays(
            path,
            "projection-index",
            m=np.array(self.m),
            seed=np.array(self.seed, dtype=np.uint64),
            projections=self.projections,
            values=self.values,
            ids=self.ids,
            dataset_shape=np.array([self.dataset.n, self.dataset.dim]),
        )

    @classmethod
    def load(cls, path, dataset: VectorDataset) -> "ProjectionIndex":
        arrays = _serial.load_arrays(path, "projection-index")
        _serial.check_dataset(arrays, dataset)
        return cls(
            dataset, arrays["projections"], arrays["values"], arrays["ids"],
            int(arrays["m"]), int(arrays["seed"]),
        )


def build(dataset: VectorDataset, params: AfnParams, seed: int) -> ProjectionIndex:
    return ProjectionIndex.build(dataset, params, seed)
