"""Query-independent furthest neighbor candidates.

Each strategy precomputes a single ranking of point ids; a query scans a prefix
of the ranking and returns the furthest point seen.

* ``extremes``: the argmax point of each of ``ell`` random unit directions,
  ranked by how many directions it won.
* ``max_projection``: every point keyed by its largest value over ``ell``
  Gaussian projections, descending.
* ``min_depth``: every point keyed by its minimum rank depth over ``ell``
  projections, ties broken by how often that depth is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _serial
from .core import VectorDataset, make_rng, sample_gaussian_matrix, sample_unit_matrix
from .query_dependent import QueryResult

STRATEGIES = ("extremes", "max_projection", "min_depth")
DEFAULT_ELL_CAP = 10**7


@dataclass(frozen=True)
class CoveringParams:
    """Sizing inputs for the extremes strategy at approximation ``c`` in (1, 2)."""

    c: float
    d: int
    gamma: float = 1.0

    def __post_init__(self):
        if not 1 < self.c < 2:
            raise ValueError(f"c must lie in (1, 2), got {self.c}")
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")

    @property
    def phi_c(self) -> float:
        """Half the angle between unit vectors whose dot product is ``1/c``."""
        return 0.5 * math.acos(1.0 / self.c)

    def covering_number(self) -> float:
        return covering_number(self.phi_c, self.d, self.gamma)


def covering_number(phi: float, d: int, gamma: float = 1.0) -> float:
    """Upper bound on the number of caps of angular radius ``phi`` covering the
    unit sphere in ``R^d``.

    Valid for ``0 < phi < arccos(1/sqrt(d))``.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0 < phi < math.acos(1.0 / math.sqrt(d)):
        raise ValueError(f"phi={phi} outside (0, arccos(1/sqrt({d})))")
    return (
        gamma
        * math.cos(phi)
        / math.sin(phi) ** (d + 1)
        * (d + 1) ** 1.5
        * math.log(1.0 + (d + 1) * math.cos(phi) ** 2)
    )


class EllSuggestion(NamedTuple):
    ell: int
    clamped: bool


def ell_from_covering(covering: float, cap: int = DEFAULT_ELL_CAP) -> EllSuggestion:
    """``ceil(2 C ln C)`` clamped to ``[1, cap]``."""
    raw = 2.0 * covering * math.log(covering) if covering > 0 else 0.0
    if raw > cap:
        return EllSuggestion(cap, True)
    return EllSuggestion(max(1, math.ceil(raw)), False)


def suggested_ell(c: float, d: int, gamma: float = 1.0, cap: int = DEFAULT_ELL_CAP) -> EllSuggestion:
    """Number of random unit directions for the extremes strategy.

    Grows exponentially in ``d``; ``clamped`` is set when ``cap`` was hit.
    """
    return ell_from_covering(CoveringParams(c, d, gamma).covering_number(), cap)


class QueryIndependentOrder:
    """A fixed ranking of point ids with the keys that produced it.

    ``keys`` is 1-D for ``extremes`` (directions won) and ``max_projection``
    (max projection value); for ``min_depth`` it has columns ``(depth, count)``.
    """

    def __init__(self, dataset: VectorDataset, strategy: str, ranked_ids, keys, ell: int, seed: int):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.dataset = dataset
        self.strategy = strategy
        self.ranked_ids = np.asarray(ranked_ids, dtype=np.int64)
        self.keys = np.asarray(keys)
        self.ell = int(ell)
        self.seed = int(seed)
        self.ranked_ids.flags.writeable = False
        self.keys.flags.writeable = False

    def __len__(self):
        return self.ranked_ids.size

    def scan(self, q) -> "PrefixScan":
        return PrefixScan(self, q)

    def query_prefix(self, q, m: int) -> QueryResult:
        return self.scan(q).advance(m)

    def save(self, path) -> None:
        _serial.save_arrays(
            path,
            "query-independent-order",
            strategy=np.array(self.strategy),
            ranked_ids=self.ranked_ids,
            keys=self.keys,
            ell=np.array(self.ell),
            seed=np.array(self.seed, dtype=np.uint64),
            dataset_shape=np.array([self.dataset.n, self.dataset.dim]),
        )

    @classmethod
    def load(cls, path, dataset: VectorDataset) -> "QueryIndependentOrder":
        a = _serial.load_arrays(path, "query-independent-order")
        _serial.check_dataset(a, dataset)
        return cls(dataset, str(a["strategy"]), a["ranked_ids"], a["keys"], int(a["ell"]), int(a["seed"]))


class PrefixScan:
    """Incremental prefix scan for one query; :meth:`advance` may be called with
    growing ``m`` to refine the answer."""

    def __init__(self, order: QueryIndependentOrder, q):
        if len(order) == 0:
            raise ValueError("cannot query an empty order")
        self.order = order
        self.q = order.dataset.check_query(q)
        self.position = 0
        self.best_id = -1
        self.best_distance = -math.inf

    def advance(self, m: int) -> QueryResult:
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        stop = min(m, len(self.order))
        if stop > self.position:
            ids = self.order.ranked_ids[self.position:stop]
            dists = self.order.dataset.distances(self.q, ids)
            top = dists.max()
            pid = int(ids[dists == top].min())
            if top > self.best_distance or (top == self.best_distance and pid < self.best_id):
                self.best_id, self.best_distance = pid, float(top)
            self.position = stop
        return QueryResult(self.best_id, self.best_distance, self.position)


def query_prefix(order: QueryIndependentOrder, q, m: int) -> QueryResult:
    return order.query_prefix(q, m)


def build_extremes(dataset: VectorDataset, ell: int, seed: int) -> QueryIndependentOrder:
    if ell < 1:
        raise ValueError("ell must be >= 1")
    directions = sample_unit_matrix(ell, dataset.dim, make_rng(seed))
    # argmax returns the first maximum, i.e. the smaller id on ties
    winners = np.argmax(dataset.project(directions), axis=0)
    ids, counts = np.unique(winners, return_counts=True)
    order = np.lexsort((ids, -counts))
    return QueryIndependentOrder(dataset, "extremes", ids[order], counts[order], ell, seed)


def build_max_projection(dataset: VectorDataset, ell: int, seed: int) -> QueryIndependentOrder:
    if ell < 1:
        raise ValueError("ell must be >= 1")
    projections = sample_gaussian_matrix(ell, dataset.dim, make_rng(seed))
    key = dataset.project(projections).max(axis=1)
    order = np.lexsort((np.arange(dataset.n), -key))
    return QueryIndependentOrder(dataset, "max_projection", order, key[order], ell, seed)


def rank_depths(proj: np.ndarray) -> np.ndarray:
    """Depth ``min(k, n-1-k)`` of each point's rank ``k`` in every column of
    ``proj``; equal values are ranked by point id."""
    n, ell = proj.shape
    point_ids = np.arange(n)
    depths = np.empty((n, ell), dtype=np.int64)
    for i in range(ell):
        order = np.lexsort((point_ids, proj[:, i]))
        rank = np.empty(n, dtype=np.int64)
        rank[order] = point_ids
        depths[:, i] = np.minimum(rank, n - 1 - rank)
    return depths


def min_depth_order(proj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank points by smallest depth, then by how many projections attain it
    (more first), then by id. Returns the order and its ``(depth, count)`` keys."""
    depths = rank_depths(proj)
    min_depth = depths.min(axis=1)
    count = (depths == min_depth[:, None]).sum(axis=1)
    order = np.lexsort((np.arange(proj.shape[0]), -count, min_depth))
    return order, np.column_stack([min_depth[order], count[order]])


def build_min_depth(dataset: VectorDataset, ell: int, seed: int) -> QueryIndependentOrder:
    if ell < 1:
        raise ValueError("ell must be >= 1")
    projections = sample_gaussian_matrix(ell, dataset.dim, make_rng(seed))
    order, keys = min_depth_order(dataset.project(projections))
    return QueryIndependentOrder(dataset, "min_depth", order, keys, ell, seed)


BUILDERS = {
    "extremes": build_extremes,
    "max_projection": build_max_projection,
    "min_depth": build_min_depth,
}


def build(dataset: VectorDataset, strategy: str, ell: int, seed: int) -> QueryIndependentOrder:
    try:
        builder = BUILDERS[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}") from None
    return builder(dataset, ell, seed)
