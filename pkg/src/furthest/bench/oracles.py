"""Exhaustive-scan ground truth."""

from __future__ import annotations

import numpy as np

from ..core import VectorDataset


def brute_furthest(dataset: VectorDataset, q) -> tuple[int, float]:
    """Exact furthest point from ``q``; ties go to the smaller id."""
    dists = dataset.distances(q)
    best = int(np.argmax(dists))
    return best, float(dists[best])


def brute_annulus(dataset: VectorDataset, q, r: float, w: float) -> int | None:
    """Smallest id with ``r/w <= dist(q, x) <= w r``, or None."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if not w > 1:
        raise ValueError(f"w must exceed 1, got {w}")
    dists = dataset.distances(q)
    hits = np.flatnonzero((dists >= r / w) & (dists <= w * r))
    return int(hits[0]) if hits.size else None


def in_annulus(dist: float, r: float, w: float) -> bool:
    return r / w <= dist <= w * r
