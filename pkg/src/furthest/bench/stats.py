"""Intrinsic dimensionality and the projection tail bounds behind the success guarantee."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import DegenerateDataError, VectorDataset, make_rng

_CHUNK = 100_000


def _pair_distances(dataset: VectorDataset, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    diff = dataset.data[i] - dataset.data[j]
    if dataset.is_sparse:
        return np.sqrt(np.asarray(diff.multiply(diff).sum(axis=1)).ravel())
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def rho_statistic(dataset: VectorDataset, sample_pairs: int, seed: int) -> float:
    """``mu^2 / (2 sigma^2)`` of distances between random pairs of distinct points.

    Raises DegenerateDataError when every sampled distance is equal.
    """
    n = dataset.n
    if n < 2:
        raise ValueError("need at least two points")
    if sample_pairs < 1:
        raise ValueError("need at least one pair")
    rng = make_rng(seed)
    i = rng.integers(n, size=sample_pairs)
    j = rng.integers(n - 1, size=sample_pairs)
    j += j >= i
    dists = np.concatenate([
        _pair_distances(dataset, i[s:s + _CHUNK], j[s:s + _CHUNK])
        for s in range(0, sample_pairs, _CHUNK)
    ])
    mu = float(dists.mean())
    var = float(dists.var())
    if var <= 1e-24 * max(mu * mu, 1e-300):
        raise DegenerateDataError("distance variance is zero; the statistic is undefined")
    return mu * mu / (2.0 * var)


def _log_gap(t: float, n: float, c: float) -> float:
    # log of e^(t^2/2) t^(c^2) minus log of n / (2 pi)^(c^2/2)
    c2 = c * c
    return t * t / 2.0 + c2 * math.log(t) - (math.log(n) - c2 / 2.0 * math.log(2.0 * math.pi))


def solve_t(n: float, c: float, tol: float = 1e-10) -> float:
    """Positive root of ``e^(t^2/2) t^(c^2) = n / (2 pi)^(c^2/2)`` by bisection.

    The left side increases from 0 to infinity on ``t > 0``, so the root is unique.
    """
    if not n > 1:
        raise ValueError(f"need n > 1, got {n}")
    if not c > 1:
        raise ValueError(f"c must exceed 1, got {c}")
    lo, hi = 1e-9, 10.0 * math.sqrt(math.log(n)) + 10.0
    if _log_gap(lo, n, c) > 0 or _log_gap(hi, n, c) < 0:
        raise ValueError(f"no root in [{lo}, {hi}] for n={n}, c={c}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _log_gap(mid, n, c) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class TailCheckReport:
    n: float
    c: float
    t: float
    delta: float
    trials: int
    far_rate: float
    near_rate: float
    far_bound: float  # n^(-1/c^2), the far point's lower bound up to (1 - o(1))
    near_bound: float  # (ln n)^(c^2/2 - 1/3) / n
    far_exact: float  # Pr[X >= delta] for X ~ N(0, 1)
    near_exact: float  # Pr[X >= delta / (1/c - eps)]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lemma3_montecarlo(n: float, c: float, trials: int, seed: int, eps: float = 1e-6) -> TailCheckReport:
    """Monte Carlo estimate of how often a Gaussian projection lifts the furthest
    point, and a point just inside distance ``r/c``, above the threshold ``r t / c``.

    The query sits at the origin, the far point at ``e_1`` (so ``r = 1``) and the
    near point at ``(1/c - eps) e_2``.
    """
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    t = solve_t(n, c)
    delta = t / c
    near_len = 1.0 / c - eps
    rng = make_rng(seed)
    far_hits = near_hits = 0
    for start in range(0, trials, _CHUNK):
        a = rng.standard_normal((min(_CHUNK, trials - start), 2))
        far_hits += int(np.count_nonzero(a[:, 0] >= delta))
        near_hits += int(np.count_nonzero(a[:, 1] * near_len >= delta))
    c2 = c * c
    return TailCheckReport(
        n=n,
        c=c,
        t=t,
        delta=delta,
        trials=trials,
        far_rate=far_hits / trials,
        near_rate=near_hits / trials,
        far_bound=n ** (-1.0 / c2),
        near_bound=math.log(n) ** (c2 / 2.0 - 1.0 / 3.0) / n,
        far_exact=normal_sf(delta),
        near_exact=normal_sf(delta / near_len),
    )
