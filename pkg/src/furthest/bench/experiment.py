"""Seeded approximation-factor experiments and annulus success-rate runs.

A furthest neighbor experiment sweeps ``(ell, m)`` cells. For every cell and
each seed index ``s`` an index is built from the seed derived from
``(master_seed, ell, s)`` and queried at ``queries_per_seed`` dataset points
drawn from the stream ``(master_seed, s)``. Cells sharing ``ell`` therefore share
the index and the queries, and records do not depend on the order in which
cells are evaluated.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .. import query_independent as qi
from ..annulus import AnnulusIndex, AnnulusParams
from ..core import VectorDataset, derive_seed, make_rng
from ..query_dependent import AfnParams, ProjectionIndex
from .oracles import brute_annulus, brute_furthest

VARIANTS = {
    "qd": None,
    "qi-extremes": "extremes",
    "qi-maxproj": "max_projection",
    "qi-depth": "min_depth",
}

# Stream tags; keep stable so seeded output does not change between releases.
_INDEX_STREAM, _QUERY_STREAM, _INSTANCE_STREAM, _ANNULUS_INDEX_STREAM = 0, 1, 2, 3


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentRecord:
    dataset: str
    variant: str
    ell: int
    m: int
    seed: int
    query_id: int
    returned_id: int
    returned_distance: float
    true_distance: float
    c_hat: float
    candidates_examined: int
    wall_time: float


@dataclass(frozen=True)
class SummaryRow:
    variant: str
    ell: int
    m: int
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


@dataclass
class ExperimentConfig:
    dataset: VectorDataset
    variant: str
    cells: Sequence[tuple[int, int]]
    seeds: int
    queries_per_seed: int
    master_seed: int = 0
    record_timing: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")
        if not self.cells:
            raise ValueError("empty (ell, m) grid")
        for ell, m in self.cells:
            if ell < 1 or m < 1:
                raise ValueError(f"invalid cell ell={ell}, m={m}")
        if self.seeds < 1 or self.queries_per_seed < 1:
            raise ValueError("need at least one seed and one query per seed")


@dataclass
class ExperimentResult:
    records: list[ExperimentRecord]
    summary: list[SummaryRow]

    def medians(self) -> dict[tuple[int, int], float]:
        return {(row.ell, row.m): row.median for row in self.summary}


def approximation_factor(true_distance: float, returned_distance: float) -> float:
    if returned_distance == true_distance:
        return 1.0
    if returned_distance <= 0.0:
        return math.inf
    return true_distance / returned_distance


def zip_cells(ells: Iterable[int], ms: Iterable[int]) -> list[tuple[int, int]]:
    ells, ms = list(ells), list(ms)
    if len(ells) != len(ms):
        raise ValueError("zipped grids must have equal length")
    return list(zip(ells, ms))


def product_cells(ells: Iterable[int], ms: Iterable[int]) -> list[tuple[int, int]]:
    ms = list(ms)
    return [(ell, m) for ell in ells for m in ms]


def fixed_product_cells(product: int, ms: Iterable[int]) -> list[tuple[int, int]]:
    cells = []
    for m in ms:
        if product % m:
            raise ValueError(f"m={m} does not divide ell*m={product}")
        cells.append((product // m, m))
    return cells


def ratio_cells(ells: Iterable[int], ratio: int = 4) -> list[tuple[int, int]]:
    """Every ``m`` from 1 to ``ratio * ell`` for each ``ell``."""
    return [(ell, m) for ell in ells for m in range(1, ratio * ell + 1)]


def _query_ids(config: ExperimentConfig, s: int) -> np.ndarray:
    rng = make_rng(config.master_seed, _QUERY_STREAM, s)
    return rng.integers(config.dataset.n, size=config.queries_per_seed)


def _timed(fn, enabled: bool):
    if not enabled:
        return fn(), 0.0
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    ds = config.dataset
    name = ds.name or "dataset"
    strategy = VARIANTS[config.variant]
    cells = list(config.cells)
    by_ell: dict[int, list[int]] = {}
    for pos, (ell, _) in enumerate(cells):
        by_ell.setdefault(ell, []).append(pos)

    truth: dict[int, tuple[int, float]] = {}
    per_cell: list[list[ExperimentRecord]] = [[] for _ in cells]
    queries = [_query_ids(config, s) for s in range(config.seeds)]

    for ell, positions in by_ell.items():
        m_max = max(cells[p][1] for p in positions)
        for s in range(config.seeds):
            seed = derive_seed(config.master_seed, _INDEX_STREAM, ell, s)
            if strategy is None:
                index = ProjectionIndex.build(ds, AfnParams(ell, m_max), seed)
            else:
                index = qi.build(ds, strategy, ell, seed)
            for qid in queries[s]:
                qid = int(qid)
                q = ds.point(qid)
                if qid not in truth:
                    truth[qid] = brute_furthest(ds, q)
                _, true_dist = truth[qid]
                for p in positions:
                    m = cells[p][1]
                    if strategy is None:
                        res, elapsed = _timed(lambda: index.query(q, m), config.record_timing)
                    else:
                        res, elapsed = _timed(lambda: index.query_prefix(q, m), config.record_timing)
                    rec = ExperimentRecord(
                        name, config.variant, ell, m, seed, qid, res.point_id, res.distance,
                        true_dist, approximation_factor(true_dist, res.distance),
                        res.candidates_examined, elapsed,
                    )
                    _check_record(rec)
                    per_cell[p].append(rec)

    records = [rec for cell in per_cell for rec in cell]
    return ExperimentResult(records, summarize(records))


def _check_record(rec: ExperimentRecord) -> None:
    if rec.returned_distance > rec.true_distance + 1e-9 or rec.c_hat < 1 - 1e-12:
        raise InvariantViolation(
            f"returned distance {rec.returned_distance} exceeds the exact furthest "
            f"distance {rec.true_distance} (query {rec.query_id})"
        )


def nearest_rank(sorted_values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile ``p`` in [0, 1] of an ascending sequence."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(p * n))
    return float(sorted_values[rank - 1])


def summarize(records: Iterable[ExperimentRecord]) -> list[SummaryRow]:
    groups: dict[tuple[str, int, int], list[float]] = {}
    for rec in records:
        groups.setdefault((rec.variant, rec.ell, rec.m), []).append(rec.c_hat)
    rows = []
    for (variant, ell, m), values in groups.items():
        v = sorted(values)
        rows.append(SummaryRow(
            variant, ell, m, len(v), v[0], nearest_rank(v, 0.25), nearest_rank(v, 0.5),
            nearest_rank(v, 0.75), v[-1], math.fsum(v) / len(v),
        ))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, rows: Sequence, row_type) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f.name for f in fields(row_type)])
        for row in rows:
            writer.writerow([_fmt(v) for v in astuple(row)])


def write_records(path, records: Sequence[ExperimentRecord]) -> None:
    write_csv(path, records, ExperimentRecord)


def write_summary(path, rows: Sequence[SummaryRow]) -> None:
    write_csv(path, rows, SummaryRow)


# --- annulus -----------------------------------------------------------------


def planted_annulus_instance(n: int, d: int, r: float, w: float, c: float, seed: int):
    """A dataset with exactly one point in ``A(q, r, w)`` and every other point
    outside ``A(q, r, c w)``.

    The query is the origin. Point 0 is the witness at distance ``r``; the rest
    are split between a near cluster within ``r/(2 c w)`` and a far shell between
    ``2 c w r`` and ``4 c w r``, each in a uniformly random direction. Returns
    ``(dataset, query, witness_id)``.
    """
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    rng = make_rng(seed)
    directions = rng.standard_normal((n, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.empty(n)
    radii[0] = r
    rest = n - 1
    n_near = rest // 2
    radii[1:1 + n_near] = rng.uniform(0.0, r / (2 * c * w), size=n_near)
    radii[1 + n_near:] = rng.uniform(2 * c * w * r, 4 * c * w * r, size=rest - n_near)
    points = directions * radii[:, None]
    return VectorDataset(points, name=f"planted-n{n}-d{d}"), np.zeros(d), 0


@dataclass(frozen=True)
class AnnulusRecord:
    trial: int
    repetition: int
    seed: int
    query_id: int
    witness_id: int
    returned_id: int
    returned_distance: float
    candidates_examined: int
    status: str
    success: bool
    sound: bool


@dataclass
class AnnulusSummary:
    trials: int
    with_witness: int
    successes: int
    amplified_successes: int
    nulls: int
    soundness_violations: int
    mean_candidates: float
    repetitions: int
    cap: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.with_witness if self.with_witness else float("nan")

    @property
    def amplified_success_rate(self) -> float:
        return self.amplified_successes / self.with_witness if self.with_witness else float("nan")

    @property
    def null_rate(self) -> float:
        return self.nulls / self.trials if self.trials else float("nan")


@dataclass
class AnnulusExperimentConfig:
    params: AnnulusParams
    trials: int
    master_seed: int = 0
    repetitions: int = 1
    queries_per_trial: int = 1
    dataset: VectorDataset | None = None  # None: a fresh planted instance per trial
    planted_n: int = 10_000
    planted_d: int = 10

    def __post_init__(self):
        if self.trials < 1 or self.repetitions < 1 or self.queries_per_trial < 1:
            raise ValueError("trials, repetitions and queries_per_trial must be >= 1")
        if self.dataset is None and self.queries_per_trial != 1:
            raise ValueError("a planted instance has a single query")


def run_annulus_experiment(config: AnnulusExperimentConfig) -> tuple[list[AnnulusRecord], AnnulusSummary]:
    """Per trial: build ``repetitions`` independent indexes, query them, and
    score the answers against the exhaustive annulus scan.

    A query succeeds when the first index returns a point of ``A(q, r, c w)``;
    it succeeds after amplification when any of the indexes does. Only queries
    with a point in ``A(q, r, w)`` count towards the success rates.
    """
    p = config.params
    records: list[AnnulusRecord] = []
    with_witness = successes = amplified = nulls = violations = 0
    candidates = queries_run = 0
    for trial in range(config.trials):
        if config.dataset is None:
            ds, q, _ = planted_annulus_instance(
                config.planted_n, config.planted_d, p.r, p.w, p.c,
                derive_seed(config.master_seed, _INSTANCE_STREAM, trial),
            )
            queries = [(-1, q)]  # the query is not a dataset point
        else:
            ds = config.dataset
            rng = make_rng(config.master_seed, _QUERY_STREAM, trial)
            queries = [(int(i), ds.point(int(i))) for i in rng.integers(ds.n, size=config.queries_per_trial)]
        witnesses = [brute_annulus(ds, q, p.r, p.w) for _, q in queries]
        any_success = [False] * len(queries)
        for rep in range(config.repetitions):
            seed = derive_seed(config.master_seed, _ANNULUS_INDEX_STREAM, trial, rep)
            index = AnnulusIndex.build(ds, p, seed)
            for j, ((qid, q), witness) in enumerate(zip(queries, witnesses)):
                res = index.query(q)
                sound = res.point_id is None or p.inner <= res.distance <= p.outer
                success = res.point_id is not None and sound
                violations += not sound
                if rep == 0:
                    queries_run += 1
                    nulls += res.point_id is None
                    candidates += res.candidates_examined
                    if witness is not None:
                        with_witness += 1
                        successes += success
                any_success[j] = any_success[j] or success
                records.append(AnnulusRecord(
                    trial, rep, seed, qid, -1 if witness is None else witness,
                    -1 if res.point_id is None else res.point_id,
                    float("nan") if res.distance is None else res.distance,
                    res.candidates_examined, res.status, success, sound,
                ))
        amplified += sum(ok for ok, wit in zip(any_success, witnesses) if wit is not None)
    summary = AnnulusSummary(
        trials=queries_run,
        with_witness=with_witness,
        successes=successes,
        amplified_successes=amplified,
        nulls=nulls,
        soundness_violations=violations,
        mean_candidates=candidates / queries_run,
        repetitions=config.repetitions,
        cap=p.cap,
    )
    return records, summary


def write_annulus_records(path, records: Sequence[AnnulusRecord]) -> None:
    write_csv(path, records, AnnulusRecord)
