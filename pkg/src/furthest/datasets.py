"""Synthetic generators and file loaders.

Two on-disk formats are handled:

* ascii vectors: one point per line, whitespace-separated decimals, with an
  optional ``n d`` header line. This is the normalized form of SISAP vector
  databases (convert the library's files to it before loading).
* binary ``.npz`` datasets written by :func:`save_dataset` (dense or sparse),
  used for MovieLens after conversion.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import VectorDataset, make_rng

KINDS = {"uniform_cube": "uniform_cube", "uniform": "uniform_cube",
         "multivariate_normal": "multivariate_normal", "normal": "multivariate_normal"}

MOVIELENS_HEADER = ["userId", "movieId", "rating", "timestamp"]


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    d: int
    seed: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 and d >= 1")


def generate(spec: GeneratorSpec) -> VectorDataset:
    rng = make_rng(spec.seed)
    kind = KINDS[spec.kind]
    if kind == "uniform_cube":
        data = rng.random((spec.n, spec.d))
    else:
        data = rng.standard_normal((spec.n, spec.d))
    return VectorDataset(data, name=f"{kind}-n{spec.n}-d{spec.d}-s{spec.seed}")


# --- ascii vectors -----------------------------------------------------------


def _is_int_token(tok: str) -> bool:
    return tok.lstrip("+-").isdigit()


def _parse_rows(lines):
    rows = []
    for lineno, line in lines:
        values = []
        for col, tok in enumerate(line.split(), start=1):
            try:
                values.append(float(tok))
            except ValueError:
                raise DataFormatError(f"line {lineno}, column {col}: not a number: {tok!r}") from None
        rows.append((lineno, values))
    return rows


def load_vectors(path, header: bool | None = None, name: str | None = None) -> VectorDataset:
    """Read an ascii-vectors file.

    With ``header=None`` a first line holding exactly two integers ``n d`` is
    taken as a header when ``n >= 2`` and the remaining lines are exactly ``n``
    rows of ``d`` values; otherwise it is read as a data row. Pass ``header``
    explicitly to override the detection.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    first = lines[0][1].split()
    looks_like_header = len(first) == 2 and all(_is_int_token(t) for t in first)
    if header is None:
        header = False
        if looks_like_header:
            n_decl, d_decl = int(first[0]), int(first[1])
            rest = lines[1:]
            header = n_decl >= 2 and len(rest) == n_decl and all(len(ln.split()) == d_decl for _, ln in rest)
    elif header and not looks_like_header:
        raise DataFormatError(f"{path}: line {lines[0][0]}: expected an 'n d' header")
    if header:
        lines = lines[1:]
        if not lines:
            raise DataFormatError(f"{path}: header but no data")
    rows = _parse_rows(lines)
    dim = len(rows[0][1])
    for lineno, values in rows:
        if len(values) != dim:
            raise DataFormatError(f"{path}: line {lineno}: expected {dim} values, found {len(values)}")
    return VectorDataset(np.array([v for _, v in rows]), name=name or Path(path).stem)


def save_vectors(dataset: VectorDataset, path, header: bool = False) -> None:
    """Write ``dataset`` as ascii vectors; ``repr`` formatting round-trips exactly."""
    data = dataset.to_dense()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"{dataset.n} {dataset.dim}\n")
        for row in data:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


# --- binary datasets ---------------------------------------------------------


def save_dataset(dataset: VectorDataset, path) -> None:
    with open(path, "wb") as fh:
        if dataset.is_sparse:
            sp.save_npz(fh, dataset.data, compressed=True)
        else:
            np.savez_compressed(fh, dense=np.asarray(dataset.data))


def load_dataset(path, name: str | None = None) -> VectorDataset:
    """Load a binary ``.npz`` dataset or an ascii-vectors file, by content."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic != b"PK\x03\x04":
        return load_vectors(path, name=name)
    with np.load(path, allow_pickle=False) as z:
        if "dense" in z.files:
            return VectorDataset(z["dense"], name=name or path.stem)
    return VectorDataset(sp.load_npz(path), name=name or path.stem)


# --- MovieLens ---------------------------------------------------------------


@dataclass
class MovieLensData:
    """One sparse point per movie; coordinates are users.

    ``movie_ids[i]`` is the original movieId of point ``i`` and ``user_ids[u]``
    the original userId of coordinate ``u``, both in order of first appearance.
    """

    dataset: VectorDataset
    movie_ids: list
    user_ids: list
    duplicates: int = 0


def load_movielens(path) -> MovieLensData:
    """Read a MovieLens ``ratings.csv`` into sparse movie vectors.

    Ratings are used as-is. A repeated (user, movie) pair keeps the last rating
    and triggers a warning.
    """
    users: dict[int, int] = {}
    movies: dict[int, int] = {}
    rows, cols, vals = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or [h.strip() for h in head[:3]] != MOVIELENS_HEADER[:3]:
            raise DataFormatError(f"{path}: missing header 'userId,movieId,rating,timestamp'")
        for rowno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                user, movie, rating = int(rec[0]), int(rec[1]), float(rec[2])
            except (ValueError, IndexError):
                raise DataFormatError(f"{path}: row {rowno}: malformed record {rec!r}") from None
            if not np.isfinite(rating):
                raise DataFormatError(f"{path}: row {rowno}: rating is not finite")
            cols.append(users.setdefault(user, len(users)))
            rows.append(movies.setdefault(movie, len(movies)))
            vals.append(rating)
    if not vals:
        raise DataFormatError(f"{path}: no ratings")
    rows_a = np.array(rows, dtype=np.int64)
    cols_a = np.array(cols, dtype=np.int64)
    vals_a = np.array(vals)
    # Keep the last occurrence of each (movie, user) pair.
    order = np.lexsort((np.arange(rows_a.size), cols_a, rows_a))
    r, c = rows_a[order], cols_a[order]
    last = np.ones(order.size, dtype=bool)
    last[:-1] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    duplicates = int(order.size - last.sum())
    if duplicates:
        warnings.warn(f"{path}: {duplicates} repeated (user, movie) ratings; kept the last", stacklevel=2)
    keep = order[last]
    mat = sp.csr_matrix((vals_a[keep], (rows_a[keep], cols_a[keep])), shape=(len(movies), len(users)))
    return MovieLensData(
        VectorDataset(mat, name=Path(path).stem),
        list(movies),
        list(users),
        duplicates,
    )


def write_id_map(path, original_ids) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["internal_id", "original_movieId"])
        for i, orig in enumerate(original_ids):
            writer.writerow([i, orig])
