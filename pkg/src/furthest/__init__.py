"""Approximate furthest neighbor search by random projections, and approximate
annulus queries built on top of it."""

from .core import (
    DegenerateDataError,
    DimensionMismatchError,
    SparseVector,
    VectorDataset,
    dot,
    l2_distance,
    make_rng,
    sample_gaussian_vector,
    sample_unit_vector,
)
from .query_dependent import AfnParams, ProjectionIndex, QueryResult, default_params
from .query_independent import QueryIndependentOrder, query_prefix
from .annulus import AnnulusIndex, AnnulusParams, derive_params

__version__ = "0.1.0"
