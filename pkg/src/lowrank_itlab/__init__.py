"""Desk-scale laboratory for information-theoretic low-rank matrix completion.

The source is S = UV with U (m x r) and V (r x m) drawn uniformly from
{0, ..., q-1}; a random subset of n entries is revealed and a decoder tries
to recover S.  Everything here is exact enumeration or seeded Monte Carlo.
"""

from .errors import BudgetExceeded, NoCrossing, PreconditionFailed
from .model import (
    FactorPair,
    ModelParams,
    ProductMatrix,
    SeedSpec,
    Semiring,
    entry_range,
    enumerate_all_sources,
    generate_source,
    product,
)

__all__ = [
    "BudgetExceeded",
    "NoCrossing",
    "PreconditionFailed",
    "FactorPair",
    "ModelParams",
    "ProductMatrix",
    "SeedSpec",
    "Semiring",
    "entry_range",
    "enumerate_all_sources",
    "generate_source",
    "product",
]

__version__ = "0.1.0"
