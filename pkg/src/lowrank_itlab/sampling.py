"""Random observation patterns, the coverage event, and balls-in-bins tails.

Sampling is without replacement: a seeded permutation of the m*m cells is
drawn and its first n entries are the observed locations, so samples with
the same seed are nested prefixes of each other.  The analysis side uses
the with-replacement binomial model (each of n balls lands in a given row
with probability 1/m).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionFailed
from .model import SeedSpec

Z_95 = 1.959963984540054
Z_99 = 2.5758293035489004


@dataclass(frozen=True)
class LocationSequence:
    m: int
    locations: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        locs = tuple((int(i), int(j)) for i, j in self.locations)
        object.__setattr__(self, "locations", locs)
        if self.m < 1:
            raise ValueError("m must be positive")
        if len(locs) > self.m * self.m:
            raise ValueError(f"{len(locs)} locations exceed the {self.m * self.m} cells")
        for i, j in locs:
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise ValueError(f"location {(i, j)} outside a {self.m}x{self.m} grid")
        if len(set(locs)) != len(locs):
            raise ValueError("locations must be distinct")

    def __len__(self) -> int:
        return len(self.locations)

    def __iter__(self):
        return iter(self.locations)

    def prefix(self, n: int) -> "LocationSequence":
        return LocationSequence(self.m, self.locations[:n])

    def flat_indices(self) -> np.ndarray:
        return np.array([i * self.m + j for i, j in self.locations], dtype=np.int64)

    @classmethod
    def from_flat(cls, m: int, cells: Sequence[int]) -> "LocationSequence":
        return cls(m, tuple((int(c) // m, int(c) % m) for c in cells))


def permuted_cells(m: int, seed: SeedSpec) -> np.ndarray:
    """A seeded uniform permutation of the flat cell indices 0..m*m-1."""
    return seed.rng().permutation(m * m)


def sample_locations(m: int, n: int, seed: SeedSpec) -> LocationSequence:
    if not 0 <= n <= m * m:
        raise ValueError(f"cannot sample {n} distinct cells from a {m}x{m} grid")
    return LocationSequence.from_flat(m, permuted_cells(m, seed)[:n])


@dataclass(frozen=True)
class CoverageStats:
    row_counts: tuple[int, ...]
    col_counts: tuple[int, ...]
    min_row: int
    min_col: int
    in_G: bool


def coverage_counts(m: int, flat_cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat_cells = np.asarray(flat_cells, dtype=np.int64)
    rows = np.bincount(flat_cells // m, minlength=m)
    cols = np.bincount(flat_cells % m, minlength=m)
    return rows, cols


def coverage_check(locs: LocationSequence, r: int) -> CoverageStats:
    rows, cols = coverage_counts(locs.m, locs.flat_indices())
    min_row, min_col = int(rows.min()), int(cols.min())
    return CoverageStats(
        row_counts=tuple(int(x) for x in rows),
        col_counts=tuple(int(x) for x in cols),
        min_row=min_row,
        min_col=min_col,
        in_G=min_row >= r and min_col >= r,
    )


def binomial_tail_below(n: int, p: float, r: int) -> float:
    """Exact Pr(Binomial(n, p) < r), summed in log space."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be a probability, got {p}")
    if r <= 0:
        return 0.0
    if r > n:
        return 1.0
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    log_p, log_q = math.log(p), math.log1p(-p)
    lg_n = math.lgamma(n + 1)
    terms = [
        math.exp(lg_n - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * log_p + (n - k) * log_q)
        for k in range(r)
    ]
    return min(1.0, math.fsum(terms))


def chernoff_lower_tail(mean: float, r: float) -> float:
    """exp(-(mean/2)(1 - r/mean)^2), the multiplicative Chernoff bound on Pr(X < r)."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if r > mean:
        raise PreconditionFailed(f"Chernoff lower tail needs r <= mean, got r={r} > {mean}")
    if r == 0:
        return math.exp(-mean / 2)
    return math.exp(-(mean / 2) * (1 - r / mean) ** 2)


@dataclass(frozen=True)
class ChernoffBound:
    value: float
    simplified: float
    mean: float


def chernoff_bin_bound(m: int, r: int, alpha: float) -> ChernoffBound:
    """Per-bin bound with mean alpha*ln(m) balls, plus the simplified m^(-alpha/2)."""
    mean = alpha * math.log(m)
    return ChernoffBound(
        value=chernoff_lower_tail(mean, r),
        simplified=m ** (-alpha / 2),
        mean=mean,
    )


def normal_ci(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    p = successes / trials
    half = z * math.sqrt(p * (1 - p) / trials)
    return max(0.0, p - half), min(1.0, p + half)


def alpha_sample_count(m: int, alpha: float) -> int:
    """ceil(alpha * m * ln m), clamped to the m*m cells."""
    return min(m * m, math.ceil(alpha * m * math.log(m)))


@dataclass(frozen=True)
class BinsReport:
    m: int
    r: int
    alpha: float
    n_used: int
    exact_marginal_tail: float
    chernoff_bound: float | None
    paper_bound: float
    union_reference: float
    mc_estimate: float
    mc_ci95: tuple[float, float]
    trials: int
    seed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mc_ci95"] = list(self.mc_ci95)
        return d


def coverage_failures(m: int, n: int, r: int, trials: int, master_seed: int) -> int:
    """Count trials whose without-replacement n-sample misses G_n."""
    failures = 0
    for t in range(trials):
        cells = permuted_cells(m, SeedSpec(master_seed, t))[:n]
        rows, cols = coverage_counts(m, cells)
        if rows.min() < r or cols.min() < r:
            failures += 1
    return failures


def coverage_failure_report(
    m: int, r: int, alpha: float, trials: int, seed: int
) -> BinsReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n_used = alpha_sample_count(m, alpha)
    tail = binomial_tail_below(n_used, 1.0 / m, r)
    try:
        chernoff = chernoff_bin_bound(m, r, alpha).value
    except PreconditionFailed:
        chernoff = None
    failures = coverage_failures(m, n_used, r, trials, seed)
    return BinsReport(
        m=m,
        r=r,
        alpha=alpha,
        n_used=n_used,
        exact_marginal_tail=tail,
        chernoff_bound=chernoff,
        paper_bound=2 * m * m ** (-alpha / 2),
        union_reference=2 * m * tail,
        mc_estimate=failures / trials,
        mc_ci95=normal_ci(failures, trials),
        trials=trials,
        seed=seed,
    )
