"""Uniqueness decoding of a partially observed product matrix.

The decoder lists every product matrix that agrees with the revealed
entries and succeeds exactly when that list has one element.  Because U and
V are exactly uniform, every realisation is typical, so the search runs over
the full source set.  Decoding errors are judged on product matrices: two
factor pairs with the same product are the same source.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded
from .model import (
    ModelParams,
    ProductMatrix,
    SeedSpec,
    Semiring,
    all_products,
    derive_stream,
    entry_range,
    generate_source,
    iter_product_blocks,
    product,
)
from .sampling import LocationSequence, normal_ci, permuted_cells

DEFAULT_BUDGET = 10**7
DEFAULT_LOCATION_BUDGET = 10**5


@dataclass(frozen=True)
class Observation:
    locs: LocationSequence
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(int(x) for x in self.values))
        if len(self.values) != len(self.locs):
            raise ValueError(
                f"{len(self.values)} values for {len(self.locs)} observed locations"
            )

    def check_range(self, params: ModelParams) -> None:
        if self.locs.m != params.m:
            raise ValueError(f"observation grid is {self.locs.m}, model has m={params.m}")
        lo, hi = entry_range(params)
        for x in self.values:
            if not lo <= x <= hi:
                raise ValueError(f"observed value {x} outside [{lo}, {hi}]")


def observe(s: ProductMatrix, locs: LocationSequence) -> Observation:
    return Observation(locs, tuple(s[cell] for cell in locs))


class OutcomeKind(str, enum.Enum):
    UNIQUE = "unique"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class DecodeOutcome:
    kind: OutcomeKind
    reconstruction: ProductMatrix
    consistent_count: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "reconstruction": [list(row) for row in self.reconstruction.s],
            "consistent_count": self.consistent_count,
        }


class ErrorMode(str, enum.Enum):
    EXACT = "exact"
    MC = "mc"


@dataclass(frozen=True)
class ErrorRateReport:
    m: int
    r: int
    q: int
    semiring: str
    n: int
    mode: ErrorMode
    pe: float
    failures: int
    trials: int
    n_sources: int | None = None
    n_subsets: int | None = None
    ci95: tuple[float, float] | None = None
    coverage_failures: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        if self.ci95 is not None:
            d["ci95"] = list(self.ci95)
        return d


def _to_products(rows: np.ndarray, m: int) -> tuple[ProductMatrix, ...]:
    return tuple(ProductMatrix(row.reshape(m, m).tolist()) for row in rows)


def enumerate_consistent(
    obs: Observation, params: ModelParams, budget: int = DEFAULT_BUDGET
) -> tuple[ProductMatrix, ...]:
    """Brute force: scan every factor pair and keep the distinct agreeing products."""
    obs.check_range(params)
    cells = obs.locs.flat_indices()
    values = np.array(obs.values, dtype=np.int64)
    found = []
    for _, block in iter_product_blocks(params, budget):
        keep = np.all(block[:, cells] == values, axis=1) if len(cells) else slice(None)
        hits = block[keep]
        if len(hits):
            found.append(np.unique(hits, axis=0))
    if not found:
        return ()
    return _to_products(np.unique(np.concatenate(found), axis=0), params.m)


class _Search:
    """Backtracking over whole rows of U and columns of V.

    Blocks are ordered greedily so observed cells are completed as early as
    possible; a partial assignment is dropped as soon as any completed cell
    disagrees with its observed value.
    """

    def __init__(self, obs: Observation, params: ModelParams):
        self.params = params
        m, r, q = params.m, params.r, params.q
        self.candidates = list(itertools.product(range(q), repeat=r))
        observed = {cell: y for cell, y in zip(obs.locs, obs.values)}

        blocks = [("u", i) for i in range(m)] + [("v", j) for j in range(m)]
        degree = {b: 0 for b in blocks}
        for i, j in observed:
            degree[("u", i)] += 1
            degree[("v", j)] += 1
        order: list[tuple[str, int]] = []
        placed: set[tuple[str, int]] = set()
        remaining = list(blocks)
        while remaining:

            def gain(b):
                kind, k = b
                other = "v" if kind == "u" else "u"
                done = sum(
                    1
                    for (i, j) in observed
                    if (kind == "u" and i == k and (other, j) in placed)
                    or (kind == "v" and j == k and (other, i) in placed)
                )
                return (done, degree[b])

            best = max(remaining, key=gain)
            remaining.remove(best)
            placed.add(best)
            order.append(best)

        self.order = order
        self.checks: list[list[tuple[int, int, int]]] = []
        seen: set[tuple[str, int]] = set()
        for kind, k in order:
            seen.add((kind, k))
            checks = []
            for (i, j), y in observed.items():
                if (kind == "u" and i == k and ("v", j) in seen) or (
                    kind == "v" and j == k and ("u", i) in seen
                ):
                    checks.append((i, j, y))
            self.checks.append(checks)
        self.u: list[tuple[int, ...] | None] = [None] * m
        self.v: list[tuple[int, ...] | None] = [None] * m

    def _cell(self, i: int, j: int) -> int:
        u, v = self.u[i], self.v[j]
        x = sum(a * b for a, b in zip(u, v))
        return x % self.params.q if self.params.semiring is Semiring.MODQ else x

    def run(self, limit: int | None = None) -> set[tuple[int, ...]]:
        found: set[tuple[int, ...]] = set()
        m = self.params.m
        depth_max = len(self.order)

        def leaf() -> None:
            found.add(tuple(self._cell(i, j) for i in range(m) for j in range(m)))

        def visit(depth: int) -> bool:
            if depth == depth_max:
                leaf()
                return limit is not None and len(found) >= limit
            kind, k = self.order[depth]
            slot = self.u if kind == "u" else self.v
            checks = self.checks[depth]
            for cand in self.candidates:
                slot[k] = cand
                if all(self._cell(i, j) == y for i, j, y in checks):
                    if visit(depth + 1):
                        slot[k] = None
                        return True
            slot[k] = None
            return False

        visit(0)
        return found


def pruned_consistent(
    obs: Observation, params: ModelParams, budget: int = DEFAULT_BUDGET
) -> tuple[ProductMatrix, ...]:
    """Same contract as :func:`enumerate_consistent`, via pruned backtracking."""
    params.check_budget(budget)
    obs.check_range(params)
    found = _Search(obs, params).run()
    m = params.m
    return tuple(
        ProductMatrix([row[i * m:(i + 1) * m] for i in range(m)]) for row in sorted(found)
    )


def decode(obs: Observation, params: ModelParams, budget: int = DEFAULT_BUDGET) -> DecodeOutcome:
    consistent = pruned_consistent(obs, params, budget)
    kind = OutcomeKind.UNIQUE if len(consistent) == 1 else OutcomeKind.AMBIGUOUS
    return DecodeOutcome(kind, consistent[0], len(consistent))


def is_unique(obs: Observation, params: ModelParams, budget: int = DEFAULT_BUDGET) -> bool:
    """True when exactly one product matches; stops at the second distinct match."""
    params.check_budget(budget)
    return len(_Search(obs, params).run(limit=2)) == 1


def _check_location_budget(m: int, n: int, location_budget: int) -> int:
    count = math.comb(m * m, n)
    if count > location_budget:
        raise BudgetExceeded(count, location_budget, what="location subsets")
    return count


def class_failures(products: np.ndarray, cells: Sequence[int]) -> np.ndarray:
    """Per-source failure indicator for one observed cell set.

    Sources sharing the same observed values form one class; every source in
    a class holding two or more distinct products is decoded as ambiguous.
    """
    _, prod_id = np.unique(products, axis=0, return_inverse=True)
    prod_id = prod_id.ravel()
    if len(cells) == 0:
        cls = np.zeros(len(products), dtype=np.int64)
    else:
        _, cls = np.unique(products[:, list(cells)], axis=0, return_inverse=True)
        cls = cls.ravel()
    pairs = np.unique(cls * (prod_id.max() + 1) + prod_id)
    distinct_per_class = np.bincount(pairs // (prod_id.max() + 1), minlength=cls.max() + 1)
    return distinct_per_class[cls] > 1


def exact_error_rate(
    params: ModelParams,
    n: int,
    budget: int = DEFAULT_BUDGET,
    location_budget: int = DEFAULT_LOCATION_BUDGET,
) -> ErrorRateReport:
    """P_e averaged uniformly over all factor pairs and all n-subsets of cells."""
    if not 0 <= n <= params.n_cells:
        raise ValueError(f"n={n} outside [0, {params.n_cells}]")
    n_subsets = _check_location_budget(params.m, n, location_budget)
    products = all_products(params, budget)
    failures = 0
    for cells in itertools.combinations(range(params.n_cells), n):
        failures += int(class_failures(products, cells).sum())
    total = len(products) * n_subsets
    return ErrorRateReport(
        m=params.m,
        r=params.r,
        q=params.q,
        semiring=params.semiring.value,
        n=n,
        mode=ErrorMode.EXACT,
        pe=failures / total,
        failures=failures,
        trials=total,
        n_sources=len(products),
        n_subsets=n_subsets,
    )


def trial_draw(
    params: ModelParams, master_seed: int, keys: tuple[int, ...]
) -> tuple[ProductMatrix, np.ndarray]:
    """Source product and cell permutation for one Monte Carlo trial."""
    pair = generate_source(params, SeedSpec(master_seed, derive_stream(*keys, 0)))
    perm = permuted_cells(params.m, SeedSpec(master_seed, derive_stream(*keys, 1)))
    return product(pair, params), perm


def mc_failure_counts(
    params: ModelParams,
    n_grid: Sequence[int],
    trial_ids: Iterable[int],
    master_seed: int,
    stream_prefix: tuple[int, ...] = (),
    budget: int = DEFAULT_BUDGET,
) -> tuple[list[int], list[int]]:
    """Decoding and coverage failure counts per grid point over the given trials.

    Every trial draws one source and one cell permutation; grid point n
    observes the first n cells, so observation sets are nested along the grid.
    """
    params.check_budget(budget)
    m = params.m
    fails = [0] * len(n_grid)
    cov_fails = [0] * len(n_grid)
    for t in trial_ids:
        s, perm = trial_draw(params, master_seed, (*stream_prefix, t))
        for k, n in enumerate(n_grid):
            locs = LocationSequence.from_flat(m, perm[:n])
            if not is_unique(observe(s, locs), params, budget):
                fails[k] += 1
            rows = np.bincount(perm[:n] // m, minlength=m)
            cols = np.bincount(perm[:n] % m, minlength=m)
            if rows.min() < params.r or cols.min() < params.r:
                cov_fails[k] += 1
    return fails, cov_fails


def mc_error_curve(
    params: ModelParams,
    n_grid: Sequence[int],
    trials: int,
    seed: int,
    budget: int = DEFAULT_BUDGET,
) -> list[ErrorRateReport]:
    for n in n_grid:
        if not 0 <= n <= params.n_cells:
            raise ValueError(f"n={n} outside [0, {params.n_cells}]")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    fails, cov = mc_failure_counts(params, n_grid, range(trials), seed, budget=budget)
    return [
        ErrorRateReport(
            m=params.m,
            r=params.r,
            q=params.q,
            semiring=params.semiring.value,
            n=n,
            mode=ErrorMode.MC,
            pe=f / trials,
            failures=f,
            trials=trials,
            ci95=normal_ci(f, trials),
            coverage_failures=c,
        )
        for n, f, c in zip(n_grid, fails, cov)
    ]


def mc_error_rate(
    params: ModelParams, n: int, trials: int, seed: int, budget: int = DEFAULT_BUDGET
) -> ErrorRateReport:
    return mc_error_curve(params, [n], trials, seed, budget)[0]
