"""Exact entropies of the product-matrix source, by full enumeration.

All values are in bits.  Distributions are the ones induced by uniform
factor pairs, so H(S) is taken over distinct product matrices, which are in
general not equally likely.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .decoder import DEFAULT_BUDGET, Observation
from .errors import BudgetExceeded
from .model import (
    ModelParams,
    Semiring,
    all_factors,
    all_products,
    digit_table,
    entry_range,
    is_prime,
    iter_product_blocks,
    matrix_rank,
)
from .sampling import LocationSequence

FANO_SLACK = 1e-9


@dataclass(frozen=True)
class EntropyReport:
    value_bits: float
    support_size: int
    exact: bool = True
    method: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Lemma32Report(EntropyReport):
    bound_bits: float = 0.0
    holds: bool = True
    r: int = 0
    q: int = 0
    semiring: str = Semiring.INTEGER.value


@dataclass(frozen=True)
class FanoCheck:
    h_s_given_obs_bits: float
    pe: float
    support_size: int
    fano_rhs_bits: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def entropy_from_counts(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    total = c.sum()
    if total == 0:
        return 0.0
    return float(math.log2(total) - np.dot(c, np.log2(c)) / total)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _row_entropies(keys: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of keys, every column equally likely."""
    n_rows, width = keys.shape
    k = np.sort(keys, axis=1)
    new = np.ones_like(k, dtype=bool)
    new[:, 1:] = k[:, 1:] != k[:, :-1]
    gid = np.cumsum(new, axis=1) - 1
    flat = gid + (np.arange(n_rows) * width)[:, None]
    counts = np.bincount(flat.ravel(), minlength=n_rows * width).reshape(n_rows, width)
    clog = np.where(counts > 0, counts * np.log2(np.maximum(counts, 1)), 0.0)
    return math.log2(width) - clog.sum(axis=1) / width


def _tally_rows(blocks) -> Counter:
    tally: Counter = Counter()
    for rows in blocks:
        if rows.shape[1] == 0:
            tally[()] += len(rows)
            continue
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        for row, c in zip(uniq, counts):
            tally[tuple(row.tolist())] += int(c)
    return tally


def exact_source_entropy(params: ModelParams, budget: int = DEFAULT_BUDGET) -> EntropyReport:
    tally = _tally_rows(b for _, b in iter_product_blocks(params, budget))
    return EntropyReport(
        value_bits=entropy_from_counts(list(tally.values())),
        support_size=len(tally),
        method=f"tally of {params.n_factor_pairs} factor pairs",
    )


@dataclass(frozen=True)
class ConditionalSourceEntropy:
    h_total_bits: float
    h_given_fullrank_v_bits: float
    prob_v_fullrank: float

    def __iter__(self):
        return iter((self.h_total_bits, self.h_given_fullrank_v_bits, self.prob_v_fullrank))


def conditional_source_entropy_given_v(
    params: ModelParams, budget: int = DEFAULT_BUDGET
) -> ConditionalSourceEntropy:
    """H(UV | V), and the same average restricted to V of full row rank r.

    h_given_fullrank_v_bits is NaN when no V has rank r (q = 1 or r > m).
    """
    params.check_budget(budget)
    us, vs = all_factors(params)
    per_v = []
    fullrank = []
    for v in vs:
        prods = params.reduce(np.einsum("aik,kj->aij", us, v)).reshape(len(us), -1)
        _, counts = np.unique(prods, axis=0, return_counts=True)
        per_v.append(entropy_from_counts(counts))
        fullrank.append(matrix_rank(v.tolist(), params) == params.r)
    per_v_arr = np.array(per_v)
    mask = np.array(fullrank, dtype=bool)
    n_full = int(mask.sum())
    return ConditionalSourceEntropy(
        h_total_bits=float(per_v_arr.mean()),
        h_given_fullrank_v_bits=float(per_v_arr[mask].mean()) if n_full else math.nan,
        prob_v_fullrank=n_full / len(vs),
    )


def lemma32_bound_bits(r: int, q: int) -> float:
    return (1 - r * r / q) * math.log2(q)


def lemma32_conditional_entropy(
    r: int,
    q: int,
    semiring: Semiring | str = Semiring.INTEGER,
    budget: int = DEFAULT_BUDGET,
    condition_on: Sequence[int] | None = None,
) -> Lemma32Report:
    """H(C_r A | C_i A for i in condition_on, C) with C uniform r x r, A uniform.

    C_i is the i-th row of C.  condition_on defaults to every earlier row.
    """
    semiring = Semiring(semiring)
    if r < 1 or q < 1:
        raise ValueError("r and q must be positive")
    if semiring is Semiring.MODQ and not is_prime(q):
        raise ValueError(f"modq product needs a prime q, got {q}")
    states = q ** (r * r + r)
    if states > budget:
        raise BudgetExceeded(states, budget, what="(C, A) states")
    cond = list(range(r - 1)) if condition_on is None else sorted(set(condition_on))
    if any(not 0 <= i < r - 1 for i in cond):
        raise ValueError("condition_on must index rows before the last one")

    cs = digit_table(q, r * r).reshape(-1, r, r)
    a_all = digit_table(q, r)
    base = (q - 1) ** 2 * r + 1 if semiring is Semiring.INTEGER else q

    def encode(y: np.ndarray, rows: list[int]) -> np.ndarray:
        key = np.zeros(y.shape[:2], dtype=np.int64)
        for i in rows:
            key = key * base + y[:, :, i]
        return key

    step = max(1, (1 << 22) // (len(a_all) * r))
    total = 0.0
    target_values: set[int] = set()
    for start in range(0, len(cs), step):
        c = cs[start:start + step]
        y = np.einsum("cij,aj->cai", c, a_all)
        if semiring is Semiring.MODQ:
            y %= q
        joint = _row_entropies(encode(y, cond + [r - 1]))
        given = _row_entropies(encode(y, cond)) if cond else 0.0
        total += float(np.sum(joint - given))
        target_values.update(np.unique(y[:, :, r - 1]).tolist())
    value = total / len(cs)
    bound = lemma32_bound_bits(r, q)
    return Lemma32Report(
        value_bits=value,
        support_size=len(target_values),
        method=f"enumeration of {states} (C, A) states",
        bound_bits=bound,
        holds=value >= bound - FANO_SLACK,
        r=r,
        q=q,
        semiring=semiring.value,
    )


def observation_entropy(
    params: ModelParams, locs: LocationSequence, budget: int = DEFAULT_BUDGET
) -> EntropyReport:
    """H(Y^n | Z^n = z^n): entropy of the revealed values at fixed locations."""
    if locs.m != params.m:
        raise ValueError("location grid does not match m")
    cells = locs.flat_indices()
    tally = _tally_rows(b[:, cells] for _, b in iter_product_blocks(params, budget))
    return EntropyReport(
        value_bits=entropy_from_counts(list(tally.values())),
        support_size=len(tally),
        method=f"tally over {params.n_factor_pairs} factor pairs at {len(locs)} cells",
    )


def observation_entropy_cap(params: ModelParams, n: int) -> float:
    """n * log2(alphabet size): the per-entry ceiling on H(Y^n | Z^n)."""
    lo, hi = entry_range(params)
    return n * math.log2(hi - lo + 1)


def achieved_beta(params: ModelParams, obs_entropy_bits: float) -> float:
    """The slack beta for which H(Y^n | z^n) = 2rm(log2 q - beta) holds with equality."""
    return math.log2(params.q) - obs_entropy_bits / (2 * params.r * params.m)


def agreement_probability(
    obs: Observation, params: ModelParams, budget: int = DEFAULT_BUDGET
) -> float:
    """Probability that a fresh uniform source shows obs.values at obs.locs."""
    obs.check_range(params)
    cells = obs.locs.flat_indices()
    values = np.array(obs.values, dtype=np.int64)
    hits = 0
    for _, block in iter_product_blocks(params, budget):
        if len(cells):
            hits += int(np.all(block[:, cells] == values, axis=1).sum())
        else:
            hits += len(block)
    return hits / params.n_factor_pairs


def fano_verify(
    params: ModelParams, locs: LocationSequence, budget: int = DEFAULT_BUDGET
) -> FanoCheck:
    """Check H(S | Y, z) <= h2(pe) + pe*log2(|support| - 1) for the committed decoder.

    The committed estimate is the lexicographically least consistent product,
    which is what :func:`lowrank_itlab.decoder.decode` returns.
    """
    if locs.m != params.m:
        raise ValueError("location grid does not match m")
    products = all_products(params, budget)
    _, prod_id, prod_counts = np.unique(
        products, axis=0, return_inverse=True, return_counts=True
    )
    prod_id = prod_id.ravel()
    cells = locs.flat_indices()
    if len(cells):
        _, cls, cls_counts = np.unique(
            products[:, cells], axis=0, return_inverse=True, return_counts=True
        )
        cls = cls.ravel()
    else:
        cls = np.zeros(len(products), dtype=np.int64)
        cls_counts = np.array([len(products)])

    # Y is a function of S, so H(S | Y) = H(S) - H(Y).
    h_cond = max(0.0, entropy_from_counts(prod_counts) - entropy_from_counts(cls_counts))

    committed = np.full(cls.max() + 1, np.iinfo(np.int64).max)
    np.minimum.at(committed, cls, prod_id)
    pe = float(np.mean(committed[cls] != prod_id))

    support = len(prod_counts)
    rhs = binary_entropy(pe) + (pe * math.log2(support - 1) if support > 1 else 0.0)
    return FanoCheck(
        h_s_given_obs_bits=h_cond,
        pe=pe,
        support_size=support,
        fano_rhs_bits=rhs,
        holds=h_cond <= rhs + FANO_SLACK,
    )
