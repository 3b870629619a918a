"""The matrix source S = UV over a finite alphabet.

Entries of U (m x r) and V (r x m) live in {0, ..., q-1}.  The product is
taken over the integers by default, or modulo a prime q.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceeded

Matrix = tuple[tuple[int, ...], ...]

# Upper bound on the number of int64 cells materialised per enumeration block.
BLOCK_CELLS = 1 << 22


class Semiring(str, enum.Enum):
    INTEGER = "integer"
    MODQ = "modq"


def is_prime(k: int) -> bool:
    if k < 2:
        return False
    if k % 2 == 0:
        return k == 2
    d = 3
    while d * d <= k:
        if k % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class ModelParams:
    m: int
    r: int
    q: int
    semiring: Semiring = Semiring.INTEGER

    def __post_init__(self) -> None:
        object.__setattr__(self, "semiring", Semiring(self.semiring))
        for name in ("m", "r", "q"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.semiring is Semiring.MODQ and not is_prime(self.q):
            raise ValueError(f"modq product needs a prime alphabet size, got q={self.q}")

    @property
    def n_factor_pairs(self) -> int:
        return self.q ** (2 * self.r * self.m)

    @property
    def n_cells(self) -> int:
        return self.m * self.m

    def check_budget(self, budget: int) -> None:
        if self.n_factor_pairs > budget:
            raise BudgetExceeded(self.n_factor_pairs, budget)

    def reduce(self, values: np.ndarray) -> np.ndarray:
        """Map integer products into the selected semiring."""
        if self.semiring is Semiring.MODQ:
            return values % self.q
        return values


def _as_matrix(rows: Sequence[Sequence[int]]) -> Matrix:
    return tuple(tuple(int(x) for x in row) for row in rows)


@dataclass(frozen=True)
class FactorPair:
    u: Matrix
    v: Matrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", _as_matrix(self.u))
        object.__setattr__(self, "v", _as_matrix(self.v))

    def validate(self, params: ModelParams) -> None:
        m, r, q = params.m, params.r, params.q
        if len(self.u) != m or any(len(row) != r for row in self.u):
            raise ValueError(f"u must be {m}x{r}")
        if len(self.v) != r or any(len(row) != m for row in self.v):
            raise ValueError(f"v must be {r}x{m}")
        for x in itertools.chain.from_iterable(self.u + self.v):
            if not 0 <= x < q:
                raise ValueError(f"factor entry {x} outside [0, {q - 1}]")


@dataclass(frozen=True)
class ProductMatrix:
    s: Matrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "s", _as_matrix(self.s))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.s, dtype=np.int64).reshape(len(self.s), -1)

    def __getitem__(self, cell: tuple[int, int]) -> int:
        i, j = cell
        return self.s[i][j]

    def flat(self) -> tuple[int, ...]:
        return tuple(itertools.chain.from_iterable(self.s))


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based seed: the stream is a pure function of both fields."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)


def derive_stream(*keys: int) -> int:
    """Hash a tuple of non-negative counters into a single 64-bit stream index."""
    state = np.random.SeedSequence(list(keys)).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32) | int(state[1])


def generate_source(params: ModelParams, seed: SeedSpec) -> FactorPair:
    rng = seed.rng()
    u = rng.integers(0, params.q, size=(params.m, params.r))
    v = rng.integers(0, params.q, size=(params.r, params.m))
    return FactorPair(u.tolist(), v.tolist())


def product(pair: FactorPair, params: ModelParams) -> ProductMatrix:
    u = np.array(pair.u, dtype=np.int64).reshape(len(pair.u), -1)
    v = np.array(pair.v, dtype=np.int64).reshape(len(pair.v), -1)
    if u.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: u is {u.shape}, v is {v.shape}")
    if u.shape != (params.m, params.r) or v.shape != (params.r, params.m):
        raise ValueError(
            f"dimension mismatch: expected u {params.m}x{params.r} and v "
            f"{params.r}x{params.m}, got {u.shape} and {v.shape}"
        )
    return ProductMatrix(params.reduce(u @ v).tolist())


def entry_range(params: ModelParams) -> tuple[int, int]:
    if params.semiring is Semiring.MODQ:
        return 0, params.q - 1
    return 0, params.r * (params.q - 1) ** 2


def enumerate_all_sources(params: ModelParams, budget: int) -> Iterator[FactorPair]:
    """Yield every factor pair once, lexicographic in the flattened (u, v) digits."""
    params.check_budget(budget)
    m, r = params.m, params.r
    k = m * r
    for digits in itertools.product(range(params.q), repeat=2 * k):
        u = [digits[i * r:(i + 1) * r] for i in range(m)]
        v = [digits[k + i * m:k + (i + 1) * m] for i in range(r)]
        yield FactorPair(u, v)


# -- vectorised enumeration -------------------------------------------------


def digit_table(q: int, length: int) -> np.ndarray:
    """All q**length digit strings, most significant digit first."""
    count = q**length
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(count, dtype=np.int64)
    powers = q ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def all_factors(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Every U as (q^{rm}, m, r) and every V as (q^{rm}, r, m), lexicographic."""
    m, r = params.m, params.r
    table = digit_table(params.q, m * r)
    return table.reshape(-1, m, r), table.reshape(-1, r, m)


def iter_product_blocks(
    params: ModelParams, budget: int
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (first pair index, products) blocks covering every factor pair.

    Products come back flattened row-major, shape (block, m*m), in the same
    order as :func:`enumerate_all_sources`.
    """
    params.check_budget(budget)
    us, vs = all_factors(params)
    n_v = len(vs)
    per_u = n_v * params.n_cells
    step = max(1, BLOCK_CELLS // per_u)
    for start in range(0, len(us), step):
        block = np.einsum("aik,bkj->abij", us[start:start + step], vs)
        block = params.reduce(block).reshape(-1, params.n_cells)
        yield start * n_v, block


def all_products(params: ModelParams, budget: int) -> np.ndarray:
    """Products of all factor pairs, shape (q^{2rm}, m*m)."""
    return np.concatenate([b for _, b in iter_product_blocks(params, budget)])


# -- rank ---------------------------------------------------------------------


def rank_rational(rows: Sequence[Sequence[int]]) -> int:
    """Exact rank over the rationals."""
    mat = [[Fraction(x) for x in row] for row in rows]
    rank = 0
    n_cols = len(mat[0]) if mat else 0
    for col in range(n_cols):
        pivot = next((i for i in range(rank, len(mat)) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        for i in range(rank + 1, len(mat)):
            f = mat[i][col] / mat[rank][col]
            if f:
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    """Rank over the prime field of order p."""
    mat = [[x % p for x in row] for row in rows]
    rank = 0
    n_cols = len(mat[0]) if mat else 0
    for col in range(n_cols):
        pivot = next((i for i in range(rank, len(mat)) if mat[i][col]), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        inv = pow(mat[rank][col], -1, p)
        mat[rank] = [(x * inv) % p for x in mat[rank]]
        for i in range(rank + 1, len(mat)):
            f = mat[i][col]
            if f:
                mat[i] = [(a - f * b) % p for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def matrix_rank(rows: Sequence[Sequence[int]], params: ModelParams) -> int:
    if params.semiring is Semiring.MODQ:
        return rank_mod_p(rows, params.q)
    return rank_rational(rows)


# -- instance files -----------------------------------------------------------


def instance_to_dict(params: ModelParams, pair: FactorPair) -> dict:
    return {
        "m": params.m,
        "r": params.r,
        "q": params.q,
        "semiring": params.semiring.value,
        "u": [list(row) for row in pair.u],
        "v": [list(row) for row in pair.v],
        "s": [list(row) for row in product(pair, params).s],
    }


def instance_from_dict(data: dict) -> tuple[ModelParams, FactorPair]:
    params = ModelParams(
        int(data["m"]), int(data["r"]), int(data["q"]), data.get("semiring", "integer")
    )
    pair = FactorPair(data["u"], data["v"])
    pair.validate(params)
    if "s" in data and data["s"] is not None:
        if ProductMatrix(data["s"]) != product(pair, params):
            raise ValueError("stored s does not equal u @ v in the selected semiring")
    return params, pair


def save_instance(path: str | Path, params: ModelParams, pair: FactorPair) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(params, pair)) + "\n")


def load_instance(path: str | Path) -> tuple[ModelParams, FactorPair]:
    return instance_from_dict(json.loads(Path(path).read_text()))
