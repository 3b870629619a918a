"""Closed-form lower bounds on the number of samples and on I(S; S_hat).

The discrete bounds are ratios of logarithms and therefore independent of
the log base.  The continuous bound is reported in nats unless bits are
requested.  Every bound is clamped at zero and says so.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field


class Unit(str, enum.Enum):
    BITS = "bits"
    NATS = "nats"

    def log(self, x: float) -> float:
        return math.log2(x) if self is Unit.BITS else math.log(x)


@dataclass(frozen=True)
class ConverseInput:
    m: int
    r: int
    q: int
    pe: float = 0.0
    unit: Unit = Unit.BITS

    def __post_init__(self) -> None:
        object.__setattr__(self, "unit", Unit(self.unit))
        if min(self.m, self.r, self.q) < 1:
            raise ValueError("m, r and q must be positive")
        if not 0.0 <= self.pe <= 1.0:
            raise ValueError(f"pe must be a probability, got {self.pe}")


@dataclass(frozen=True)
class DistortionInput:
    m: int
    r: int
    q: int = 2
    d_level: float = 0.0
    beta_exp: float = 1.0
    delta_slack: float = 0.0
    h_star: float = 0.0
    unit: Unit = Unit.BITS

    def __post_init__(self) -> None:
        object.__setattr__(self, "unit", Unit(self.unit))
        if min(self.m, self.r, self.q) < 1:
            raise ValueError("m, r and q must be positive")
        if self.d_level < 0:
            raise ValueError(f"distortion level must be non-negative, got {self.d_level}")
        if self.delta_slack < 0:
            raise ValueError("delta_slack must be non-negative")


@dataclass(frozen=True)
class BoundReport:
    formula: str
    bound_value: float
    clamped: bool
    inputs: dict
    ceil: int | None = None
    infinite: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _inputs(inp) -> dict:
    d = asdict(inp)
    d["unit"] = inp.unit.value
    return d


def _sample_report(formula: str, raw: float, inp, **extra) -> BoundReport:
    clamped = raw < 0
    value = 0.0 if clamped else raw
    return BoundReport(
        formula=formula,
        bound_value=value,
        clamped=clamped,
        inputs=_inputs(inp),
        # Tolerate round-off so exact integers don't get bumped up by one.
        ceil=math.ceil(value - 1e-9),
        extra=extra,
    )


def fano_min_samples(inp: ConverseInput) -> BoundReport:
    """Smallest n with m*r*log q <= n*log(r q^2) + pe * 2rm*log q."""
    if inp.q < 2:
        return _sample_report("fano", 0.0, inp)
    log_q = inp.unit.log(inp.q)
    numerator = inp.m * inp.r * log_q - inp.pe * 2 * inp.r * inp.m * log_q
    return _sample_report("fano", numerator / inp.unit.log(inp.r * inp.q**2), inp)


def hamming_error_entropy_cap(
    m: int, r: int, q: int, d_level: float, beta_exp: float, unit: Unit | str = Unit.BITS
) -> float:
    """D * m^beta * log(2 r q^2): entropy ceiling of an error matrix with that many nonzeros."""
    return d_level * m**beta_exp * Unit(unit).log(2 * r * q * q)


def hamming_rd_min_samples(
    inp: DistortionInput, source_entropy: float | None = None
) -> BoundReport:
    """Samples needed for Hamming distortion D * m^beta.

    The source-entropy term defaults to 2rm(log q - delta); pass
    ``source_entropy`` (in ``inp.unit``) to substitute an exact H(S).
    """
    if inp.q < 2:
        return _sample_report("hamming", 0.0, inp)
    if source_entropy is None:
        source_entropy = 2 * inp.r * inp.m * (inp.unit.log(inp.q) - inp.delta_slack)
    cap = hamming_error_entropy_cap(inp.m, inp.r, inp.q, inp.d_level, inp.beta_exp, inp.unit)
    raw = (source_entropy - cap) / inp.unit.log(inp.r * inp.q**2)
    return _sample_report("hamming", raw, inp, source_entropy=source_entropy, error_cap=cap)


def gaussian_rd_info_bound(inp: DistortionInput) -> BoundReport:
    """Lower bound on I(S; S_hat) under squared error D * m^beta, two variants.

    ``variant_paper`` subtracts m^beta * log(2 pi e D); ``variant_derivation``
    subtracts half of that, which is what the Gaussian max-entropy step gives.
    ``bound_value`` carries the derivation variant.  D = 0 gives an infinite
    bound.
    """
    inputs = _inputs(inp)
    if inp.d_level == 0:
        return BoundReport(
            formula="gaussian",
            bound_value=math.inf,
            clamped=False,
            inputs=inputs,
            infinite=True,
            extra={"variant_paper": math.inf, "variant_derivation": math.inf},
        )
    source = inp.r * inp.m * inp.h_star
    log_term = inp.m**inp.beta_exp * inp.unit.log(2 * math.pi * math.e * inp.d_level)
    raw_paper = source - log_term
    raw_derivation = source - log_term / 2
    return BoundReport(
        formula="gaussian",
        bound_value=max(0.0, raw_derivation),
        clamped=raw_derivation < 0,
        inputs=inputs,
        extra={
            "variant_paper": max(0.0, raw_paper),
            "variant_paper_clamped": raw_paper < 0,
            "variant_derivation": max(0.0, raw_derivation),
            "variant_derivation_clamped": raw_derivation < 0,
            "discrepancy": raw_derivation - raw_paper,
        },
    )
