"""Exit criteria for the laboratory, one test per criterion.

Each test appends a PASS/FAIL line that the terminal summary prints.
"""

import itertools
import json
import math
import random
import time
from collections import Counter

import pytest

from lowrank_itlab.bounds import (
    ConverseInput,
    DistortionInput,
    fano_min_samples,
    gaussian_rd_info_bound,
    hamming_rd_min_samples,
)
from lowrank_itlab.cli import main
from lowrank_itlab.decoder import (
    Observation,
    enumerate_consistent,
    exact_error_rate,
    observe,
    pruned_consistent,
)
from lowrank_itlab.entropy import (
    agreement_probability,
    conditional_source_entropy_given_v,
    exact_source_entropy,
    fano_verify,
    lemma32_bound_bits,
    lemma32_conditional_entropy,
)
from lowrank_itlab.harness import SweepConfig, run_sweep, threshold_estimate
from lowrank_itlab.model import (
    ModelParams,
    SeedSpec,
    enumerate_all_sources,
    generate_source,
    product,
)
from lowrank_itlab.sampling import (
    Z_99,
    LocationSequence,
    binomial_tail_below,
    chernoff_bin_bound,
    coverage_failure_report,
    normal_ci,
    sample_locations,
)


def record(log, number, ok, detail):
    log.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    print(log[-1])
    assert ok, detail


def test_c1_lemma32_equality_case(acceptance_log):
    start = time.perf_counter()
    rep = lemma32_conditional_entropy(1, 2, "integer")
    elapsed = time.perf_counter() - start
    bound = (1 - 1 / 2) * math.log2(2)
    ok = (
        abs(rep.value_bits - 0.5) <= 1e-9
        and abs(rep.value_bits - bound) <= 1e-9
        and elapsed < 1.0
    )
    record(acceptance_log, 1, ok,
           f"H = {rep.value_bits:.9f} bits, bound {bound:.9f}, {elapsed:.3f}s")


def test_c2_lemma32_grid(acceptance_log):
    start = time.perf_counter()
    worst = math.inf
    failures = []
    for r, q in [(1, 3), (2, 5), (2, 7), (3, 3)]:
        for semiring in ("integer", "modq"):
            rep = lemma32_conditional_entropy(r, q, semiring)
            gap = rep.value_bits - lemma32_bound_bits(r, q)
            worst = min(worst, gap)
            if gap < -1e-9:
                failures.append((r, q, semiring, rep.value_bits))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    record(acceptance_log, 2, ok,
           f"8 cases, min margin {worst:.6f} bits, violations {failures}, {elapsed:.2f}s")


def test_c3_source_entropy_facts(acceptance_log):
    rep = exact_source_entropy(ModelParams(2, 1, 2))
    cond = tuple(conditional_source_entropy_given_v(ModelParams(1, 1, 2)))
    ok_h = abs(rep.value_bits - 2.771800) <= 1e-5
    ok = ok_h and rep.support_size == 10 and cond == (0.5, 1.0, 0.5)
    record(acceptance_log, 3, ok,
           f"H(S) = {rep.value_bits:.7f} bits (target 2.771800 +/- 1e-5), "
           f"support {rep.support_size}, H(UV|V) triple {cond}")


def test_c4_fano_sweep(acceptance_log):
    start = time.perf_counter()
    checked = 0
    violations = []
    for m in (1, 2):
        for q in (1, 2, 3):
            params = ModelParams(m, 1, q)
            for n in range(m * m + 1):
                for cells in itertools.combinations(range(m * m), n):
                    chk = fano_verify(params, LocationSequence.from_flat(m, cells))
                    checked += 1
                    if not chk.holds:
                        violations.append((m, q, cells))
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 120
    record(acceptance_log, 4, ok,
           f"{checked} location sets, {len(violations)} violations, {elapsed:.2f}s")


def test_c5_agreement_identity(acceptance_log):
    params = ModelParams(2, 1, 2)
    pairs = list(enumerate_all_sources(params, 100))
    worst = 0.0
    count = 0
    for n in range(3):
        for cells in itertools.combinations(range(4), n):
            locs = LocationSequence.from_flat(2, cells)
            marginal = Counter(observe(product(p, params), locs).values for p in pairs)
            for values, hits in marginal.items():
                got = agreement_probability(Observation(locs, values), params)
                worst = max(worst, abs(got - hits / len(pairs)))
                count += 1
    pinned = agreement_probability(Observation(LocationSequence(2, ((0, 0),)), (0,)), params)
    ok = worst <= 1e-12 and abs(pinned - 0.75) <= 1e-12
    record(acceptance_log, 5, ok,
           f"{count} observations, max deviation {worst:.2e}, cell (0,0)=0 -> {pinned}")


def test_c6_decoder_correctness(acceptance_log):
    start = time.perf_counter()
    pes = [exact_error_rate(ModelParams(2, 1, 2), n).pe for n in range(5)]
    monotone = all(a >= b for a, b in zip(pes, pes[1:])) and pes[-1] == 0.0

    rng = random.Random(6)
    shapes = [
        ModelParams(m, r, q, s)
        for m in (1, 2, 3, 4)
        for r in (1, 2)
        for q in (2, 3, 5)
        for s in ("integer", "modq")
        if q ** (2 * r * m) <= 10**5
    ]
    mismatches = 0
    instances = 0
    for k in range(120):
        params = shapes[k % len(shapes)]
        pair = generate_source(params, SeedSpec(600, k))
        n = rng.randint(0, params.n_cells)
        obs = observe(product(pair, params), sample_locations(params.m, n, SeedSpec(601, k)))
        if set(pruned_consistent(obs, params)) != set(enumerate_consistent(obs, params)):
            mismatches += 1
        instances += 1
    elapsed = time.perf_counter() - start
    ok = monotone and mismatches == 0 and instances >= 100 and elapsed < 120
    record(acceptance_log, 6, ok,
           f"exact P_e over n=0..4 {[round(p, 6) for p in pes]}, "
           f"{instances} oracle instances, {mismatches} mismatches, {elapsed:.2f}s")


def test_c7_coverage_bounds(acceptance_log):
    start = time.perf_counter()
    m, r, alpha, trials = 100, 2, 3.0, 10_000
    rep = coverage_failure_report(m, r, alpha, trials, seed=7)
    chern = chernoff_bin_bound(m, r, alpha)
    tail = binomial_tail_below(rep.n_used, 1 / m, r)
    failures = round(rep.mc_estimate * trials)
    lo99, hi99 = normal_ci(failures, trials, Z_99)
    ceiling = 2 * m * m ** (-alpha / 2)
    elapsed = time.perf_counter() - start
    ok = (
        r <= chern.mean
        and tail <= chern.value
        and lo99 <= rep.union_reference
        and hi99 < ceiling
        and elapsed < 60
    )
    record(acceptance_log, 7, ok,
           f"tail {tail:.3e} <= Chernoff {chern.value:.3e}; MC {rep.mc_estimate:.4f} "
           f"99% CI [{lo99:.4f}, {hi99:.4f}] vs union {rep.union_reference:.4f} "
           f"and 2m*m^(-alpha/2) = {ceiling:.4f}; {elapsed:.2f}s")


def test_c8_bound_formulas(acceptance_log):
    fano = fano_min_samples(ConverseInput(100, 2, 16, 0.0))
    ham = hamming_rd_min_samples(DistortionInput(100, 2, 16, d_level=1.0, beta_exp=1.0))
    h_star = 1.3
    gauss = gaussian_rd_info_bound(
        DistortionInput(10, 2, d_level=1 / (2 * math.pi * math.e), beta_exp=1.0, h_star=h_star)
    )
    half = fano_min_samples(ConverseInput(100, 2, 16, 0.5)).bound_value
    q1 = fano_min_samples(ConverseInput(100, 2, 1, 0.0)).bound_value
    ok = (
        abs(fano.bound_value - 800 / 9) <= 1e-9
        and fano.ceil == 89
        and abs(ham.bound_value - 600 / 9) <= 1e-9
        and abs(gauss.extra["variant_paper"] - 20 * h_star) <= 1e-9
        and abs(gauss.extra["variant_derivation"] - 20 * h_star) <= 1e-9
        and half == 0.0
        and q1 == 0.0
    )
    record(acceptance_log, 8, ok,
           f"fano {fano.bound_value:.9f} (ceil {fano.ceil}), hamming {ham.bound_value:.9f}, "
           f"gaussian {gauss.extra['variant_paper']:.9f}/{gauss.extra['variant_derivation']:.9f}, "
           f"clamps {half}, {q1}")


def test_c9_reproducibility(acceptance_log, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "points": [{"m": 3, "r": 1, "q": 2}, {"m": 4, "r": 1, "q": 2}],
        "n_grid": "full", "mode": "mc", "trials": 120, "master_seed": 2024, "target_pe": 0.2,
    }))
    outputs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("LOWRANK_ITLAB_THREADS", threads)
        out = tmp_path / f"run{threads}"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        outputs.append(out)
    names = sorted(p.name for p in outputs[0].iterdir())
    same = names == sorted(p.name for p in outputs[1].iterdir()) and all(
        (outputs[0] / n).read_bytes() == (outputs[1] / n).read_bytes() for n in names
    )
    ok = same and "results.csv" in names and "pe_curve.svg" in names
    record(acceptance_log, 9, ok, f"files {names} identical across 1 and 2 workers: {same}")


def test_c10_scaling_trend(acceptance_log):
    start = time.perf_counter()
    cfg = SweepConfig(
        points=tuple(ModelParams(m, 1, 2) for m in (3, 4, 5, 6)),
        n_grid="full", mode="mc", trials=300, master_seed=10,
    )
    table = threshold_estimate(run_sweep(cfg), 0.1)
    stars = [(e.m, e.n_star) for e in table.entries]
    elapsed = time.perf_counter() - start
    values = [n for _, n in stars]
    ok = values == sorted(values) and elapsed < 300
    record(acceptance_log, 10, ok, f"n*(m) at target 0.1: {stars}, {elapsed:.1f}s")
