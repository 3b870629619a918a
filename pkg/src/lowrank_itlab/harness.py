"""Parameter sweeps of the decoding error rate, and their tabulation.

A sweep config is a JSON object:

    {
      "points": [{"m": 3, "r": 1, "q": 2, "semiring": "integer"}, ...],
      "n_grid": [0, 2, 4] | "full",      # or "alpha_grid": [1.0, 2.0]
      "mode": "mc" | "exact",
      "trials": 200,                     # mc only
      "master_seed": 1,
      "budget": 10000000,                # factor pairs, optional
      "location_budget": 100000,         # n-subsets in exact mode, optional
      "target_pe": 0.1,                  # optional, enables threshold output
      "timing": false                    # optional, fills runtime_ms
    }

Unknown keys are rejected.  Rows are deterministic given the master seed;
runtime_ms is left blank unless timing is requested so that repeated runs
produce identical files.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .decoder import (
    DEFAULT_BUDGET,
    DEFAULT_LOCATION_BUDGET,
    class_failures,
    mc_failure_counts,
)
from .errors import BudgetExceeded, NoCrossing
from .model import ModelParams, all_products
from .sampling import alpha_sample_count, coverage_counts, normal_ci

log = logging.getLogger(__name__)

CSV_HEADER = (
    "m,r,q,semiring,n,alpha,trials,failures,pe_hat,ci95_lo,ci95_hi,"
    "coverage_fail_hat,seed,mode,runtime_ms"
)
THREADS_ENV = "LOWRANK_ITLAB_THREADS"
TRIAL_CHUNK = 50

_CONFIG_KEYS = {
    "points",
    "n_grid",
    "alpha_grid",
    "mode",
    "trials",
    "master_seed",
    "budget",
    "location_budget",
    "target_pe",
    "timing",
}
_POINT_KEYS = {"m", "r", "q", "semiring"}


@dataclass(frozen=True)
class SweepConfig:
    points: tuple[ModelParams, ...]
    n_grid: tuple[int, ...] | str | None = None
    alpha_grid: tuple[float, ...] | None = None
    mode: str = "mc"
    trials: int = 100
    master_seed: int = 0
    budget: int = DEFAULT_BUDGET
    location_budget: int = DEFAULT_LOCATION_BUDGET
    target_pe: float | None = None
    timing: bool = False

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("sweep needs at least one point")
        if (self.n_grid is None) == (self.alpha_grid is None):
            raise ValueError("give exactly one of n_grid and alpha_grid")
        if isinstance(self.n_grid, str) and self.n_grid != "full":
            raise ValueError('n_grid must be a list of integers or "full"')
        if self.mode not in ("mc", "exact"):
            raise ValueError(f"mode must be mc or exact, got {self.mode!r}")
        if self.mode == "mc" and self.trials < 1:
            raise ValueError("trials must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        points = []
        for p in data.get("points", []):
            extra = set(p) - _POINT_KEYS
            if extra:
                raise ValueError(f"unknown point keys: {sorted(extra)}")
            points.append(ModelParams(p["m"], p["r"], p["q"], p.get("semiring", "integer")))
        n_grid = data.get("n_grid")
        if isinstance(n_grid, list):
            n_grid = tuple(int(n) for n in n_grid)
        alpha_grid = data.get("alpha_grid")
        if alpha_grid is not None:
            alpha_grid = tuple(float(a) for a in alpha_grid)
        kwargs = {k: data[k] for k in ("mode", "trials", "master_seed", "budget",
                                       "location_budget", "target_pe", "timing") if k in data}
        return cls(points=tuple(points), n_grid=n_grid, alpha_grid=alpha_grid, **kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def grid_for(self, params: ModelParams) -> list[tuple[int, float | None]]:
        """(n, alpha) pairs for one point; alpha is None for explicit n."""
        if self.alpha_grid is not None:
            return [(alpha_sample_count(params.m, a), a) for a in self.alpha_grid]
        if self.n_grid == "full":
            return [(n, None) for n in range(params.n_cells + 1)]
        return [(n, None) for n in self.n_grid]


@dataclass(frozen=True)
class ResultRow:
    m: int
    r: int
    q: int
    semiring: str
    n: int
    alpha: float | None
    trials: int | None
    failures: int | None
    pe_hat: float | None
    ci95_lo: float | None
    ci95_hi: float | None
    coverage_fail_hat: float | None
    seed: int
    mode: str
    runtime_ms: float | None = None

    @property
    def skipped(self) -> bool:
        return self.pe_hat is None

    @property
    def key(self) -> tuple[int, int, int, str]:
        return (self.m, self.r, self.q, self.semiring)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    value = int(raw)
    if value < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return value if value > 0 else (os.cpu_count() or 1)


def _skip_row(params: ModelParams, n: int, alpha, cfg: SweepConfig, reason: str) -> ResultRow:
    return ResultRow(params.m, params.r, params.q, params.semiring.value, n, alpha,
                     None, None, None, None, None, None, cfg.master_seed,
                     f"{cfg.mode}:skipped:{reason}")


def _mc_task(args) -> tuple[int, list[int], list[int], float]:
    point_index, params, ns, trial_ids, seed, budget = args
    start = time.perf_counter()
    fails, cov = mc_failure_counts(params, ns, trial_ids, seed, (point_index,), budget)
    return point_index, fails, cov, time.perf_counter() - start


def _exact_task(args) -> tuple[int, int, int, int, int, float]:
    point_index, params, n, budget, location_budget = args
    start = time.perf_counter()
    n_subsets = math.comb(params.n_cells, n)
    if n_subsets > location_budget:
        raise BudgetExceeded(n_subsets, location_budget, what="location subsets")
    products = all_products(params, budget)
    failures = 0
    cov_fail = 0
    for cells in itertools.combinations(range(params.n_cells), n):
        failures += int(class_failures(products, cells).sum())
        rows, cols = coverage_counts(params.m, list(cells))
        if rows.min() < params.r or cols.min() < params.r:
            cov_fail += 1
    return point_index, n, failures, len(products) * n_subsets, cov_fail, \
        time.perf_counter() - start


def _safe_exact(args):
    try:
        return _exact_task(args)
    except BudgetExceeded as exc:
        return exc


def _map(func, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> list[ResultRow]:
    """One row per (point, n); skipped rows for points over budget."""
    workers = thread_count() if workers is None else workers
    if cfg.mode == "exact":
        return _run_exact(cfg, workers)
    return _run_mc(cfg, workers)


def _run_mc(cfg: SweepConfig, workers: int) -> list[ResultRow]:
    tasks = []
    grids = []
    for pi, params in enumerate(cfg.points):
        grid = cfg.grid_for(params)
        grids.append(grid)
        if params.n_factor_pairs > cfg.budget:
            continue
        ns = [n for n, _ in grid if 0 <= n <= params.n_cells]
        for lo in range(0, cfg.trials, TRIAL_CHUNK):
            trial_ids = range(lo, min(cfg.trials, lo + TRIAL_CHUNK))
            tasks.append((pi, params, ns, trial_ids, cfg.master_seed, cfg.budget))

    totals: dict[int, tuple[list[int], list[int], float]] = {}
    for pi, fails, cov, secs in _map(_mc_task, tasks, workers):
        if pi not in totals:
            totals[pi] = ([0] * len(fails), [0] * len(cov), 0.0)
        f_acc, c_acc, t_acc = totals[pi]
        totals[pi] = (
            [a + b for a, b in zip(f_acc, fails)],
            [a + b for a, b in zip(c_acc, cov)],
            t_acc + secs,
        )

    rows = []
    for pi, params in enumerate(cfg.points):
        grid = grids[pi]
        if pi not in totals:
            rows.extend(_skip_row(params, n, a, cfg, "budget") for n, a in grid)
            continue
        fails, cov, secs = totals[pi]
        k = 0
        for n, alpha in grid:
            if not 0 <= n <= params.n_cells:
                rows.append(_skip_row(params, n, alpha, cfg, "n_out_of_range"))
                continue
            lo, hi = normal_ci(fails[k], cfg.trials)
            rows.append(ResultRow(
                params.m, params.r, params.q, params.semiring.value, n, alpha,
                cfg.trials, fails[k], fails[k] / cfg.trials, lo, hi,
                cov[k] / cfg.trials, cfg.master_seed, "mc",
                round(secs * 1000, 3) if cfg.timing else None,
            ))
            k += 1
    return rows


def _run_exact(cfg: SweepConfig, workers: int) -> list[ResultRow]:
    tasks = []
    for pi, params in enumerate(cfg.points):
        for n, _ in cfg.grid_for(params):
            if params.n_factor_pairs <= cfg.budget and 0 <= n <= params.n_cells:
                tasks.append((pi, params, n, cfg.budget, cfg.location_budget))
    results = {}
    for task, res in zip(tasks, _map(_safe_exact, tasks, workers)):
        results[(task[0], task[2])] = res

    rows = []
    for pi, params in enumerate(cfg.points):
        for n, alpha in cfg.grid_for(params):
            res = results.get((pi, n))
            if params.n_factor_pairs > cfg.budget or isinstance(res, BudgetExceeded):
                rows.append(_skip_row(params, n, alpha, cfg, "budget"))
                continue
            if res is None:
                rows.append(_skip_row(params, n, alpha, cfg, "n_out_of_range"))
                continue
            _, _, failures, total, cov_fail, secs = res
            pe = failures / total
            rows.append(ResultRow(
                params.m, params.r, params.q, params.semiring.value, n, alpha,
                total, failures, pe, pe, pe, cov_fail / math.comb(params.n_cells, n),
                cfg.master_seed, "exact",
                round(secs * 1000, 3) if cfg.timing else None,
            ))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for row in rows:
            writer.writerow([_fmt(v) for v in astuple(row)])


def _parse(value: str, kind):
    if value == "":
        return None
    if kind is int:
        return int(value)
    if kind is float:
        return float(value)
    return value


def read_csv(path: str | Path) -> list[ResultRow]:
    kinds = {
        "m": int, "r": int, "q": int, "n": int, "trials": int, "failures": int,
        "seed": int, "alpha": float, "pe_hat": float, "ci95_lo": float,
        "ci95_hi": float, "coverage_fail_hat": float, "runtime_ms": float,
    }
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if ",".join(reader.fieldnames or []) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header")
        return [
            ResultRow(**{f.name: _parse(rec[f.name], kinds.get(f.name, str))
                         for f in fields(ResultRow)})
            for rec in reader
        ]


@dataclass(frozen=True)
class ThresholdEntry:
    m: int
    r: int
    q: int
    semiring: str
    n_star: int


@dataclass(frozen=True)
class ThresholdTable:
    target_pe: float
    entries: tuple[ThresholdEntry, ...]
    linear_coeff: float
    mlogm_coeff: float

    def reference_linear(self, m: float) -> float:
        return self.linear_coeff * m

    def reference_mlogm(self, m: float) -> float:
        return self.mlogm_coeff * m * math.log(m)


def threshold_estimate(rows: Sequence[ResultRow], target_pe: float) -> ThresholdTable:
    """Smallest n with pe_hat <= target for each (m, r, q, semiring).

    The reference curves c*m and c*m*ln(m) pass through the first entry and
    are for visual comparison only.
    """
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        if not row.skipped:
            groups.setdefault(row.key, []).append(row)
    if not groups:
        raise NoCrossing("no data rows")
    entries = []
    missing = []
    for key in sorted(groups):
        hits = [row.n for row in groups[key] if row.pe_hat <= target_pe]
        if not hits:
            missing.append(key)
            continue
        entries.append(ThresholdEntry(*key, n_star=min(hits)))
    if missing:
        raise NoCrossing(f"pe_hat never reaches {target_pe} for {missing}")
    first = entries[0]
    lin = first.n_star / first.m
    mlogm = first.n_star / (first.m * math.log(first.m)) if first.m > 1 else math.nan
    return ThresholdTable(target_pe, tuple(entries), lin, mlogm)


def emit_threshold_csv(table: ThresholdTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["m", "r", "q", "semiring", "n_star", "ref_linear", "ref_mlogm"])
        for e in table.entries:
            writer.writerow([e.m, e.r, e.q, e.semiring, e.n_star,
                             _fmt(table.reference_linear(e.m)),
                             _fmt(table.reference_mlogm(e.m))])


def write_report(cfg: SweepConfig, rows: Sequence[ResultRow], out_dir: str | Path) -> list[Path]:
    """Write results.csv plus figures (and thresholds when a target is set)."""
    from .plotting import emit_svg_curve, emit_threshold_svg

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv"]
    emit_csv(rows, written[0])
    data = [row for row in rows if not row.skipped]
    if data:
        emit_svg_curve(data, "n", "pe_hat", out / "pe_curve.svg")
        emit_svg_curve(data, "n", "coverage_fail_hat", out / "coverage_curve.svg")
        written += [out / "pe_curve.svg", out / "coverage_curve.svg"]
    if cfg.target_pe is not None and data:
        try:
            table = threshold_estimate(data, cfg.target_pe)
        except NoCrossing as exc:
            log.warning("no threshold table: %s", exc)
        else:
            emit_threshold_csv(table, out / "thresholds.csv")
            emit_threshold_svg(table, out / "thresholds.svg")
            written += [out / "thresholds.csv", out / "thresholds.svg"]
    return written
