"""Command line entry point: ``lowrank-itlab <command> ...``.

Exit codes: 0 success, 2 validation error, 3 budget exceeded, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from pathlib import Path

from . import bounds as bnd
from . import decoder, entropy, harness, sampling
from .errors import BudgetExceeded
from .model import (
    ModelParams,
    SeedSpec,
    Semiring,
    generate_source,
    instance_to_dict,
    load_instance,
    product,
)

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _params(args) -> ModelParams:
    return ModelParams(args.m, args.r, args.q, args.semiring)


def _load_locs(path: str) -> tuple[sampling.LocationSequence, list[int] | None]:
    data = json.loads(Path(path).read_text())
    locs = sampling.LocationSequence(int(data["m"]), tuple(map(tuple, data["locations"])))
    return locs, data.get("values")


def _entropy_dict(rep) -> dict:
    d = rep.to_dict()
    d["value_bits"] = round(d["value_bits"], 9)
    return d


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> None:
    params = _params(args)
    pair = generate_source(params, SeedSpec(args.seed, args.stream))
    _emit(instance_to_dict(params, pair), args.out)


def cmd_sample(args) -> None:
    locs = sampling.sample_locations(args.m, args.n, SeedSpec(args.seed, args.stream))
    _emit({"m": locs.m, "locations": [list(c) for c in locs]}, args.out)


def cmd_decode(args) -> None:
    params, pair = load_instance(args.instance)
    if args.locs:
        locs, _ = _load_locs(args.locs)
    elif args.n is not None:
        locs = sampling.sample_locations(params.m, args.n, SeedSpec(args.seed, args.stream))
    else:
        raise ValueError("decode needs --locs FILE or --n INT")
    obs = decoder.observe(product(pair, params), locs)
    outcome = decoder.decode(obs, params, args.budget)
    result = outcome.to_dict()
    result["n"] = len(locs)
    result["correct"] = outcome.reconstruction == product(pair, params)
    _emit(result)


def cmd_pe(args) -> None:
    params = _params(args)
    if args.mode == "exact":
        rep = decoder.exact_error_rate(params, args.n, args.budget, args.location_budget)
    else:
        rep = decoder.mc_error_rate(params, args.n, args.trials, args.seed, args.budget)
    _emit(rep.to_dict())


def cmd_coverage(args) -> None:
    rep = sampling.coverage_failure_report(args.m, args.r, args.alpha, args.trials, args.seed)
    if args.json:
        _emit(rep.to_dict())
        return
    for key, value in rep.to_dict().items():
        print(f"{key:>20}: {value}")


def cmd_entropy(args) -> None:
    what = args.what
    if what == "lemma32":
        rep = entropy.lemma32_conditional_entropy(args.r, args.q, args.semiring, args.budget)
        _emit(_entropy_dict(rep))
        return
    params = _params(args)
    if what == "source":
        d = _entropy_dict(entropy.exact_source_entropy(params, args.budget))
        cond = entropy.conditional_source_entropy_given_v(params, args.budget)
        d["h_given_v_bits"] = round(cond.h_total_bits, 9)
        d["h_given_fullrank_v_bits"] = round(cond.h_given_fullrank_v_bits, 9)
        d["prob_v_fullrank"] = cond.prob_v_fullrank
        d["factor_pairs"] = params.n_factor_pairs
        _emit(d)
        return
    if not args.locs:
        raise ValueError(f"entropy {what} needs --locs FILE")
    locs, values = _load_locs(args.locs)
    if what == "obs":
        rep = entropy.observation_entropy(params, locs, args.budget)
        d = _entropy_dict(rep)
        d["cap_bits"] = entropy.observation_entropy_cap(params, len(locs))
        d["achieved_beta"] = entropy.achieved_beta(params, rep.value_bits)
        _emit(d)
    elif what == "agreement":
        if values is None and args.instance:
            _, pair = load_instance(args.instance)
            values = [product(pair, params)[c] for c in locs]
        if values is None:
            raise ValueError("agreement needs values in the locs file or --instance")
        obs = decoder.Observation(locs, tuple(values))
        _emit({"probability": entropy.agreement_probability(obs, params, args.budget)})
    elif what == "fano":
        chk = entropy.fano_verify(params, locs, args.budget)
        d = chk.to_dict()
        d["h_s_given_obs_bits"] = round(d["h_s_given_obs_bits"], 9)
        d["fano_rhs_bits"] = round(d["fano_rhs_bits"], 9)
        _emit(d)


def _bound(kind: str, p: dict, exact_hs: bool = False, budget: int = decoder.DEFAULT_BUDGET):
    if kind == "fano":
        return bnd.fano_min_samples(bnd.ConverseInput(
            p["m"], p["r"], p["q"], p.get("pe", 0.0), p.get("unit", "bits")))
    inp = bnd.DistortionInput(
        m=p["m"], r=p["r"], q=p.get("q", 2), d_level=p.get("D", 0.0),
        beta_exp=p.get("beta", 1.0), delta_slack=p.get("delta", 0.0),
        h_star=p.get("hstar", 0.0), unit=p.get("unit", "nats" if kind == "gaussian" else "bits"))
    if kind == "hamming":
        hs = None
        if exact_hs:
            params = ModelParams(inp.m, inp.r, inp.q, p.get("semiring", "integer"))
            hs_bits = entropy.exact_source_entropy(params, budget).value_bits
            hs = hs_bits if inp.unit is bnd.Unit.BITS else hs_bits * math.log(2)
        return bnd.hamming_rd_min_samples(inp, hs)
    if kind == "gaussian":
        return bnd.gaussian_rd_info_bound(inp)
    raise ValueError(f"unknown bound kind {kind!r}")


def cmd_bounds(args) -> None:
    if args.kind == "table":
        _bounds_table(args)
        return
    p = {k: v for k, v in vars(args).items() if v is not None}
    _emit(_bound(args.kind, p, getattr(args, "exact_hs", False), args.budget).to_dict())


def _bounds_table(args) -> None:
    spec = json.loads(Path(args.sweep).read_text())
    unknown = set(spec) - {"kind", "grid", "fixed", "exact_hs"}
    if unknown:
        raise ValueError(f"unknown bounds table keys: {sorted(unknown)}")
    kind = spec["kind"]
    grid = spec.get("grid", {})
    fixed = spec.get("fixed", {})
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ValueError("grid must map input names to lists of values")
    names = sorted(grid)
    extra_cols = ["variant_paper", "variant_derivation"] if kind == "gaussian" else []
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + sorted(fixed) + ["bound_value", "clamped", "ceil"] + extra_cols)
        for combo in itertools.product(*(grid[k] for k in names)):
            p = dict(fixed, **dict(zip(names, combo)))
            rep = _bound(kind, p, bool(spec.get("exact_hs", False)))
            writer.writerow(
                list(combo) + [fixed[k] for k in sorted(fixed)]
                + [format(rep.bound_value, ".10g"), rep.clamped,
                   "" if rep.ceil is None else rep.ceil]
                + [format(rep.extra[c], ".10g") for c in extra_cols]
            )
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_sweep(args) -> None:
    cfg = harness.SweepConfig.load(args.config)
    rows = harness.run_sweep(cfg)
    for path in harness.write_report(cfg, rows, args.out):
        print(path)


def cmd_plot(args) -> None:
    from .plotting import emit_svg_curve

    rows = [row for row in harness.read_csv(args.csv) if not row.skipped]
    emit_svg_curve(rows, args.x, args.y, args.out, log_y=args.logy)
    print(args.out)


# -- parser -------------------------------------------------------------------


def _model_args(p: argparse.ArgumentParser, m_required: bool = True) -> None:
    p.add_argument("--m", type=int, required=m_required)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--semiring", choices=[s.value for s in Semiring], default="integer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowrank-itlab",
        description="Exact and Monte Carlo experiments on low-rank matrix completion.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random source instance")
    _model_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", help="sample observed locations")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decode", help="decode an instance from observed entries")
    p.add_argument("--instance", required=True)
    p.add_argument("--locs")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--budget", type=int, default=decoder.DEFAULT_BUDGET)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("pe", help="decoding error rate")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=decoder.DEFAULT_BUDGET)
    p.add_argument("--location-budget", type=int, default=decoder.DEFAULT_LOCATION_BUDGET)
    p.set_defaults(func=cmd_pe)

    p = sub.add_parser("coverage", help="balls-in-bins coverage failure report")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("entropy", help="exact entropy computations")
    p.add_argument("what", choices=["source", "obs", "lemma32", "agreement", "fano"])
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--semiring", choices=[s.value for s in Semiring], default="integer")
    p.add_argument("--budget", type=int, default=decoder.DEFAULT_BUDGET)
    p.add_argument("--locs")
    p.add_argument("--instance")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("bounds", help="closed-form lower bounds")
    bsub = p.add_subparsers(dest="kind", required=True)
    b = bsub.add_parser("fano")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--r", type=int, required=True)
    b.add_argument("--q", type=int, required=True)
    b.add_argument("--pe", type=float, default=0.0)
    b.add_argument("--unit", choices=["bits", "nats"], default="bits")
    b = bsub.add_parser("hamming")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--r", type=int, required=True)
    b.add_argument("--q", type=int, required=True)
    b.add_argument("--D", type=float, required=True)
    b.add_argument("--beta", type=float, required=True)
    b.add_argument("--delta", type=float, default=0.0)
    b.add_argument("--unit", choices=["bits", "nats"], default="bits")
    b.add_argument("--exact-hs", action="store_true",
                   help="use the exact H(S) of the enumerable source")
    b.add_argument("--semiring", choices=[s.value for s in Semiring], default="integer")
    b = bsub.add_parser("gaussian")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--r", type=int, required=True)
    b.add_argument("--beta", type=float, required=True)
    b.add_argument("--D", type=float, required=True)
    b.add_argument("--hstar", type=float, required=True)
    b.add_argument("--unit", choices=["bits", "nats"], default="nats")
    b = bsub.add_parser("table")
    b.add_argument("--sweep", required=True)
    b.add_argument("--out")
    for name in ("fano", "hamming", "gaussian", "table"):
        bsub.choices[name].add_argument("--budget", type=int, default=decoder.DEFAULT_BUDGET)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV + figures")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="plot two columns of a sweep CSV to SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", default="n")
    p.add_argument("--y", default="pe_hat")
    p.add_argument("--out", required=True)
    p.add_argument("--logy", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
