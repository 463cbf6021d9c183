"""Command-line entry point: ``ppas {synth,bench,estimate,cure-scan}``.

Exit codes: 0 success, 2 input/schema error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from ppas import bench, compound
from ppas.data import get_means, ingest_csv, read_moments_csv, sample_moments, stack_means, stack_moments
from ppas.errors import DataError, NumericError
from ppas.estimators import pt, pt_context
from ppas.risk import cure_compound, grid_scale, minimize_omega
from ppas.synth import SynthConfig, draw_batch, synth_params

log = logging.getLogger("ppas")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _estimator_list(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [n for n in names if n not in compound.ESTIMATORS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown estimators {bad}; choose from {', '.join(compound.ESTIMATORS)}")
    return names


def _ratio_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratio list {text!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--big-n", type=int, default=80, help="unlabeled rows per problem")
    p.add_argument("--predictor", choices=("abs", "square"), default="square")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppas", description="Estimate many means at once from a few labels and many predictions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="benchmark on the synthetic model")
    _add_synth_flags(s)
    s.add_argument("--replicates", type=int, default=200)
    s.add_argument("--moments", choices=("known", "sample"), default="known")
    s.add_argument("--estimators", type=_estimator_list, default=list(bench.DEFAULT_ESTIMATORS))
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    b = sub.add_parser("bench", help="split-resampling benchmark on a fully labeled CSV")
    b.add_argument("--data", required=True)
    b.add_argument("--ratio", type=_ratio_list, default=[0.8], help="unlabeled fraction(s), comma separated")
    b.add_argument("--replicates", type=int, default=200)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--moments", choices=("sample",), default="sample")
    b.add_argument("--estimators", type=_estimator_list, default=list(compound.ESTIMATORS))
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", help="output file; with several ratios, '{ratio}' in the name is substituted")
    b.add_argument("--format", choices=("csv", "json"), default="csv")

    e = sub.add_parser("estimate", help="one-shot estimates for a problem CSV")
    e.add_argument("--data", required=True)
    e.add_argument("--moments-file", help="known-moments sidecar CSV (problem_id,sigma2,tau2,gamma)")
    e.add_argument("--estimator", choices=compound.ESTIMATORS, default="pas")
    e.add_argument("--out")

    c = sub.add_parser("cure-scan", help="write the PAS risk curve over the omega grid")
    c.add_argument("--data")
    c.add_argument("--moments-file")
    _add_synth_flags(c)
    c.add_argument("--grid-size", type=int, default=512)
    c.add_argument("--out")
    return parser


def _load(args):
    problems = ingest_csv(args.data)
    stats = stack_means([get_means(p) for p in problems])
    if args.moments_file:
        moms = read_moments_csv(args.moments_file, [p.id for p in problems])
    else:
        moms = stack_moments([sample_moments(p) for p in problems])
    return problems, stats, moms


def cmd_synth(args) -> int:
    cfg = SynthConfig(m=args.m, n=args.n, N=args.big_n, predictor=args.predictor, seed=args.seed)
    report = bench.run_synth_bench(cfg, args.replicates, args.moments, args.estimators, args.workers)
    log.info("synth benchmark finished in %.2fs", report.wall_time)
    _emit(report.render(args.format), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    problems = ingest_csv(args.data)
    reports = bench.run_ratio_sweep(
        problems, args.ratio, args.replicates, args.seed,
        moments_mode=args.moments, estimators=args.estimators, workers=args.workers,
    )
    if len(reports) == 1:
        _emit(reports[0].render(args.format), args.out)
        return EXIT_OK
    for ratio, report in zip(args.ratio, reports):
        if args.out and "{ratio}" in args.out:
            _emit(report.render(args.format), args.out.replace("{ratio}", f"{ratio:g}"))
        elif args.out:
            raise DataError("--out needs a '{ratio}' placeholder when sweeping several ratios")
        else:
            sys.stdout.write(f"# ratio={ratio:g}\n")
            _emit(report.render(args.format), None)
    return EXIT_OK


def cmd_estimate(args) -> int:
    problems, stats, moms = _load(args)
    sample = stack_moments([sample_moments(p) for p in problems]) if args.estimator in compound.SAMPLE_ONLY else None
    values = compound.run_estimators([args.estimator], stats, moms, sample)[args.estimator]
    lines = ["problem_id,estimate"] + [f"{p.id},{float(v)!r}" for p, v in zip(problems, np.atleast_1d(values))]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_cure_scan(args) -> int:
    if args.data:
        _, stats, moms = _load(args)
    else:
        cfg = SynthConfig(m=args.m, n=args.n, N=args.big_n, predictor=args.predictor, seed=args.seed)
        batch = draw_batch(cfg, 0)
        stats, moms = batch.means(), synth_params(batch.eta, cfg).moments()
    ctx = pt_context(stats, moms)
    pt_vals = np.asarray(pt(stats, ctx), dtype=float)
    z_t = np.asarray(stats.z_tilde, dtype=float)
    curve = minimize_omega(lambda om: cure_compound(pt_vals, z_t, ctx, om), grid_scale(ctx.sigma_tilde2), args.grid_size)
    log.info("omega_hat = %r", curve.omega_hat)
    if args.out:
        curve.to_csv(args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["omega", "risk"])
        for om, r in zip(curve.omegas, curve.risks):
            w.writerow(["inf" if np.isinf(om) else repr(float(om)), repr(float(r))])
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "bench": cmd_bench, "estimate": cmd_estimate, "cure-scan": cmd_cure_scan}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
