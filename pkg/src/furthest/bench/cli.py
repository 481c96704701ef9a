"""Command line entry point: ``furthest <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .. import datasets
from ..annulus import AnnulusParams, MemoryBudgetError, derive_params, default_width
from ..core import DegenerateDataError, DimensionMismatchError
from ..query_dependent import default_params
from ..query_independent import suggested_ell
from .._serial import FormatError
from . import experiment as exp
from .stats import lemma3_montecarlo, rho_statistic

log = logging.getLogger("furthest")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> list[int]:
    """``"1,5,10"`` or ``"1-30"`` or a mix such as ``"1-4,8,16"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"grid {text!r} must list positive integers")
    return out


def _load(path: str):
    log.info("loading %s", path)
    return datasets.load_dataset(path)


def cmd_gen(args) -> int:
    ds = datasets.generate(datasets.GeneratorSpec(args.kind, args.n, args.d, args.seed))
    if args.out.endswith(".npz"):
        datasets.save_dataset(ds, args.out)
    else:
        datasets.save_vectors(ds, args.out)
    return EXIT_OK


def cmd_rho(args) -> int:
    ds = _load(args.data)
    print(f"{rho_statistic(ds, args.pairs, args.seed):.6f}")
    return EXIT_OK


def cmd_afn_params(args) -> int:
    p = default_params(args.n, args.c)
    print(f"ell={p.ell} m={p.m}")
    return EXIT_OK


def cmd_qi_ell(args) -> int:
    s = suggested_ell(args.c, args.d, args.gamma, args.cap)
    print(f"ell={s.ell}" + (" (clamped)" if s.clamped else ""))
    return EXIT_OK


def _cells(args) -> list[tuple[int, int]]:
    if args.pairing == "zip":
        return exp.zip_cells(args.ell_grid, args.m_grid)
    if args.pairing == "product":
        return exp.product_cells(args.ell_grid, args.m_grid)
    if args.pairing == "fixed-product":
        if args.product is None:
            raise UsageError("--pairing fixed-product needs --product")
        return exp.fixed_product_cells(args.product, args.m_grid)
    return exp.ratio_cells(args.ell_grid)


def cmd_afn_run(args) -> int:
    if args.pairing in ("zip", "product", "fixed-product") and args.m_grid is None:
        raise UsageError(f"--pairing {args.pairing} needs --m-grid")
    if args.pairing != "fixed-product" and args.ell_grid is None:
        raise UsageError("--ell-grid is required")
    try:
        cells = _cells(args)
    except ValueError as err:
        raise UsageError(str(err)) from None
    ds = _load(args.data)
    config = exp.ExperimentConfig(
        ds, args.variant, cells, args.seeds, args.queries_per_seed,
        master_seed=args.seed, record_timing=not args.no_timing,
    )
    result = exp.run_experiment(config)
    exp.write_records(args.out, result.records)
    if args.summary:
        exp.write_summary(args.summary, result.summary)
    for row in result.summary:
        log.info("ell=%d m=%d median=%.4f mean=%.4f", row.ell, row.m, row.median, row.mean)
    return EXIT_OK


def cmd_annulus_run(args) -> int:
    if args.data == "planted":
        n, ds = args.n, None
    else:
        ds = _load(args.data)
        n = ds.n
    width = args.bucket_width or default_width(args.r, args.w)
    params = derive_params(n, args.r, args.w, args.c, width)
    overrides = {k: getattr(args, k) for k in ("k", "L", "ell", "m") if getattr(args, k) is not None}
    if overrides:
        fields = {f: getattr(params, f) for f in AnnulusParams.__dataclass_fields__}
        params = AnnulusParams(**{**fields, **overrides})
    config = exp.AnnulusExperimentConfig(
        params, args.trials, master_seed=args.seed, repetitions=args.repetitions,
        queries_per_trial=args.queries, dataset=ds, planted_n=args.n, planted_d=args.d,
    )
    records, summary = exp.run_annulus_experiment(config)
    if args.out:
        exp.write_annulus_records(args.out, records)
    report = {
        "k": params.k, "L": params.L, "ell": params.ell, "m": params.m, "cap": params.cap,
        "trials": summary.trials, "with_witness": summary.with_witness,
        "success_rate": summary.success_rate,
        "amplified_success_rate": summary.amplified_success_rate,
        "null_rate": summary.null_rate, "mean_candidates": summary.mean_candidates,
        "soundness_violations": summary.soundness_violations,
    }
    print(json.dumps(report, indent=2))
    if summary.soundness_violations:
        raise exp.InvariantViolation(f"{summary.soundness_violations} unsound annulus answers")
    return EXIT_OK


def cmd_lemma3(args) -> int:
    report = lemma3_montecarlo(args.n, args.c, args.trials, args.seed)
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def cmd_convert_movielens(args) -> int:
    ml = datasets.load_movielens(args.ratings)
    datasets.save_dataset(ml.dataset, args.out)
    datasets.write_id_map(args.map, ml.movie_ids)
    log.info("%d movies, %d users", ml.dataset.n, ml.dataset.dim)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="furthest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=["uniform", "normal"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="ascii vectors, or binary if it ends in .npz")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("rho", help="intrinsic dimensionality statistic")
    p.add_argument("--data", required=True)
    p.add_argument("--pairs", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("afn-run", help="approximation-factor experiment")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=sorted(exp.VARIANTS), required=True)
    p.add_argument("--ell-grid", type=parse_grid)
    p.add_argument("--m-grid", type=parse_grid)
    p.add_argument("--pairing", choices=["zip", "product", "fixed-product", "ratio"], default="zip",
                   help="zip: ell_i with m_i; product: all pairs; fixed-product: ell = PRODUCT/m; "
                        "ratio: m = 1..4*ell for each ell")
    p.add_argument("--product", type=int)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--queries-per-seed", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", required=True, help="per-query records CSV")
    p.add_argument("--summary", help="per-cell summary CSV")
    p.add_argument("--no-timing", action="store_true", help="write 0.0 wall times")
    p.set_defaults(func=cmd_afn_run)

    p = sub.add_parser("afn-params", help="default ell and m for n points at approximation c")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=float, required=True)
    p.set_defaults(func=cmd_afn_params)

    p = sub.add_parser("qi-ell", help="projection count for the extremes strategy")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=10**7)
    p.set_defaults(func=cmd_qi_ell)

    p = sub.add_parser("annulus-run", help="annulus query success rates")
    p.add_argument("--data", required=True, help="dataset path, or 'planted'")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--bucket-width", type=float)
    p.add_argument("--seeds", dest="trials", type=int, default=200, help="number of (build, query) trials")
    p.add_argument("--queries", type=int, default=1,
                   help="queries per index build (real data only; planted instances have one)")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--n", type=int, default=10_000, help="planted instance size")
    p.add_argument("--d", type=int, default=10, help="planted instance dimension")
    for name in ("k", "L", "ell", "m"):
        p.add_argument(f"--{name}", type=int, help=f"override the derived {name}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_annulus_run)

    p = sub.add_parser("lemma3", help="Monte Carlo check of the projection tail bounds")
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lemma3)

    p = sub.add_parser("convert-movielens", help="ratings.csv to sparse movie vectors")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--map", required=True)
    p.set_defaults(func=cmd_convert_movielens)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as err:
        print(f"furthest: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (datasets.DataFormatError, FormatError, DimensionMismatchError, DegenerateDataError,
            MemoryBudgetError, OSError) as err:
        print(f"furthest: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except exp.InvariantViolation as err:
        print(f"furthest: invariant violated: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as err:
        print(f"furthest: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
