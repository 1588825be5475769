"""Command-line front end: ingestion, planning, runs, reports, format dumps.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from . import formats as F
from . import harness as H
from . import matrices as M
from .iterative_solvers import PrecisionTriple

USAGE_ERROR = 1
DATA_ERROR = 2

_MPIR_FAMILIES = {"float": "ieee", "posit": "posit", "takum": "takum_linear"}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    p = _Parser(prog="taperbench",
                description="sparse solver experiments over machine formats")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="filter .mtx directory into a "
                        "dataset bundle")
    pi.add_argument("--input", required=True, help="directory of .mtx files")
    pi.add_argument("--output", required=True, help="bundle file to write")
    pi.add_argument("--max-nnz", type=int, default=10000,
                    help="nonzero cap (default 10000)")

    pp = sub.add_parser("plan", help="prebuild structural plans")
    pp.add_argument("--bundle", required=True)
    pp.add_argument("--out", required=True, help="plan directory")

    pr = sub.add_parser("run", help="run experiments and emit reports")
    pr.add_argument("--bundle", required=True)
    pr.add_argument("--solver", required=True, choices=H.SOLVERS)
    pr.add_argument("--formats", help="comma-separated format names")
    pr.add_argument("--mpir-family", choices=sorted(_MPIR_FAMILIES))
    pr.add_argument("--mpir-config", help="L,W,H widths, e.g. 16,32,64")
    pr.add_argument("--seed", type=lambda s: int(s, 0),
                    default=H.DEFAULT_SEED)
    pr.add_argument("--out", required=True, help="output directory")
    pr.add_argument("--plans", help="directory of prebuilt plans")
    pr.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    pe = sub.add_parser("report", help="re-emit CSVs from stored outcomes")
    pe.add_argument("--out", required=True, help="run output directory")

    pd = sub.add_parser("dump-formats", help="write a codec conformance CSV")
    pd.add_argument("--format", required=True)
    pd.add_argument("--out", required=True)
    pd.add_argument("--sample", type=int,
                    help="evenly strided code count (required above 16 bits)")
    return p


# ---------------------------------------------------------------------------
# dump-formats
# ---------------------------------------------------------------------------

def dump_code_range(fid: F.FormatId, sample: int | None):
    total = 1 << fid.width
    if sample is None:
        return range(total)
    return (i * total // sample for i in range(sample))


def _cmd_dump(args) -> int:
    try:
        fid = F.parse_format(args.format)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    if fid.width > 16 and not args.sample:
        print(f"error: {fid.name} is a {fid.width}-bit format; "
              "exhaustive dumps stop at 16 bits, pass --sample N",
              file=sys.stderr)
        return USAGE_ERROR
    with open(args.out, "w") as f:
        f.write(F.dump_codes(fid, dump_code_range(fid, args.sample)))
    return 0


# ---------------------------------------------------------------------------
# remaining commands
# ---------------------------------------------------------------------------

def _cmd_ingest(args) -> int:
    if not os.path.isdir(args.input):
        print(f"error: {args.input} is not a directory", file=sys.stderr)
        return DATA_ERROR
    bundle = M.filter_dataset(args.input, max_nnz=args.max_nnz)
    c = bundle.counts
    rejected = c["scanned"] - c["kept"]
    print(f"scanned={c['scanned']} kept={c['kept']} rejected={rejected}")
    for fn, err in bundle.errors:
        print(f"  {fn}: {err}")
    if len(bundle) == 0:
        print("error: no matrices pass the filter", file=sys.stderr)
        return DATA_ERROR
    M.bundle_write(bundle, args.output)
    return 0


def _cmd_plan(args) -> int:
    try:
        bundle = M.bundle_load(args.bundle)
    except (OSError, M.BundleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    written = H.build_plans(bundle, args.out)
    print(f"plans written={written} matrices={len(bundle)}")
    return 0


class _UsageError(Exception):
    pass


def _parse_run_targets(args):
    if args.solver == "mpir":
        if not (args.mpir_family and args.mpir_config):
            raise _UsageError(
                "mpir needs --mpir-family and --mpir-config L,W,H")
        widths = [int(w) for w in args.mpir_config.split(",")]
        if len(widths) != 3:
            raise ValueError("--mpir-config takes exactly three widths")
        triple = PrecisionTriple(_MPIR_FAMILIES[args.mpir_family], *widths)
        return (), (triple,)
    if not args.formats:
        raise _UsageError(f"{args.solver} needs --formats")
    fmts = tuple(F.parse_format(n.strip())
                 for n in args.formats.split(","))
    return fmts, ()


def _cmd_run(args) -> int:
    try:
        fmts, triples = _parse_run_targets(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    try:
        cfg = H.RunConfig(args.solver, args.bundle, args.out,
                          formats=fmts, triples=triples, seed=args.seed,
                          jobs=args.jobs, plans_dir=args.plans)
        results = H.run_experiment(cfg)
    except (OSError, M.BundleError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    print(H.summarize(results))
    return 0


def _cmd_report(args) -> int:
    stores = sorted(glob.glob(os.path.join(args.out, "solve_*",
                                           "outcomes.jsonl")))
    if not stores:
        print(f"error: no outcome stores under {args.out}", file=sys.stderr)
        return DATA_ERROR
    for store in stores:
        outdir = os.path.dirname(store)
        with open(os.path.join(outdir, "run.json")) as f:
            man = json.load(f)
        records = list(H._load_store(outdir).values())
        H._emit_all(outdir, man["solver"], man["columns"], records)
        print(f"{os.path.basename(outdir)}: rows={len(records)}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "plan": _cmd_plan,
    "run": _cmd_run,
    "report": _cmd_report,
    "dump-formats": _cmd_dump,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
