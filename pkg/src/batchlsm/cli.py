"""Command-line entry point: ``batchlsm <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench
from .batch import Batch
from .dump import dumps
from .errors import LsmError
from .lsm import Lsm
from .sorted_array import SortedArray


def _int(text: str) -> int:
    # accept 2**20 / 2^20 shorthand as well as plain integers
    text = text.replace("^", "**")
    if "**" in text:
        base, exp = text.split("**")
        return int(base) ** int(exp)
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="batchlsm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--batch-size", type=_int, nargs="+", default=None, metavar="B")
    common.add_argument("--total", type=_int, default=None, metavar="N")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--csv", default=None, metavar="PATH", help="write CSV here instead of stdout")
    common.add_argument("--structure", choices=("lsm", "sa"), action="append", default=None)

    query = argparse.ArgumentParser(add_help=False)
    query.add_argument("--exist-fraction", type=float, default=1.0)
    query.add_argument("--range-l", type=float, default=8.0)
    query.add_argument("--max-queries", type=_int, default=None)
    query.add_argument("--r-values", type=_int, nargs="+", default=None)

    sub.add_parser("insert-sweep", parents=[common], help="per-batch insertion times and rate summary")
    sub.add_parser("effective-rate", parents=[common], help="resident elements over cumulative time")
    for kind in ("lookup", "count", "range"):
        sub.add_parser(f"{kind}-bench", parents=[common, query], help=f"{kind} query rates per r")
    c = sub.add_parser("cleanup-bench", parents=[common, query], help="cleanup versus rebuild")
    c.add_argument("--stale-fraction", type=float, default=0.1)
    d = sub.add_parser("diff-test", parents=[common], help="randomized differential test against the oracle")
    d.add_argument("--schedules", type=int, default=20)
    d.add_argument("--max-batches", type=int, default=64)
    dm = sub.add_parser("dump", parents=[common], help="build a structure and print its text dump")
    dm.add_argument("--cleanup", action="store_true")
    dm.add_argument("--delete-fraction", type=float, default=0.0)
    return p


def _dump(args) -> str:
    b = args.batch_size[0]
    rng = np.random.default_rng(args.seed)
    keys = bench.distinct_keys(rng, args.total)
    values = rng.integers(0, 1 << 32, args.total, dtype=np.int64)
    kind = (args.structure or ["lsm"])[0]
    s = Lsm(b) if kind == "lsm" else SortedArray(b)
    for j in range(args.total // b):
        sl = slice(j * b, (j + 1) * b)
        dels = rng.random(b) < args.delete_fraction
        s.update_batch(Batch(keys[sl], np.where(dels, 0, values[sl]), dels))
    if args.cleanup and isinstance(s, Lsm):
        s.cleanup()
    return dumps(s)


# (batch sizes, total) when the flags are omitted; benchmarks run at desk
# scale, diff-test and dump work on small structures
_DEFAULTS = {"diff-test": ([256], 1 << 20), "dump": ([4], 16)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    batch_sizes, total = _DEFAULTS.get(args.command, ([1 << 16], 1 << 20))
    if args.batch_size is None:
        args.batch_size = batch_sizes
    if args.total is None:
        args.total = total
    structures = tuple(dict.fromkeys(args.structure or ["lsm", "sa"]))
    try:
        if args.command == "dump":
            text = _dump(args)
            if args.csv:
                with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        spec = bench.WorkloadSpec(seed=args.seed, n=args.total, b=args.batch_size[0],
                                  exist_fraction=getattr(args, "exist_fraction", 1.0),
                                  range_l=getattr(args, "range_l", 8.0))
        if args.command == "insert-sweep":
            rows = bench.run_insert_sweep(spec, args.batch_size, structures)
        elif args.command == "effective-rate":
            rows = bench.run_effective_rate(spec, args.batch_size, structures)
        elif args.command == "cleanup-bench":
            rows = bench.run_cleanup_bench(spec, args.stale_fraction, args.max_queries)
        elif args.command == "diff-test":
            rows = bench.run_diff_test(args.seed, args.schedules, args.batch_size[0], args.max_batches)
        else:
            kind = args.command.split("-")[0]
            rows = []
            for b in args.batch_size:
                spec.b = b
                rows += bench.run_query_bench(spec, kind, args.r_values, args.max_queries, structures)
    except LsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.csv:
        bench.write_csv(rows, args.csv)
    else:
        bench.write_csv(rows, sys.stdout)
    if args.command == "diff-test" and rows[-1].value:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
