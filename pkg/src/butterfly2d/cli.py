"""Command line front end: ``butterfly2d {factor,apply,bench,verify}``.

Exit status is 0 on success, 2 for a bad configuration (unknown kernel,
unsupported method, unreadable factor file, ...) and 3 when a run completes
but its error exceeds ``--max-err``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
import time

import numpy as np
from threadpoolctl import threadpool_limits

from . import bench
from . import io as bfio
from .butterfly import ButterflyFactorization, check_middle_pattern

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("butterfly2d")


def _run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernel", choices=bench.KERNELS, default="fio-radon")
    parser.add_argument("--method", choices=bench.METHODS, default="mbf-s")
    parser.add_argument("--n", type=int, default=64, help="grid side, a power of two")
    parser.add_argument("--rank", type=int, default=12)
    parser.add_argument("--oversample", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--center-halfwidth", type=int, default=8)
    parser.add_argument("--extra-levels", type=int, default=0,
                        help="tree levels beyond the default depth (pbf/mbf/bf)")
    parser.add_argument("--kernel-rank", type=int, default=2, help="rank of the synthetic kernel")
    parser.add_argument("--inner-factor", help="saved factorization of K (composition only)")


def _config(args) -> dict:
    return {"kernel": args.kernel, "method": args.method, "n": args.n, "rank": args.rank,
            "oversample": args.oversample, "seed": args.seed, "center_halfwidth": args.center_halfwidth,
            "extra_levels": args.extra_levels, "kernel_rank": args.kernel_rank,
            "inner_factor": args.inner_factor}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="butterfly2d",
                                     description="Butterfly factorizations of 2D oscillatory kernels.")
    parser.add_argument("--threads", type=int, default=0, help="BLAS threads (0 = library default)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", help="build a factorization and save it")
    _run_args(p)
    p.add_argument("--out", required=True, help="output factorization file")

    p = sub.add_parser("apply", help="apply a saved factorization to a vector")
    p.add_argument("--factor", required=True, help="factorization file")
    p.add_argument("--input", help=".npy vector over Omega (default: seeded complex Gaussian)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the result as .npy")

    p = sub.add_parser("bench", help="timed runs with sampled error, written as CSV or JSON")
    _run_args(p)
    p.add_argument("--config", help="JSON file with one run config or a list of them (overrides flags)")
    p.add_argument("--out", help="output file (default: stdout, CSV only)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--max-err", type=float)

    p = sub.add_parser("verify", help="build (or load) a factorization and check it against direct evaluation")
    _run_args(p)
    p.add_argument("--factor", help="check this saved factorization instead of building one")
    p.add_argument("--max-err", type=float)
    return parser


def _structure(fact) -> dict:
    """Structural checks on every butterfly inside ``fact``."""
    if isinstance(fact, ButterflyFactorization):
        bfs = [fact]
    elif hasattr(fact, "pieces"):
        bfs = [p.bf for p in fact.pieces]
    else:
        bfs = [fact.bf]
    chained = all(a.ncols == b.nrows for bf in bfs for a, b in zip(bf.factors[:-1], bf.factors[1:]))
    # (L - h) G factors, h H factors, plus U^L, M^h and V^L.
    counts = all(len(bf.factors) == bf.L + 3 for bf in bfs)
    pattern = all(check_middle_pattern(bf) for bf in bfs if bf.mid_ranks is not None)
    return {"chained": chained, "factor_count": counts, "middle_pattern": pattern}


def cmd_factor(args) -> int:
    cfg = bench.validate(_config(args))
    kernel = bench.make_kernel(cfg)
    t0 = time.perf_counter()
    fact = bench.factorize(kernel, cfg)
    elapsed = time.perf_counter() - t0
    bfio.save(fact, args.out)
    print(json.dumps({"out": args.out, "t_factor_sec": elapsed, "nnz_total": int(fact.nnz),
                      "shape": list(fact.shape)}))
    return EXIT_OK


def cmd_apply(args) -> int:
    fact = bfio.load(args.factor)
    N = fact.shape[1]
    if args.input:
        g = np.load(args.input)
    else:
        g = bench.random_input(N, np.random.default_rng(args.seed))
    if g.shape[0] != N:
        raise bench.ConfigError(f"input has length {g.shape[0]}, factorization expects {N}")
    t0 = time.perf_counter()
    u = fact.apply(g)
    elapsed = time.perf_counter() - t0
    if args.out:
        np.save(args.out, u)
    print(json.dumps({"t_apply_sec": elapsed, "norm": float(np.linalg.norm(u))}))
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.config:
        with open(args.config) as fh:
            configs = json.load(fh)
    else:
        configs = _config(args)
    records = bench.run_bench(configs)
    if args.out:
        bench.write_records(records, args.out, args.format)
    else:
        if args.format != "csv":
            raise bench.ConfigError("JSON output needs --out")
        print(bench.CSV_HEADER)
        for rec in records:
            print(",".join(str(v) for v in rec.row()))
    if args.max_err is not None and any(rec.err > args.max_err for rec in records):
        worst = max(rec.err for rec in records)
        print(f"error {worst:.3e} exceeds --max-err {args.max_err:.3e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = bench.validate(_config(args))
    kernel = bench.make_kernel(cfg)
    if args.factor:
        fact = bfio.load(args.factor)
        if fact.shape != kernel.shape:
            raise bench.ConfigError(f"factorization has shape {fact.shape}, kernel {kernel.shape}")
    else:
        fact = bench.factorize(kernel, cfg)
    N = cfg["n"] ** 2
    rng = np.random.default_rng(cfg["seed"])
    g = bench.random_input(N, rng)
    rows = bench.sample_points(N, rng)
    err = bench.estimate_error(fact.apply(g)[rows], bench.reference(kernel, cfg, g, rows))
    report = {"err": err, "samples": len(rows), **_structure(fact)}
    print(json.dumps(report))
    ok = all(v for k, v in report.items() if isinstance(v, bool))
    if not ok or (args.max_err is not None and err > args.max_err):
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"factor": cmd_factor, "apply": cmd_apply, "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    limits = threadpool_limits(args.threads) if args.threads > 0 else contextlib.nullcontext()
    try:
        with limits:
            return COMMANDS[args.command](args)
    except (bench.ConfigError, bfio.FormatError, OSError, json.JSONDecodeError) as exc:
        print(f"butterfly2d: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # Remaining ValueErrors come from argument checks inside the library.
        print(f"butterfly2d: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
