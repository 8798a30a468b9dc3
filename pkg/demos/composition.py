"""Factorizing an operator that is only available as a matvec.

The operator is K F K with K a Radon-type FIO (itself applied through a saved
multiscale factorization) and F the 2D DFT. Entries are not available, so the
outer factorization is built from products with random probe matrices. The
inner factorization is written to disk and read back, as the CLI would do
with ``--inner-factor``.

    python demos/composition.py --n 32 --inner-rank 16 --rank 12
"""

import argparse
import tempfile
from pathlib import Path

from butterfly2d import bench
from butterfly2d import io as bfio
from butterfly2d import kernels as kn
from butterfly2d.randlr import RandConfig
from butterfly2d.variants import build_mbf


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", type=int, default=32)
    parser.add_argument("--inner-rank", type=int, default=16)
    parser.add_argument("--rank", type=int, default=12)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "inner.bf2d"
        bfio.save(build_mbf(kn.RADON, args.n, RandConfig(args.inner_rank)), path)
        print(f"inner factorization: {path.stat().st_size / 2**20:.1f} MiB")
        rec = bench.run_one({"kernel": "composition", "method": "mbf-m", "n": args.n, "rank": args.rank,
                             "inner_factor": str(path)})
    print(bench.CSV_HEADER)
    print(",".join(str(v) for v in rec.row()))


if __name__ == "__main__":
    main()
