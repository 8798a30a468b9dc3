"""Polar and multiscale factorizations of a Radon-type FIO.

The phase is singular at the zero frequency, so the plain butterfly is a poor
fit. The polar variant removes the singularity by a change of variables; the
multiscale variant keeps the Cartesian grid and splits the frequencies into
dyadic coronas plus a small dense center. Errors are estimated on 256 sampled
output points against direct summation.

    python demos/radon_fio.py --n 64 --rank 12
"""

import argparse

from butterfly2d import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", type=int, default=64)
    parser.add_argument("--rank", type=int, default=12)
    args = parser.parse_args()

    print(bench.CSV_HEADER)
    for method in ("pbf-s", "mbf-s"):
        rec = bench.run_one({"kernel": "fio-radon", "method": method, "n": args.n, "rank": args.rank})
        print(",".join(str(v) for v in rec.row()))


if __name__ == "__main__":
    main()
