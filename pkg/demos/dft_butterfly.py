"""Butterfly factorization of the 2D DFT, checked against the FFT.

The DFT has an exact fast transform, which makes it a convenient reference:
the factorization is built from kernel entries only, then applied and
compared with ``numpy.fft`` for a few ranks.

    python demos/dft_butterfly.py --n 32 --ranks 4 8 12
"""

import argparse
import time

import numpy as np

from butterfly2d import geometry as geo
from butterfly2d import kernels as kn
from butterfly2d.butterfly import build_butterfly
from butterfly2d.randlr import RandConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", type=int, default=32)
    parser.add_argument("--ranks", type=int, nargs="+", default=[4, 8, 12])
    args = parser.parse_args()

    n, N = args.n, args.n**2
    X, omega = geo.build_uniform_grids(n)
    L = geo.log2_int(n)
    tx = geo.build_quadtree(X, geo.uniform_x_box(), L)
    tw = geo.build_quadtree(omega, geo.uniform_omega_box(n), L)
    kernel = kn.dft_kernel(n)

    rng = np.random.default_rng(0)
    g = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    exact = kernel.matvec(g)
    print(f"n={n}  N={N}  depth L={L}  dense entries {N * N}")
    print(f"{'r':>4} {'rel err':>10} {'nnz':>10} {'factor s':>9}")
    for r in args.ranks:
        t0 = time.perf_counter()
        bf = build_butterfly(kernel, tx, tw, RandConfig(r))
        elapsed = time.perf_counter() - t0
        err = np.linalg.norm(bf.apply(g) - exact) / np.linalg.norm(exact)
        print(f"{r:>4} {err:>10.2e} {bf.nnz:>10} {elapsed:>9.2f}")


if __name__ == "__main__":
    main()
