"""Butterfly factorizations of 2D complementary low-rank kernels.

Submodules: :mod:`geometry` (grids, quadtrees, polar map, coronas),
:mod:`randlr` (randomized low-rank SVDs), :mod:`kernels` (kernel handles and
the Fourier / FIO examples), :mod:`butterfly` (the factorization itself),
:mod:`variants` (polar and multiscale versions), :mod:`io` and :mod:`bench`.
"""

from .butterfly import BlockSparseFactor, ButterflyFactorization, build_butterfly
from .geometry import (CoronaPartition, PointSet, QuadTree, build_quadtree, build_uniform_grids,
                       corona_decompose, morton_decode, morton_index, polar_transform)
from .kernels import (RADON, KernelHandle, PhaseFunction, composition_kernel, dft_kernel, fio_kernel,
                      psi_phase, radon_phase, synthetic_lowrank_kernel)
from .io import FormatError, load, save
from .randlr import Form, LowRankApprox, RandConfig, convert_form, rsvd_matvec, rsvd_sampling, truncated_svd
from .variants import (MultiscaleFactorization, PolarFactorization, apply_mbf, apply_pbf, build_mbf,
                       build_pbf)

__version__ = "0.1.0"

__all__ = [
    "BlockSparseFactor", "ButterflyFactorization", "build_butterfly",
    "CoronaPartition", "PointSet", "QuadTree", "build_quadtree", "build_uniform_grids",
    "corona_decompose", "morton_decode", "morton_index", "polar_transform",
    "RADON", "KernelHandle", "PhaseFunction", "composition_kernel", "dft_kernel", "fio_kernel",
    "psi_phase", "radon_phase", "synthetic_lowrank_kernel",
    "FormatError", "load", "save",
    "Form", "LowRankApprox", "RandConfig", "convert_form", "rsvd_matvec", "rsvd_sampling", "truncated_svd",
    "MultiscaleFactorization", "PolarFactorization", "apply_mbf", "apply_pbf", "build_mbf", "build_pbf",
]
