"""Polar and multiscale butterfly factorizations of Fourier integral operators.

An FIO kernel ``exp(2 pi i Phi(x, xi))`` with ``Phi`` homogeneous of degree one
in ``xi`` is only complementary low rank away from ``xi = 0``. Two remedies:

* polar (PBF): change variables ``xi -> p`` so the phase becomes smooth in
  ``p`` and factor the whole kernel over ``X x P`` at once;
* multiscale (MBF): split ``Omega`` into dyadic coronas that stay away from
  the origin, factor each one separately, and treat the small center densely.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .butterfly import ButterflyFactorization, build_butterfly
from .kernels import KernelHandle, PhaseFunction, check_homogeneous, fio_kernel, polar_kernel
from .randlr import RandConfig


def _as_input(g: np.ndarray, N: int) -> np.ndarray:
    g = np.asarray(g)
    if g.shape[0] != N:
        raise ValueError(f"input has length {g.shape[0]}, expected {N}")
    return g


# -- polar ------------------------------------------------------------------


@dataclass
class PolarFactorization:
    """Butterfly factorization over ``X x P`` plus the ``xi -> p`` index map."""

    bf: ButterflyFactorization
    index_map: np.ndarray
    n: int
    stats: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bf.shape

    @property
    def nnz(self) -> int:
        return self.bf.nnz

    def apply(self, g: np.ndarray) -> np.ndarray:
        return apply_pbf(self, g)

    def adjoint_apply(self, u: np.ndarray) -> np.ndarray:
        u = _as_input(u, self.shape[0])
        out = np.empty(self.shape[1:] + u.shape[1:], dtype=complex)
        out[self.index_map] = self.bf.adjoint_apply(u)
        return out


def pbf_depth(n: int) -> int:
    """Tree depth of the polar factorization: ``log2 n`` on both sides."""
    return geo.log2_int(n)


def build_pbf(phase: PhaseFunction, n: int, cfg: RandConfig, method: str | None = None,
              kernel: KernelHandle | None = None, extra_levels: int = 0) -> PolarFactorization:
    """Factor ``exp(2 pi i Phi(x, xi))`` after the polar change of variables.

    By default the entry oracle ``exp(2 pi i n Psi(x, p))`` is sampled.
    ``method="matvec"`` instead probes a fast operator for the kernel in grid
    order, which ``kernel`` must supply; since ``P`` keeps the ordering of
    ``Omega`` that operator needs no re-indexing.
    """
    check_homogeneous(phase, n)
    X, omega = geo.build_uniform_grids(n)
    P, index_map = geo.polar_transform(omega, n)
    if extra_levels < 0:
        raise ValueError("extra_levels must be nonnegative")
    L = pbf_depth(n) + extra_levels
    t0 = time.perf_counter()
    tx = geo.build_quadtree(X, geo.uniform_x_box(), L)
    tp = geo.build_quadtree(P, geo.polar_box(), L)
    N = n * n
    if method == "matvec":
        if kernel is None or kernel.matvec is None:
            raise ValueError("the matvec construction needs a kernel with a fast matvec")
        handle = KernelHandle((N, N), matvec=kernel.matvec, adjoint_matvec=kernel.adjoint_matvec,
                              name=f"polar-{kernel.name}", meta={"n": n})
    else:
        handle = KernelHandle((N, N), entry=polar_kernel(phase, n), name="polar", meta={"n": n})
    bf = build_butterfly(handle, tx, tp, cfg, method)
    stats = {"t_factor": time.perf_counter() - t0, "L": L, "nnz": bf.nnz}
    return PolarFactorization(bf, index_map, n, stats)


def apply_pbf(pf: PolarFactorization, g: np.ndarray) -> np.ndarray:
    """``u(x) = sum_p exp(2 pi i n Psi(x, p)) g(p)`` with ``g`` given over ``Omega``."""
    g = _as_input(g, pf.shape[1])
    return pf.bf.apply(g[pf.index_map])


# -- multiscale ---------------------------------------------------------------


def corona_depth(L: int, t: int) -> int:
    """Even tree depth ``2 floor((L - t) / 2)`` used for corona ``t``."""
    return 2 * ((L - t) // 2)


@dataclass
class CoronaPiece:
    t: int
    restriction: np.ndarray
    bf: ButterflyFactorization


@dataclass
class MultiscaleFactorization:
    """``K = K_C R_C + sum_t K_t R_t`` with dense ``K_C`` and factored ``K_t``."""

    n: int
    pieces: list
    center_restriction: np.ndarray
    center: np.ndarray
    center_halfwidth: int = 8
    stats: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.center.shape[0], self.n * self.n

    @property
    def nnz(self) -> int:
        return int(self.center.size + sum(p.bf.nnz for p in self.pieces))

    def apply(self, g: np.ndarray) -> np.ndarray:
        return apply_mbf(self, g)

    def adjoint_apply(self, u: np.ndarray) -> np.ndarray:
        u = _as_input(u, self.shape[0])
        out = np.zeros(self.shape[1:] + u.shape[1:], dtype=complex)
        out[self.center_restriction] = self.center.conj().T @ u
        for piece in self.pieces:
            out[piece.restriction] = piece.bf.adjoint_apply(u)
        return out


def _dense_center(kernel: KernelHandle, X: geo.PointSet, omega: geo.PointSet, idx: np.ndarray,
                  method: str) -> np.ndarray:
    if method == "sampling":
        return np.asarray(kernel.entry(X.points, omega.points[idx]), dtype=complex)
    E = np.zeros((len(omega), len(idx)), dtype=complex)
    E[idx, np.arange(len(idx))] = 1.0
    return np.asarray(kernel.matvec(E), dtype=complex)


def build_mbf(kernel: KernelHandle | PhaseFunction, n: int, cfg: RandConfig, method: str | None = None,
              center_halfwidth: int = 8, extra_levels: int = 0) -> MultiscaleFactorization:
    """Factor a kernel corona by corona, with the center block stored densely.

    Corona ``t`` gets trees of depth ``2 floor((log2 n - t) / 2)`` over ``X``
    and over the square ``[-n/2^(t+1), n/2^(t+1)]^2``; only the frequencies of
    the corona itself are inserted, so the middle of that tree stays empty.
    ``extra_levels`` is added to ``log2 n`` before that rule is applied.
    """
    if isinstance(kernel, PhaseFunction):
        kernel = fio_kernel(kernel, n)
    method = method or ("sampling" if kernel.entry is not None else "matvec")
    if method == "sampling" and kernel.entry is None:
        raise ValueError(f"{kernel.name} has no entry oracle; use the matvec construction")
    if method == "matvec" and kernel.matvec is None:
        raise ValueError(f"{kernel.name} has no matvec; use the sampling construction")
    X, omega = geo.build_uniform_grids(n)
    part = geo.corona_decompose(omega, n, center_halfwidth)
    if extra_levels < 0:
        raise ValueError("extra_levels must be nonnegative")
    L = geo.log2_int(n) + extra_levels
    t0 = time.perf_counter()
    trees_x = {}
    pieces = []
    for t, idx in enumerate(part.coronas):
        Lt = corona_depth(L, t)
        if Lt not in trees_x:
            trees_x[Lt] = geo.build_quadtree(X, geo.uniform_x_box(), Lt)
        tw = geo.build_quadtree(omega.subset(idx), geo.corona_box(n, t), Lt)
        bf = build_butterfly(kernel, trees_x[Lt], tw, cfg, method, key=(t,))
        pieces.append(CoronaPiece(t, idx, bf))
    t1 = time.perf_counter()
    center = _dense_center(kernel, X, omega, part.center, method)
    t2 = time.perf_counter()
    mf = MultiscaleFactorization(n, pieces, part.center, center, center_halfwidth)
    mf.stats = {"t_factor": t2 - t0, "t_pieces": t1 - t0, "t_center": t2 - t1,
                "depths": [p.bf.L for p in pieces], "nnz": mf.nnz}
    return mf


def apply_mbf(mf: MultiscaleFactorization, g: np.ndarray) -> np.ndarray:
    """``u = K_C g[R_C] + sum_t K_t g[R_t]``, summed in corona order."""
    g = _as_input(g, mf.shape[1])
    u = mf.center @ g[mf.center_restriction]
    for piece in mf.pieces:
        u = u + piece.bf.apply(g[piece.restriction])
    return u
