"""Kernel matrices: entry evaluators, fast matvecs, and the concrete FIO examples.

All vectors over ``X`` or ``Omega`` use the row-major grid order produced by
:func:`butterfly2d.geometry.build_uniform_grids`. Matvec oracles accept either
a vector of length ``N`` or an ``N x b`` block of vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import is_power_of_two

TWO_PI = 2 * np.pi


@dataclass
class KernelHandle:
    """A kernel matrix known through entries, products, or both.

    ``entry(x, xi)`` takes point arrays of shape ``(m, 2)`` and ``(k, 2)`` and
    returns the ``m x k`` block of kernel values; leading batch dimensions
    ``(B, m, 2)``, ``(B, k, 2)`` give a ``(B, m, k)`` stack. ``matvec``/``adjoint_matvec``
    act on full-length vectors (or blocks of them) in grid order.
    """

    shape: tuple[int, int]
    entry: Optional[Callable] = None
    matvec: Optional[Callable] = None
    adjoint_matvec: Optional[Callable] = None
    name: str = "kernel"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.entry is None and self.matvec is None:
            raise ValueError("kernel needs an entry oracle or a matvec")
        if self.matvec is not None and self.adjoint_matvec is None:
            raise ValueError("a matvec must come with its adjoint")

    @property
    def mode(self) -> str:
        if self.entry is not None and self.matvec is not None:
            return "both"
        return "entry" if self.entry is not None else "matvec"

    def dense(self, X, omega) -> np.ndarray:
        if self.entry is None:
            raise ValueError(f"{self.name} has no entry oracle")
        return self.entry(X.points, omega.points)


@dataclass(frozen=True)
class PhaseFunction:
    """Real phase ``Phi(x, xi)`` of an FIO kernel ``exp(2 pi i Phi)``."""

    evaluate: Callable
    descriptor: dict = field(default_factory=dict)

    def __call__(self, x, xi):
        return self.evaluate(np.atleast_2d(x), np.atleast_2d(xi))


# -- phases ---------------------------------------------------------------


def radon_coefficients(x):
    x = np.asarray(x, dtype=float)
    s = np.sin(TWO_PI * x[..., 0]) * np.sin(TWO_PI * x[..., 1])
    c = np.cos(TWO_PI * x[..., 0]) * np.cos(TWO_PI * x[..., 1])
    return (2 + s) / 16, (2 + c) / 16


def _pairwise_dot(x, xi):
    return x @ np.swapaxes(xi, -1, -2)


def radon_phase(x, xi):
    """Generalized Radon phase ``x.xi + sqrt(c1(x)^2 xi1^2 + c2(x)^2 xi2^2)``.

    Evaluated on all pairs: point arrays of shape ``(..., m, 2)`` and
    ``(..., k, 2)`` give a result of shape ``(..., m, k)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    c1, c2 = radon_coefficients(x)
    rad = np.sqrt((c1**2)[..., :, None] * (xi[..., 0] ** 2)[..., None, :]
                  + (c2**2)[..., :, None] * (xi[..., 1] ** 2)[..., None, :])
    return _pairwise_dot(x, xi) + rad


def linear_phase(x, xi):
    return _pairwise_dot(np.atleast_2d(x), np.atleast_2d(xi))


RADON = PhaseFunction(radon_phase, {"name": "radon",
                                    "c1": "(2 + sin(2 pi x1) sin(2 pi x2)) / 16",
                                    "c2": "(2 + cos(2 pi x1) cos(2 pi x2)) / 16"})
LINEAR = PhaseFunction(linear_phase, {"name": "linear"})
NEG_LINEAR = PhaseFunction(lambda x, xi: -linear_phase(x, xi), {"name": "dft"})


def check_homogeneous(phase: PhaseFunction, n: int, tol: float = 1e-8, seed: int = 0) -> None:
    """Spot-check ``Phi(x, lam xi) == lam Phi(x, xi)``; raise if it fails."""
    rng = np.random.default_rng(seed)
    x = rng.random((8, 2))
    xi = rng.uniform(-n / 2, n / 2, (8, 2))
    base = phase(x, xi)
    scale = np.max(np.abs(base)) + 1.0
    for lam in (2.0, 3.5):
        if np.max(np.abs(phase(x, lam * xi) - lam * base)) > tol * lam * scale:
            raise ValueError(f"phase {phase.descriptor.get('name', '?')} is not homogeneous of degree 1")


def psi_phase(phase: PhaseFunction, n: int) -> Callable:
    """Phase in polar variables: ``Psi(x, p) = Phi(x, xi(p)) / n``.

    Uses homogeneity: ``Psi = (sqrt(2)/2) p1 Phi(x, (cos 2pi p2, sin 2pi p2))``.
    """

    def psi(x, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        ang = TWO_PI * p[..., 1]
        direction = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return (np.sqrt(2) / 2) * phase(x, direction) * p[..., None, :, 0]

    return psi


# -- kernels ----------------------------------------------------------------


def fio_kernel(phase: PhaseFunction, n: int) -> KernelHandle:
    """Entry-only FIO kernel ``exp(2 pi i Phi(x, xi))`` on the ``n x n`` grids."""

    def entry(x, xi):
        return np.exp(1j * TWO_PI * phase(x, xi))

    N = n * n
    return KernelHandle((N, N), entry=entry, name=f"fio-{phase.descriptor.get('name', 'phase')}",
                        meta={"n": n, "phase": phase})


def polar_kernel(phase: PhaseFunction, n: int) -> Callable:
    """Entry oracle ``exp(2 pi i n Psi(x, p))`` over polar points."""
    psi = psi_phase(phase, n)

    def entry(x, p):
        return np.exp(1j * TWO_PI * n * psi(x, p))

    return entry


def _checker(n: int) -> np.ndarray:
    k = np.arange(n)
    return ((-1.0) ** np.add.outer(k, k)).ravel()


def _as_grid(v: np.ndarray, n: int):
    v = np.asarray(v)
    vec = v.ndim == 1
    return v.reshape(n, n, -1), vec


def _from_grid(a: np.ndarray, vec: bool):
    n1, n2, b = a.shape
    out = a.reshape(n1 * n2, b)
    return out[:, 0] if vec else out


def fft_forward(v: np.ndarray, n: int) -> np.ndarray:
    """``u(x) = sum_xi exp(-2 pi i x.xi) v(xi)``, i.e. Omega -> X."""
    g, vec = _as_grid(v, n)
    u = np.fft.fft2(g, axes=(0, 1))
    u *= _checker(n).reshape(n, n, 1)
    return _from_grid(u, vec)


def fft_adjoint(u: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of :func:`fft_forward`, X -> Omega."""
    g, vec = _as_grid(u, n)
    g = g * _checker(n).reshape(n, n, 1)
    v = np.fft.ifft2(g, axes=(0, 1)) * (n * n)
    return _from_grid(v, vec)


def dft_apply(u: np.ndarray, n: int) -> np.ndarray:
    """``(F u)(eta) = sum_y exp(-2 pi i y.eta) u(y)``, i.e. X -> Omega."""
    g, vec = _as_grid(u, n)
    g = g * _checker(n).reshape(n, n, 1)
    return _from_grid(np.fft.fft2(g, axes=(0, 1)), vec)


def dft_adjoint(v: np.ndarray, n: int) -> np.ndarray:
    g, vec = _as_grid(v, n)
    u = np.fft.ifft2(g, axes=(0, 1)) * (n * n)
    u *= _checker(n).reshape(n, n, 1)
    return _from_grid(u, vec)


def dft_kernel(n: int) -> KernelHandle:
    """Fourier kernel ``exp(-2 pi i x.xi)`` with an FFT-backed matvec."""
    if not is_power_of_two(n):
        raise ValueError(f"n must be a power of two, got {n}")

    def entry(x, xi):
        return np.exp(-1j * TWO_PI * linear_phase(x, xi))

    N = n * n
    return KernelHandle((N, N), entry=entry,
                        matvec=lambda g: fft_forward(g, n),
                        adjoint_matvec=lambda u: fft_adjoint(u, n),
                        name="dft", meta={"n": n, "phase": NEG_LINEAR})


def _operator_pair(op):
    if hasattr(op, "adjoint_apply"):
        return op.apply, op.adjoint_apply
    if getattr(op, "matvec", None) is not None:
        return op.matvec, op.adjoint_matvec
    raise TypeError("inner operator needs apply/adjoint_apply or matvec/adjoint_matvec")


def composition_kernel(inner, n: int) -> KernelHandle:
    """Matvec-only kernel of ``K F K`` where ``F`` is the unnormalized DFT.

    ``inner`` is any fast operator for ``K`` exposing ``apply``/``adjoint_apply``
    (a factorization) or ``matvec``/``adjoint_matvec`` (a kernel handle).
    """
    fwd, adj = _operator_pair(inner)

    def matvec(g):
        return fwd(dft_apply(fwd(g), n))

    def adjoint(u):
        return adj(dft_adjoint(adj(u), n))

    N = n * n
    return KernelHandle((N, N), matvec=matvec, adjoint_matvec=adjoint,
                        name="composition", meta={"n": n})


def _monomials(pts: np.ndarray) -> np.ndarray:
    a, b = pts[..., 0], pts[..., 1]
    return np.stack([np.ones_like(a), a, b, a * a, a * b, b * b], axis=-1)


def synthetic_lowrank_kernel(n: int, r: int, seed: int = 0,
                             coeffs: tuple[np.ndarray, np.ndarray] | None = None) -> KernelHandle:
    """Exactly rank-``r`` kernel ``sum_t a_t(x) b_t(xi)`` with quadratic factors.

    Coefficients are seeded complex Gaussians unless ``coeffs`` gives the two
    ``(r, 6)`` coefficient arrays over the monomials ``1, u, v, u^2, uv, v^2``.
    Frequencies are scaled by ``1/n`` before evaluation.
    """
    if coeffs is None:
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((r, 6)) + 1j * rng.standard_normal((r, 6))
        B = rng.standard_normal((r, 6)) + 1j * rng.standard_normal((r, 6))
    else:
        A, B = (np.asarray(c, dtype=complex) for c in coeffs)

    def left(x):
        return _monomials(np.atleast_2d(x)) @ A.T

    def right(xi):
        return _monomials(np.atleast_2d(xi) / n) @ B.T

    k1, k2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    xs = np.column_stack([k1.ravel() / n, k2.ravel() / n])
    xis = np.column_stack([k1.ravel() - n // 2, k2.ravel() - n // 2]).astype(float)
    Lx, Rxi = left(xs), right(xis)

    def matvec(g):
        return Lx @ (Rxi.T @ g)

    def adjoint(u):
        return Rxi.conj() @ (Lx.conj().T @ u)

    N = n * n
    return KernelHandle((N, N), entry=lambda x, xi: left(x) @ np.swapaxes(right(xi), -1, -2),
                        matvec=matvec, adjoint_matvec=adjoint,
                        name="synthetic", meta={"n": n, "rank": r})


def dense_matvec_kernel(kernel: KernelHandle, X, omega) -> KernelHandle:
    """Same kernel with a matvec backed by the materialized matrix (small n only)."""
    K = kernel.dense(X, omega)
    return KernelHandle(kernel.shape, entry=kernel.entry,
                        matvec=lambda g: K @ g, adjoint_matvec=lambda u: K.conj().T @ u,
                        name=kernel.name, meta=dict(kernel.meta))
