"""Randomized low-rank factorizations.

Two ways of getting an approximate rank-r SVD of a matrix ``Z``: from random
products ``Z C`` and ``Z^* R`` (when ``Z`` is only available as an operator),
or from sampled rows and columns (when entries can be evaluated). Both end the
same way, by compressing ``Z`` onto orthonormal column/row bases and taking
the SVD of the small middle matrix.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

#: Singular values below this fraction of the largest are treated as zero.
RCOND = 1e-12


class Form(enum.Enum):
    SVD = "svd"
    USV = "usv"
    UV_LEFT = "uv-left"
    UV_RIGHT = "uv-right"


@dataclass
class LowRankApprox:
    """``Z ~ U diag(.) V^*`` in one of four layouts.

    ``s`` always holds the singular values. In ``USV`` form the middle factor
    is ``diag(1/s)`` and both outer factors carry a copy of ``s``; in the two
    ``UV`` forms the singular values are folded into one side.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    form: Form = Form.SVD
    converged: bool = True

    @property
    def rank(self) -> int:
        return len(self.s)

    @property
    def middle(self) -> np.ndarray:
        if self.form is Form.SVD:
            return self.s
        if self.form is Form.USV:
            return 1.0 / self.s
        return np.ones_like(self.s)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.middle) @ self.V.conj().T


@dataclass
class RandConfig:
    rank: int
    oversample: int = 8
    rng_seed: int = 0
    max_sampling_iters: int = 5
    sample_growth: int | None = None

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.oversample < 0:
            raise ValueError("oversample must be >= 0")

    @property
    def growth(self) -> int:
        """Rows (columns) sampled per iteration, representatives included."""
        if self.sample_growth is not None:
            return self.sample_growth
        return 2 * (self.rank + self.oversample)


def block_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one unit of work, keyed by its coordinates."""
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), *key]))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _numerical_rank(s: np.ndarray, r: int) -> int:
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(min(r, np.count_nonzero(s > RCOND * s[0])))


def truncated_svd(Z: np.ndarray, r: int) -> LowRankApprox:
    """Best rank-``min(r, m, n)`` approximation in SVD form."""
    Z = np.asarray(Z)
    m, n = Z.shape
    k = min(r, m, n)
    if k == 0:
        return LowRankApprox(np.zeros((m, 0), Z.dtype), np.zeros(0), np.zeros((n, 0), Z.dtype))
    U, s, Vh = np.linalg.svd(Z, full_matrices=False)
    return LowRankApprox(U[:, :k], s[:k], Vh[:k].conj().T)


def convert_form(a: LowRankApprox, target: Form) -> LowRankApprox:
    if a.form is not Form.SVD:
        raise ValueError("conversion starts from SVD form")
    s = a.s
    if target is Form.SVD:
        return a
    if target is Form.USV:
        if np.any(s <= 0) or (len(s) and s[-1] <= RCOND * s[0]):
            raise ValueError("zero singular value retained; lower the rank")
        return LowRankApprox(a.U * s, s, a.V * s, Form.USV, a.converged)
    if target is Form.UV_LEFT:
        return LowRankApprox(a.U * s, s, a.V, Form.UV_LEFT, a.converged)
    if target is Form.UV_RIGHT:
        return LowRankApprox(a.U, s, a.V * s, Form.UV_RIGHT, a.converged)
    raise ValueError(f"unknown form {target}")


def _sqnorms(A: np.ndarray) -> np.ndarray:
    return (A.real**2 + A.imag**2).sum(axis=-2)


def pivoted_gram_schmidt(A: np.ndarray, k: int):
    """Column-pivoted Gram-Schmidt on a stack of matrices ``A`` of shape ``(B, m, c)``.

    At each step the column with the largest residual norm is chosen (first
    index on ties) and orthogonalised twice against the basis so far. A matrix
    stops contributing once the residual norm of its pivot drops to ``RCOND``
    times its largest column norm. Residual norms are downdated, and recomputed
    from scratch once they have shrunk enough for the downdate to lose accuracy.

    Returns:
        Q: ``(B, m, k')`` with orthonormal leading columns; unused columns are zero.
        piv: ``(B, k')`` pivot column indices, ``-1`` where no column was taken.
        diag: ``(B, k')`` residual norms of the pivots, i.e. ``|R_ss|``.
    """
    A = np.ascontiguousarray(A, dtype=complex)
    B, m, c = A.shape
    k = min(k, m, c)
    QH = np.zeros((B, k, m), dtype=complex)
    Q = np.zeros((B, m, k), dtype=complex)
    piv = np.full((B, k), -1, dtype=np.int64)
    diag = np.zeros((B, k))
    if k == 0 or B == 0:
        return Q, piv, diag
    norms = _sqnorms(A)
    top = norms.max(axis=1)
    ref = np.sqrt(top)
    live = ref > 0
    rows = np.arange(B)
    taken = np.zeros((B, c), dtype=bool)
    for s in range(k):
        j = np.argmax(np.where(taken, -1.0, norms), axis=1)
        q = A[rows, :, j][:, :, None]
        if s:
            Hs, Qs = QH[:, :s], Q[:, :, :s]
            for _ in range(2):
                q = q - Qs @ (Hs @ q)
        q = q[:, :, 0]
        d = np.sqrt(_sqnorms(q[:, :, None])[:, 0])
        live &= d > RCOND * ref
        if not live.any():
            break
        qh = q.conj() * np.where(live, 1.0 / np.where(d > 0, d, 1.0), 0.0)[:, None]
        QH[:, s] = qh
        Q[:, :, s] = qh.conj()
        piv[live, s] = j[live]
        diag[live, s] = d[live]
        taken[rows, j] = True
        coef = (qh[:, None, :] @ A)[:, 0, :]
        norms = np.maximum(norms - (coef.real**2 + coef.imag**2), 0.0)
        stale = live & (norms.max(axis=1) < 1e-8 * top)
        if stale.any():
            As = A[stale]
            norms[stale] = _sqnorms(As - Q[stale, :, :s + 1] @ (QH[stale, :s + 1] @ As))
            top[stale] = norms[stale].max(axis=1)
    return Q, piv, diag


def orth_basis(Y: np.ndarray, max_cols: int | None = None) -> np.ndarray:
    """Orthonormal basis of ``range(Y)`` from a column-pivoted QR.

    Columns whose ``|R_kk|`` falls below ``RCOND`` times the leading one are
    dropped, so the basis never carries noise directions.
    """
    m, c = Y.shape
    Q, piv, _ = pivoted_gram_schmidt(Y[None], c if max_cols is None else max_cols)
    return Q[0, :, : int(np.count_nonzero(piv[0] >= 0))]


def _finish(Qc: np.ndarray, M: np.ndarray, Qr: np.ndarray, r: int, converged=True) -> LowRankApprox:
    m, n = Qc.shape[0], Qr.shape[0]
    if M.size == 0:
        return LowRankApprox(np.zeros((m, 0), complex), np.zeros(0), np.zeros((n, 0), complex),
                             converged=converged)
    Um, s, Vmh = np.linalg.svd(M, full_matrices=False)
    k = _numerical_rank(s, r)
    return LowRankApprox(Qc @ Um[:, :k], s[:k], Qr @ Vmh[:k].conj().T, converged=converged)


def lowrank_from_probes(ZC, ZsR, C, R, r: int) -> LowRankApprox:
    """Rank-``r`` SVD from the sketches ``Z C`` and ``Z^* R``.

    ``Qc`` and ``Qr`` hold the first ``r`` pivoted-QR directions of the
    sketches, so the two pseudo-inverses solve overdetermined ``(r+k) x r``
    systems. ``M = (R^* Qc)^+ (R^* Z C) (Qr^* C)^+`` where ``R^* Z C`` is
    recovered as ``(Z^* R)^* C``, so no further products with ``Z`` are needed.
    """
    Qc = orth_basis(ZC, r)
    Qr = orth_basis(ZsR, r)
    RZC = ZsR.conj().T @ C
    left = np.linalg.pinv(R.conj().T @ Qc, rcond=RCOND)
    right = np.linalg.pinv(Qr.conj().T @ C, rcond=RCOND)
    return _finish(Qc, left @ RZC @ right, Qr, r)


def lowrank_from_probes_batch(ZC, ZsR, C, R, r: int) -> list:
    """:func:`lowrank_from_probes` over stacks of equally shaped blocks.

    Bases are zero-padded to ``r`` columns; the padding drops out of ``M``
    because the pseudo-inverses map it to zero.
    """
    Qc = pivoted_gram_schmidt(ZC, r)[0]
    Qr = pivoted_gram_schmidt(ZsR, r)[0]
    RZC = np.swapaxes(ZsR.conj(), 1, 2) @ C
    left = np.linalg.pinv(np.swapaxes(R.conj(), 1, 2) @ Qc, rcond=RCOND)
    right = np.linalg.pinv(np.swapaxes(Qr.conj(), 1, 2) @ C, rcond=RCOND)
    Um, s, Vmh = np.linalg.svd(left @ RZC @ right, full_matrices=False)
    out = []
    for b in range(len(C)):
        k = _numerical_rank(s[b], r)
        out.append(LowRankApprox(Qc[b] @ Um[b, :, :k], s[b, :k], Qr[b] @ Vmh[b, :k].conj().T))
    return out


def rsvd_matvec(apply, apply_adjoint, m: int, n: int, cfg: RandConfig, rng=None) -> LowRankApprox:
    """Randomized SVD of an ``m x n`` operator known through ``Z @ B`` and ``Z^* @ B``."""
    rng = rng if rng is not None else block_rng(cfg.rng_seed)
    p = cfg.rank + cfg.oversample
    C = complex_gaussian(rng, (n, p))
    R = complex_gaussian(rng, (m, p))
    ZC = np.asarray(apply(C)).reshape(m, p)
    ZsR = np.asarray(apply_adjoint(R)).reshape(n, p)
    return lowrank_from_probes(ZC, ZsR, C, R, cfg.rank)


def _pivots(A: np.ndarray, k: int) -> list:
    """Sorted first ``k`` column pivots of each matrix in the stack ``A``.

    Pivots past the numerical rank are noise and are not returned.
    """
    _, piv, _ = pivoted_gram_schmidt(A, k)
    return [np.sort(p[p >= 0]) for p in piv]


def _draw(rng, total: int, count: int, keep: np.ndarray) -> np.ndarray:
    """``keep`` plus up to ``count`` further random distinct indices, sorted."""
    if count <= 0 or len(keep) >= total:
        return np.asarray(keep, dtype=np.int64)
    if len(keep) + count >= total:
        return np.arange(total)
    mask = np.ones(total, dtype=bool)
    mask[keep] = False
    pool = np.flatnonzero(mask)
    extra = rng.choice(pool, size=count, replace=False)
    mask[:] = False
    mask[keep] = True
    mask[extra] = True
    return np.flatnonzero(mask)


def _locate(sub: np.ndarray, sup: np.ndarray):
    """Positions of ``sub`` inside the sorted array ``sup``, or None if not contained."""
    pos = np.searchsorted(sup, sub)
    if np.any(pos >= len(sup)) or not np.array_equal(sup[np.minimum(pos, len(sup) - 1)], sub):
        return None
    return pos


def _fill(rng, total: int, size: int, keep: np.ndarray) -> np.ndarray:
    """Sorted ``keep`` topped up with random indices to ``min(size, total)`` entries."""
    return _draw(rng, total, min(size, total) - len(keep), keep)


def rsvd_sampling_batch(entry, m: int, n: int, cfg: RandConfig, rngs: list) -> list:
    """:func:`rsvd_sampling` for a stack of ``B = len(rngs)`` equally shaped blocks.

    ``entry(sel, rows, cols)`` returns the ``(len(sel), a, c)`` stack of
    submatrices of blocks ``sel`` at the per-block index arrays ``rows``
    (``len(sel) x a``) and ``cols`` (``len(sel) x c``). Block ``b`` draws all
    its random indices from ``rngs[b]``, so results do not depend on batching.
    """
    B = len(rngs)
    p = cfg.rank + cfg.oversample
    # Sample sizes are fixed so that the whole stack shares one shape: each
    # sample holds the current representatives (at most r + k of them) topped
    # up with fresh random indices to ``growth`` in total.
    size = max(cfg.growth, p)
    n_rows, n_cols = min(m, size), min(n, size)
    all_rows, all_cols = np.arange(m), np.arange(n)
    rep_rows = [np.zeros(0, np.int64)] * B
    rep_cols = [np.zeros(0, np.int64)] * B
    rows_last, cols_last = [None] * B, [None] * B
    rstrip, cstrip = [None] * B, [None] * B
    converged = np.zeros(B, dtype=bool)
    active = np.arange(B)
    for _ in range(max(cfg.max_sampling_iters, 1)):
        rows = np.stack([_fill(rngs[b], m, n_rows, rep_rows[b]) for b in active])
        R = entry(active, rows, np.broadcast_to(all_cols, (len(active), n)))
        new_cols = _pivots(R, p)
        cols = np.stack([_fill(rngs[b], n, n_cols, c) for b, c in zip(active, new_cols)])
        C = entry(active, np.broadcast_to(all_rows, (len(active), m)), cols)
        new_rows = _pivots(np.swapaxes(C, 1, 2), p)
        still = []
        for a, b in enumerate(active):
            stable = (np.array_equal(new_cols[a], rep_cols[b])
                      and np.array_equal(new_rows[a], rep_rows[b]))
            rep_cols[b], rep_rows[b] = new_cols[a], new_rows[a]
            rows_last[b], cols_last[b], rstrip[b], cstrip[b] = rows[a], cols[a], R[a], C[a]
            if stable:
                converged[b] = True
            else:
                still.append(b)
        active = np.asarray(still, dtype=np.int64)
        if not len(active):
            break

    # Representative columns always sit inside the last column sample; the
    # representative rows do too once the sets have stabilised.
    Zc = np.zeros((B, m, p), dtype=complex)
    Zr = np.zeros((B, n, p), dtype=complex)
    for b in range(B):
        kc, kr = len(rep_cols[b]), len(rep_rows[b])
        Zc[b, :, :kc] = cstrip[b][:, _locate(rep_cols[b], cols_last[b])]
        at = _locate(rep_rows[b], rows_last[b])
        if at is not None:
            Zr[b, :, :kr] = rstrip[b][at].conj().T
        elif kr:
            Zr[b, :, :kr] = entry(np.array([b]), rep_rows[b][None], all_cols[None])[0].conj().T
    Qc = pivoted_gram_schmidt(Zc, p)[0]
    Qr = pivoted_gram_schmidt(Zr, p)[0]
    # |I_row| = |reps| + r + k varies between blocks; pad every block to the
    # largest size by drawing more random rows.
    size_r = min(m, max(len(x) for x in rep_rows) + p)
    size_c = min(n, max(len(x) for x in rep_cols) + p)
    I_row = np.stack([_fill(rngs[b], m, size_r, rep_rows[b]) for b in range(B)])
    I_col = np.stack([_fill(rngs[b], n, size_c, rep_cols[b]) for b in range(B)])
    Z = entry(np.arange(B), I_row, I_col)
    idx = np.arange(B)[:, None]
    left = np.linalg.pinv(Qc[idx, I_row], rcond=RCOND)
    right = np.linalg.pinv(np.swapaxes(Qr[idx, I_col].conj(), 1, 2), rcond=RCOND)
    M = left @ Z @ right
    Um, s, Vmh = np.linalg.svd(M, full_matrices=False)
    out = []
    for b in range(B):
        k = _numerical_rank(s[b], cfg.rank)
        out.append(LowRankApprox(Qc[b] @ Um[b, :, :k], s[b, :k], Qr[b] @ Vmh[b, :k].conj().T,
                                 converged=bool(converged[b])))
    return out


def rsvd_sampling(entry, m: int, n: int, cfg: RandConfig, rng=None) -> LowRankApprox:
    """Randomized SVD from sampled entries.

    ``entry(rows, cols)`` returns the submatrix ``Z[rows][:, cols]`` for sorted
    integer index arrays. Representative columns are taken as the pivots of a
    QR of randomly sampled rows (plus the current representative rows), and
    vice versa, alternating until neither set changes. The result is flagged
    ``converged=False`` if that did not happen within ``max_sampling_iters``.
    """
    rng = rng if rng is not None else block_rng(cfg.rng_seed)

    def batched(sel, rows, cols):
        return np.asarray(entry(rows[0], cols[0]))[None]

    return rsvd_sampling_batch(batched, m, n, cfg, [rng])[0]
