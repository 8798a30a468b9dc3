"""Two-dimensional butterfly factorization.

A kernel matrix ``K`` on point sets organised by quadtrees ``T_X`` and
``T_Omega`` of depth ``L`` is approximated as the chain

    U^L G^{L-1} ... G^h  M^h  (H^hv)^* ... (H^{L-1})^* (V^L)^*

with ``h = L // 2`` on the X side and ``hv = L - h`` on the Omega side. Every
factor is block sparse with O(N) entries.

Internally rows and columns are numbered in quadtree leaf order, so every
tree node owns a contiguous range; ``row_perm``/``col_perm`` translate to the
caller's ordering.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import randlr
from .geometry import QuadTree
from .kernels import KernelHandle
from .randlr import RCOND, RandConfig, block_rng, complex_gaussian

log = logging.getLogger(__name__)

# Cap on complex entries materialised at once by batched SVDs and probe blocks.
_CHUNK_ENTRIES = 1 << 22


def _layers(starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Greedy interval colouring: blocks in one layer have disjoint ranges."""
    order = np.argsort(starts, kind="stable")
    layer = np.zeros(len(starts), dtype=np.int64)
    ends: list[int] = []
    for k in order:
        for c, e in enumerate(ends):
            if e <= starts[k]:
                layer[k] = c
                ends[c] = stops[k]
                break
        else:
            layer[k] = len(ends)
            ends.append(stops[k])
    return layer


class _Group:
    """Equally shaped blocks stored as one ``(B, m, c)`` stack."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, data: np.ndarray):
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        # Contiguous storage keeps products bitwise reproducible (e.g. after a reload).
        self.data = np.ascontiguousarray(data)
        self._plan = {}

    def plan(self, side: str):
        """Index arrays for scattering into rows (or columns), split into disjoint layers."""
        if side not in self._plan:
            start = self.rows if side == "rows" else self.cols
            width = self.data.shape[1] if side == "rows" else self.data.shape[2]
            layer = _layers(start, start + width)
            self._plan[side] = [np.flatnonzero(layer == c) for c in range(int(layer.max()) + 1)]
        return self._plan[side]


class BlockSparseFactor:
    """Sparse matrix made of dense, non-overlapping blocks.

    Blocks are kept grouped by shape as contiguous stacks, which is what the
    products use: gather the input segments, one batched matmul per group,
    scatter-add the results. The work of a product is exactly ``nnz`` per
    input column.
    """

    def __init__(self, nrows: int, ncols: int):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self._groups: dict = {}
        self._pending: list = []
        #: Multiply-adds spent in products so far (block entries times columns).
        self.work = 0

    def _check(self, r0, c0, m, k):
        if np.any(r0 < 0) or np.any(c0 < 0) or np.any(r0 + m > self.nrows) or np.any(c0 + k > self.ncols):
            raise ValueError("block does not fit in the factor")

    def add(self, row_offset: int, col_offset: int, block: np.ndarray) -> None:
        block = np.asarray(block, dtype=complex)
        if block.size == 0:
            return
        self._check(row_offset, col_offset, *block.shape)
        self._pending.append((int(row_offset), int(col_offset), block))

    def add_stack(self, row_offsets, col_offsets, stack: np.ndarray) -> None:
        """Add ``len(stack)`` blocks of equal shape at once."""
        stack = np.asarray(stack, dtype=complex)
        if stack.size == 0:
            return
        r0, c0 = np.asarray(row_offsets, np.int64), np.asarray(col_offsets, np.int64)
        self._check(r0, c0, stack.shape[1], stack.shape[2])
        self._flush()
        self._merge(stack.shape[1:], r0, c0, stack)

    def _merge(self, shape, r0, c0, stack):
        g = self._groups.get(shape)
        if g is None:
            self._groups[shape] = _Group(r0, c0, stack)
        else:
            self._groups[shape] = _Group(np.concatenate([g.rows, r0]), np.concatenate([g.cols, c0]),
                                         np.concatenate([g.data, stack]))

    def _flush(self):
        if not self._pending:
            return
        by_shape = defaultdict(list)
        for item in self._pending:
            by_shape[item[2].shape].append(item)
        self._pending = []
        for shape, items in by_shape.items():
            self._merge(shape, np.array([t[0] for t in items]), np.array([t[1] for t in items]),
                        np.stack([t[2] for t in items]))

    @property
    def groups(self) -> list:
        self._flush()
        return list(self._groups.values())

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def nblocks(self) -> int:
        return sum(len(g.rows) for g in self.groups)

    @property
    def nnz(self) -> int:
        return int(sum(g.data.size for g in self.groups))

    def blocks(self):
        """Iterate ``(row_offset, col_offset, block)`` in storage order."""
        for g in self.groups:
            for r0, c0, b in zip(g.rows, g.cols, g.data):
                yield int(r0), int(c0), b

    def _product(self, x: np.ndarray, adjoint: bool) -> np.ndarray:
        n_in, n_out = (self.nrows, self.ncols) if adjoint else (self.ncols, self.nrows)
        if x.shape[0] != n_in:
            raise ValueError(f"expected {n_in} rows, got {x.shape[0]}")
        vec = x.ndim == 1
        X = x.reshape(n_in, -1)
        Y = np.zeros((n_out, X.shape[1]), dtype=complex)
        groups = self.groups
        # Gathered input segments take (sum of block widths) entries per column.
        per_col = sum(len(g.rows) * g.data.shape[1 if adjoint else 2] for g in groups)
        step = max(1, _CHUNK_ENTRIES // max(per_col, 1))
        for lo in range(0, X.shape[1], step):
            Xc, Yc = X[:, lo:lo + step], Y[:, lo:lo + step]
            for g in groups:
                m, c = g.data.shape[1:]
                if adjoint:
                    src, dst, w_in, w_out, side = g.rows, g.cols, m, c, "cols"
                else:
                    src, dst, w_in, w_out, side = g.cols, g.rows, c, m, "rows"
                xs = Xc[src[:, None] + np.arange(w_in)]
                ys = np.swapaxes(g.data, 1, 2).conj() @ xs if adjoint else g.data @ xs
                for sel in g.plan(side):
                    Yc[dst[sel, None] + np.arange(w_out)] += ys[sel]
                self.work += g.data.size * Xc.shape[1]
        return Y[:, 0] if vec else Y

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._product(np.asarray(x), adjoint=False)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """Product with the conjugate transpose."""
        return self._product(np.asarray(y), adjoint=True)

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=complex)
        for r0, c0, b in self.blocks():
            out[r0:r0 + b.shape[0], c0:c0 + b.shape[1]] += b
        return out

    def adjoint(self) -> "BlockSparseFactor":
        out = BlockSparseFactor(self.ncols, self.nrows)
        for g in self.groups:
            out.add_stack(g.cols, g.rows, np.swapaxes(g.data, 1, 2).conj())
        return out

    def overlaps(self) -> bool:
        cover = np.zeros(self.shape, dtype=np.int8)
        for r0, c0, b in self.blocks():
            cover[r0:r0 + b.shape[0], c0:c0 + b.shape[1]] += 1
        return bool(np.any(cover > 1))


@dataclass
class ButterflyFactorization:
    L: int
    h: int
    rank: int
    factors: list
    row_perm: np.ndarray
    col_perm: np.ndarray
    mid_ranks: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.factors[0].nrows, self.factors[-1].ncols

    @property
    def nnz(self) -> int:
        return sum(f.nnz for f in self.factors)

    @property
    def middle_index(self) -> int:
        """Position of ``M^h`` in the factor chain."""
        return self.L - self.h + 1

    def apply(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g)
        if g.shape[0] != self.shape[1]:
            raise ValueError(f"input has length {g.shape[0]}, expected {self.shape[1]}")
        x = g[self.col_perm].astype(complex)
        for f in reversed(self.factors):
            x = f.matvec(x)
        u = np.empty_like(x)
        u[self.row_perm] = x
        return u

    def adjoint_apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape[0] != self.shape[0]:
            raise ValueError(f"input has length {u.shape[0]}, expected {self.shape[0]}")
        x = u[self.row_perm].astype(complex)
        for f in self.factors:
            x = f.rmatvec(x)
        g = np.empty_like(x)
        g[self.col_perm] = x
        return g

    def toarray(self) -> np.ndarray:
        return self.apply(np.eye(self.shape[1], dtype=complex))


# -- middle level ----------------------------------------------------------


@dataclass
class MiddleLevel:
    """Per-block rank-r factors ``K_ij ~ U_ij diag(1/s_ij) V_ji^*`` at level h."""

    h: int
    hv: int
    ranks: np.ndarray
    U: dict
    s: dict
    V: dict
    unconverged: int = 0

    def factors(self, nx: int, nw: int):
        """Assemble the block diagonal ``U^h``, ``V^h`` and the middle ``M^h``."""
        R = self.ranks
        ucols = R.sum(axis=1)
        vcols = R.sum(axis=0)
        ubase = np.concatenate([[0], np.cumsum(ucols)])
        vbase = np.concatenate([[0], np.cumsum(vcols)])
        uoff = np.concatenate([np.zeros((R.shape[0], 1), int), np.cumsum(R, axis=1)], axis=1)
        voff = np.concatenate([np.zeros((1, R.shape[1]), int), np.cumsum(R, axis=0)], axis=0)
        M = BlockSparseFactor(ubase[-1], vbase[-1])
        for (i, j), s in self.s.items():
            M.add(ubase[i] + uoff[i, j], vbase[j] + voff[i, j], np.diag(1.0 / s))
        return ubase, vbase, uoff, voff, M


def _tree_ids(tree: QuadTree) -> np.ndarray:
    return tree.points.ids[tree.perm]


def _shape_groups(ox: np.ndarray, ow: np.ndarray):
    """Non-empty block pairs ``(i, j)`` grouped by block shape, in Morton order."""
    cx, cw = np.diff(ox), np.diff(ow)
    groups = defaultdict(list)
    for i in np.flatnonzero(cx):
        for j in np.flatnonzero(cw):
            groups[int(cx[i]), int(cw[j])].append((int(i), int(j)))
    return groups


def _middle_sampling(kernel: KernelHandle, tx: QuadTree, tw: QuadTree, h: int, hv: int,
                     cfg: RandConfig, key: tuple) -> MiddleLevel:
    Xp = tx.points.points[tx.perm]
    Wp = tw.points.points[tw.perm]
    ox, ow = tx.offsets[h], tw.offsets[hv]
    ranks = np.zeros((4**h, 4**hv), dtype=int)
    U, S, V = {}, {}, {}
    unconverged = 0
    p = cfg.rank + cfg.oversample
    for (m, n), pairs in _shape_groups(ox, ow).items():
        sample = min(m, p + cfg.growth) * n + m * min(n, p + cfg.growth)
        step = max(1, _CHUNK_ENTRIES // (2 * sample))
        for lo in range(0, len(pairs), step):
            part = pairs[lo:lo + step]
            xrow = np.array([ox[i] for i, _ in part])[:, None] + np.arange(m)
            wcol = np.array([ow[j] for _, j in part])[:, None] + np.arange(n)

            def sub(sel, rows, cols, xrow=xrow, wcol=wcol):
                sel = np.asarray(sel)[:, None]
                return kernel.entry(Xp[xrow[sel, rows]], Wp[wcol[sel, cols]])

            rngs = [block_rng(cfg.rng_seed, *key, 1, i, j) for i, j in part]
            for (i, j), lr in zip(part, randlr.rsvd_sampling_batch(sub, m, n, cfg, rngs)):
                unconverged += not lr.converged
                _store(lr, i, j, ranks, U, S, V)
    return MiddleLevel(h, hv, ranks, U, S, V, unconverged)


def _store(lr, i, j, ranks, U, S, V):
    if lr.rank == 0:
        return
    usv = randlr.convert_form(lr, randlr.Form.USV)
    ranks[i, j] = lr.rank
    U[i, j] = usv.U
    S[i, j] = usv.s
    V[i, j] = usv.V


def _apply_chunked(op, probes: list, ids_in: np.ndarray, ids_out: np.ndarray,
                   full_in: int) -> list:
    """Apply ``op`` to zero-padded probe blocks, a few at a time.

    ``probes`` holds ``(start, block)`` pairs in tree order of the input tree.
    Returns each result restricted to ``ids_out`` (output tree order).
    """
    out = []
    batch, width = [], 0
    per_col = max(full_in, len(ids_out))

    def flush():
        if not batch:
            return
        P = np.zeros((full_in, sum(b.shape[1] for _, b in batch)), dtype=complex)
        c = 0
        for start, b in batch:
            P[ids_in[start:start + b.shape[0]], c:c + b.shape[1]] = b
            c += b.shape[1]
        Y = np.asarray(op(P))[ids_out]
        c = 0
        for _, b in batch:
            out.append(Y[:, c:c + b.shape[1]])
            c += b.shape[1]
        batch.clear()

    for start, b in probes:
        if batch and (width + b.shape[1]) * per_col > _CHUNK_ENTRIES:
            flush()
            width = 0
        batch.append((start, b))
        width += b.shape[1]
    flush()
    return out


def _middle_matvec(kernel: KernelHandle, tx: QuadTree, tw: QuadTree, h: int, hv: int,
                   cfg: RandConfig, key: tuple) -> MiddleLevel:
    if kernel.matvec is None:
        raise ValueError(f"{kernel.name} has no matvec; use the sampling construction")
    nfull_x, nfull_w = kernel.shape
    ids_x, ids_w = _tree_ids(tx), _tree_ids(tw)
    ox, ow = tx.offsets[h], tw.offsets[hv]
    p = cfg.rank + cfg.oversample
    cols = [j for j in range(4**hv) if ow[j + 1] > ow[j]]
    rows = [i for i in range(4**h) if ox[i + 1] > ox[i]]
    C = {j: complex_gaussian(block_rng(cfg.rng_seed, *key, 2, j), (ow[j + 1] - ow[j], p)) for j in cols}
    R = {i: complex_gaussian(block_rng(cfg.rng_seed, *key, 3, i), (ox[i + 1] - ox[i], p)) for i in rows}
    KC = dict(zip(cols, _apply_chunked(kernel.matvec, [(ow[j], C[j]) for j in cols], ids_w, ids_x, nfull_w)))
    KR = dict(zip(rows, _apply_chunked(kernel.adjoint_matvec, [(ox[i], R[i]) for i in rows], ids_x, ids_w,
                                       nfull_x)))
    ranks = np.zeros((4**h, 4**hv), dtype=int)
    U, S, V = {}, {}, {}
    for (m, n), pairs in _shape_groups(ox, ow).items():
        step = max(1, _CHUNK_ENTRIES // (2 * (m + n) * p))
        for lo in range(0, len(pairs), step):
            part = pairs[lo:lo + step]
            ZC = np.stack([KC[j][ox[i]:ox[i + 1]] for i, j in part])
            ZsR = np.stack([KR[i][ow[j]:ow[j + 1]] for i, j in part])
            Cs = np.stack([C[j] for _, j in part])
            Rs = np.stack([R[i] for i, _ in part])
            for (i, j), lr in zip(part, randlr.lowrank_from_probes_batch(ZC, ZsR, Cs, Rs, cfg.rank)):
                _store(lr, i, j, ranks, U, S, V)
    return MiddleLevel(h, hv, ranks, U, S, V)


def middle_level_factorize(kernel: KernelHandle, tx: QuadTree, tw: QuadTree, cfg: RandConfig,
                           method: str | None = None, key: tuple = ()) -> MiddleLevel:
    """Rank-r factorization of every block pairing level ``h`` of ``tx`` with level ``L-h`` of ``tw``.

    ``method`` is ``"sampling"`` (entry oracle) or ``"matvec"`` (black-box
    products with zero-padded Gaussian probes); by default sampling is used
    whenever the kernel has an entry oracle.
    """
    if tx.depth != tw.depth:
        raise ValueError("trees must have equal depth")
    L = tx.depth
    h, hv = L // 2, L - L // 2
    method = method or ("sampling" if kernel.entry is not None else "matvec")
    if method == "sampling":
        if kernel.entry is None:
            raise ValueError(f"{kernel.name} has no entry oracle; use the matvec construction")
        return _middle_sampling(kernel, tx, tw, h, hv, cfg, key)
    if method == "matvec":
        return _middle_matvec(kernel, tx, tw, h, hv, cfg, key)
    raise ValueError(f"unknown method {method!r}")


# -- recursive levels ------------------------------------------------------


def truncate_many(mats: list, r: int) -> list:
    """Rank-r truncated SVDs in left-scaled form ``W ~ (U0 S) V0^*``.

    Matrices of equal shape go through one batched SVD. Ranks are clamped to
    ``min(r, rows, cols)`` and to the singular values above the cutoff.
    """
    out = [None] * len(mats)
    groups = defaultdict(list)
    for k, a in enumerate(mats):
        groups[a.shape].append(k)
    for (m, c), ks in groups.items():
        step = max(1, _CHUNK_ENTRIES // max(m * c, 1))
        for lo in range(0, len(ks), step):
            part = ks[lo:lo + step]
            u, s, vh = np.linalg.svd(np.stack([mats[k] for k in part]), full_matrices=False)
            top = s[:, :1]
            keep = np.minimum(r, np.count_nonzero(s > RCOND * top, axis=1))
            keep[top[:, 0] == 0] = 0
            for idx, k in enumerate(part):
                q = keep[idx]
                out[k] = (u[idx, :, :q] * s[idx, :q], vh[idx, :q])
    return out


@dataclass
class _Level:
    """Column-basis blocks of one side at one level: node -> (matrix, column offsets)."""

    mats: list
    offs: list

    @property
    def widths(self) -> np.ndarray:
        return np.array([m.shape[1] for m in self.mats])

    @property
    def base(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.widths)])


def recursive_factorize(level: _Level, tree: QuadTree, ell: int, L: int, r: int):
    """One split/merge/truncate/assemble step, level ``ell`` to ``ell + 1``.

    Returns the next level and the transfer factor ``G`` with
    ``U^ell ~ U^{ell+1} G``.
    """
    J = 4 ** (L - ell - 1)
    base = level.base
    off_p, off_c = tree.offsets[ell], tree.offsets[ell + 1]
    mats, keys = [], []
    for i, (Ui, co) in enumerate(zip(level.mats, level.offs)):
        if Ui.size == 0:
            continue
        p0 = off_p[i]
        for t in range(4):
            c = 4 * i + t
            q0, q1 = off_c[c] - p0, off_c[c + 1] - p0
            if q1 == q0:
                continue
            block = Ui[q0:q1]
            for j in range(J):
                c0, c1 = co[4 * j], co[4 * j + 4]
                if c1 > c0:
                    mats.append(block[:, c0:c1])
                    keys.append((c, j, base[i] + c0))
    results = truncate_many(mats, r)
    nxt = 4 * len(level.mats)
    ranks = np.zeros((nxt, J), dtype=int)
    parts = defaultdict(dict)
    for (c, j, _), (Ub, _) in zip(keys, results):
        ranks[c, j] = Ub.shape[1]
        parts[c][j] = Ub
    mats_new, offs_new = [], []
    for c in range(nxt):
        rows = off_c[c + 1] - off_c[c]
        pieces = [parts[c][j] for j in sorted(parts[c]) if parts[c][j].shape[1]]
        mats_new.append(np.hstack(pieces) if pieces else np.zeros((rows, 0), complex))
        offs_new.append(np.concatenate([[0], np.cumsum(ranks[c])]))
    new = _Level(mats_new, offs_new)
    new_base = new.base
    G = BlockSparseFactor(new_base[-1], base[-1])
    for (c, j, gcol), (_, Gb) in zip(keys, results):
        G.add(new_base[c] + offs_new[c][j], gcol, Gb)
    return new, G


def _leaf_factor(level: _Level, tree: QuadTree) -> BlockSparseFactor:
    base = level.base
    off = tree.offsets[tree.depth]
    F = BlockSparseFactor(tree.size, base[-1])
    for c, m in enumerate(level.mats):
        F.add(off[c], base[c], m)
    return F


def _side(mid: MiddleLevel, which: str) -> _Level:
    R = mid.ranks
    if which == "U":
        mats_by, nodes, other, src = mid.U, R.shape[0], R.shape[1], lambda a, b: (a, b)
        rk = R
    else:
        mats_by, nodes, other, src = mid.V, R.shape[1], R.shape[0], lambda a, b: (b, a)
        rk = R.T
    mats, offs = [], []
    for a in range(nodes):
        # Pop as we go so the per-block copies are released node by node.
        pieces = [mats_by.pop(src(a, b)) for b in range(other) if src(a, b) in mats_by]
        offs.append(np.concatenate([[0], np.cumsum(rk[a])]))
        mats.append(np.hstack(pieces) if pieces else None)
    return _Level(mats, offs)


def _fill_empty(level: _Level, tree: QuadTree, ell: int) -> _Level:
    counts = tree.counts(ell)
    mats = [m if m is not None else np.zeros((counts[a], 0), complex) for a, m in enumerate(level.mats)]
    return _Level(mats, level.offs)


def _check_bounds(bf: ButterflyFactorization, nx: int, nw: int) -> None:
    r, L = bf.rank, bf.L
    f = bf.factors
    if f[0].nnz > r * nx or f[-1].nnz > r * nw:
        raise AssertionError("leaf factor exceeds r N entries")
    blocks_per_level = 4**L
    for k, fac in enumerate(f[1:-1], start=1):
        bound = (r * r if k == bf.middle_index else 4 * r * r) * blocks_per_level
        if fac.nnz > bound:
            raise AssertionError(f"factor {k} holds {fac.nnz} > {bound} entries")
    for a, b in zip(f[:-1], f[1:]):
        if a.ncols != b.nrows:
            raise AssertionError("factor dimensions do not chain")


def build_butterfly(kernel: KernelHandle, tx: QuadTree, tw: QuadTree, cfg: RandConfig,
                    method: str | None = None, key: tuple = ()) -> ButterflyFactorization:
    """Factor the kernel restricted to the points of ``tx`` x ``tw``.

    ``key`` is mixed into every random stream so that independent calls with
    the same seed (e.g. the pieces of a multiscale factorization) differ.
    """
    L = tx.depth
    t0 = time.perf_counter()
    mid = middle_level_factorize(kernel, tx, tw, cfg, method, key)
    t1 = time.perf_counter()
    if mid.unconverged:
        log.info("%d of %d sampled blocks hit max_sampling_iters", mid.unconverged, mid.ranks.size)
    ubase, vbase, uoff, voff, M = mid.factors(tx.size, tw.size)

    chain_u = []
    lev = _fill_empty(_side(mid, "U"), tx, mid.h)
    for ell in range(mid.h, L):
        lev, G = recursive_factorize(lev, tx, ell, L, cfg.rank)
        chain_u.append(G)
    UL = _leaf_factor(lev, tx)

    chain_v = []
    lev = _fill_empty(_side(mid, "V"), tw, mid.hv)
    for ell in range(mid.hv, L):
        lev, H = recursive_factorize(lev, tw, ell, L, cfg.rank)
        chain_v.append(H.adjoint())
    VL = _leaf_factor(lev, tw).adjoint()
    t2 = time.perf_counter()

    factors = [UL, *reversed(chain_u), M, *chain_v, VL]
    bf = ButterflyFactorization(L, mid.h, cfg.rank, factors, tx.perm.copy(), tw.perm.copy(),
                                mid.ranks)
    bf.stats = {"t_middle": t1 - t0, "t_recursive": t2 - t1,
                "nnz": [f.nnz for f in factors], "unconverged": mid.unconverged}
    _check_bounds(bf, tx.size, tw.size)
    return bf


def check_middle_pattern(bf: ButterflyFactorization) -> bool:
    """Check that ``M^h`` holds exactly one block per (i, j), at the transposed slot."""
    R = bf.mid_ranks
    M = bf.factors[bf.middle_index]
    ucols, vcols = R.sum(axis=1), R.sum(axis=0)
    ubase = np.concatenate([[0], np.cumsum(ucols)])
    vbase = np.concatenate([[0], np.cumsum(vcols)])
    expected = {}
    for i in range(R.shape[0]):
        for j in range(R.shape[1]):
            if R[i, j]:
                expected[(ubase[i] + R[i, :j].sum(), vbase[j] + R[:i, j].sum())] = R[i, j]
    got = {(r0, c0): b.shape for r0, c0, b in M.blocks()}
    if len(got) != len(expected):
        return False
    for pos, k in expected.items():
        if got.get(pos) != (k, k):
            return False
    return M.shape == (ucols.sum(), vcols.sum())
