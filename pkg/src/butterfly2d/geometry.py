"""Point sets, Morton-ordered quadtrees, and the two frequency-domain partitions.

Grids follow the usual 2D Fourier setup: ``X`` holds ``(n1/n, n2/n)`` and
``Omega`` holds integer frequencies in ``[-n/2, n/2)^2``, both linearised
row-major (first coordinate outer).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def log2_int(n: int) -> int:
    if not is_power_of_two(n):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


@dataclass(frozen=True)
class PointSet:
    """Points in the plane plus the external index of every point."""

    points: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        if len(pts) != len(ids):
            raise ValueError("points and ids differ in length")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("ids must be unique")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.ids)

    def subset(self, index) -> "PointSet":
        index = np.asarray(index, dtype=np.int64)
        return PointSet(self.points[index], self.ids[index])


def build_uniform_grids(n: int) -> tuple[PointSet, PointSet]:
    """Return the spatial grid ``X`` and the frequency grid ``Omega`` of side ``n``."""
    if not is_power_of_two(n) or n < 2:
        raise ValueError(f"n must be a power of two, got {n}")
    k1, k2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    k1 = k1.ravel()
    k2 = k2.ravel()
    ids = np.arange(n * n)
    X = PointSet(np.column_stack([k1 / n, k2 / n]), ids)
    omega = PointSet(np.column_stack([k1 - n // 2, k2 - n // 2]).astype(float), ids)
    return X, omega


# -- Morton order ---------------------------------------------------------


def morton_index(level, row, col):
    """Z-order index of cell ``(row, col)`` on a ``2^level`` grid.

    The row bit is the more significant one of each pair, so at level 1 the
    cells are numbered 0 (top-left), 1 (top-right), 2, 3. Works elementwise
    on integer arrays.
    """
    row = np.asarray(row, dtype=np.int64)
    col = np.asarray(col, dtype=np.int64)
    side = 1 << level
    if np.any((row < 0) | (row >= side) | (col < 0) | (col >= side)):
        raise ValueError(f"cell out of range for level {level}")
    code = np.zeros(np.broadcast(row, col).shape, dtype=np.int64)
    for b in range(level):
        code |= ((row >> b) & 1) << (2 * b + 1)
        code |= ((col >> b) & 1) << (2 * b)
    return code if code.ndim else int(code)


def morton_decode(level, code):
    code = np.asarray(code, dtype=np.int64)
    if np.any((code < 0) | (code >= 1 << (2 * level))):
        raise ValueError(f"code out of range for level {level}")
    row = np.zeros_like(code)
    col = np.zeros_like(code)
    for b in range(level):
        row |= ((code >> (2 * b + 1)) & 1) << b
        col |= ((code >> (2 * b)) & 1) << b
    if row.ndim:
        return row, col
    return int(row), int(col)


# -- quadtrees ------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned square ``[lo, lo + width)`` in each coordinate."""

    lo: tuple[float, float]
    width: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        lo = np.asarray(self.lo)
        hi = lo + self.width
        return np.all((pts >= lo) & (pts <= hi), axis=1)


@dataclass(frozen=True)
class QuadNode:
    level: int
    morton_index: int
    bbox: Box
    point_ids: np.ndarray

    @property
    def empty(self) -> bool:
        return len(self.point_ids) == 0


@dataclass(frozen=True)
class QuadTree:
    """Complete quadtree of fixed depth over a point set.

    Points are stored once, sorted by leaf Morton code (``perm`` maps a sorted
    position to a position in ``points``). Every node at every level then owns
    a contiguous slice ``offsets[level][i]:offsets[level][i + 1]`` of that
    order, and the children ``4i..4i+3`` tile their parent's slice.
    """

    points: PointSet
    root: Box
    depth: int
    perm: np.ndarray
    offsets: list = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.perm)

    def counts(self, level: int) -> np.ndarray:
        return np.diff(self.offsets[level])

    def span(self, level: int, i: int) -> tuple[int, int]:
        off = self.offsets[level]
        return int(off[i]), int(off[i + 1])

    def node_bbox(self, level: int, i: int) -> Box:
        row, col = morton_decode(level, i)
        w = self.root.width / (1 << level)
        return Box((self.root.lo[0] + row * w, self.root.lo[1] + col * w), w)

    def node(self, level: int, i: int) -> QuadNode:
        a, b = self.span(level, i)
        ids = self.points.ids[self.perm[a:b]]
        return QuadNode(level, i, self.node_bbox(level, i), ids)

    def level_nodes(self, level: int) -> list[QuadNode]:
        return [self.node(level, i) for i in range(4**level)]


def build_quadtree(ps: PointSet, root: Box, depth: int) -> QuadTree:
    """Bin ``ps`` into a complete quadtree of the given depth.

    Quadrants are half-open, except that the root's upper edges are closed so
    points sitting exactly on them land in the last row/column of cells.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    pts = ps.points
    if not np.all(root.contains(pts)):
        raise ValueError("point outside the root box")
    side = 1 << depth
    rel = (pts - np.asarray(root.lo)) / root.width * side
    cells = np.minimum(np.floor(rel).astype(np.int64), side - 1)
    codes = morton_index(depth, cells[:, 0], cells[:, 1]) if len(pts) else np.zeros(0, np.int64)
    perm = np.argsort(codes, kind="stable")
    sorted_codes = np.asarray(codes)[perm]
    offsets = []
    for level in range(depth + 1):
        lc = sorted_codes >> (2 * (depth - level))
        offsets.append(np.searchsorted(lc, np.arange(4**level + 1)).astype(np.int64))
    return QuadTree(ps, root, depth, perm, offsets)


def uniform_x_box() -> Box:
    return Box((0.0, 0.0), 1.0)


def uniform_omega_box(n: int) -> Box:
    return Box((-n / 2, -n / 2), float(n))


# -- polar map --------------------------------------------------------------


def polar_transform(omega: PointSet, n: int) -> tuple[PointSet, np.ndarray]:
    """Map frequencies to ``[0, 1]^2`` via the scaled polar change of variables.

    ``p1 = sqrt(2) |xi| / n`` and ``p2 = angle(xi) / 2pi`` in ``[0, 1)``. The
    origin goes to ``(0, 0)``. Returns the transformed set (same order and ids
    as ``omega``) and the index map from omega positions to P positions, which
    is the identity.
    """
    xi = omega.points
    radius = np.hypot(xi[:, 0], xi[:, 1])
    theta = np.mod(np.arctan2(xi[:, 1], xi[:, 0]), 2 * np.pi)
    p2 = theta / (2 * np.pi)
    p2[p2 >= 1.0] = 0.0
    p2[radius == 0] = 0.0
    # |xi| <= n / sqrt(2); clip the rounding overshoot at the far corner.
    p1 = np.minimum(np.sqrt(2.0) * radius / n, 1.0)
    return PointSet(np.column_stack([p1, p2]), omega.ids), np.arange(len(omega))


def polar_inverse(p: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    scale = np.sqrt(2.0) / 2 * n * p[:, 0]
    ang = 2 * np.pi * p[:, 1]
    return np.column_stack([scale * np.cos(ang), scale * np.sin(ang)])


def polar_box() -> Box:
    return Box((0.0, 0.0), 1.0)


# -- corona decomposition -----------------------------------------------------


@dataclass(frozen=True)
class CoronaPartition:
    coronas: list
    center: np.ndarray
    cutoffs: list

    @property
    def t_max(self) -> int:
        return len(self.coronas) - 1


def corona_count(n: int, center_halfwidth: int) -> int:
    return log2_int(n) - log2_int(center_halfwidth) - 1


def corona_decompose(omega: PointSet, n: int, center_halfwidth: int = 8) -> CoronaPartition:
    """Split ``omega`` into dyadic max-norm annuli plus a central square.

    Corona ``t`` holds ``n / 2^(t+2) < max|xi_k| <= n / 2^(t+1)``; the last
    corona's inner radius equals ``center_halfwidth``. Index sets refer to
    positions in ``omega``.
    """
    if not is_power_of_two(center_halfwidth) or center_halfwidth < 4:
        raise ValueError("center_halfwidth must be a power of two >= 4")
    if not is_power_of_two(n) or n < 4 * center_halfwidth:
        raise ValueError(f"n={n} too small for center_halfwidth={center_halfwidth}")
    norm = np.max(np.abs(omega.points), axis=1)
    coronas, cutoffs = [], []
    taken = np.zeros(len(omega), dtype=bool)
    for t in range(corona_count(n, center_halfwidth)):
        inner, outer = n / 2 ** (t + 2), n / 2 ** (t + 1)
        mask = (norm > inner) & (norm <= outer)
        coronas.append(np.flatnonzero(mask))
        cutoffs.append((inner, outer))
        taken |= mask
    return CoronaPartition(coronas, np.flatnonzero(~taken), cutoffs)


def corona_box(n: int, t: int) -> Box:
    a = n / 2 ** (t + 1)
    return Box((-a, -a), 2 * a)
