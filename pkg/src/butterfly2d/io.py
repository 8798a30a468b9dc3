"""Binary files for butterfly, polar and multiscale factorizations.

All integers and complex values are little endian. A butterfly file is

    "BF2D" version:u16 L:u16 h:u16 r:u16 nrows:u64 ncols:u64 factor_count:u16
    per factor:  block_count:u64
                 per block: row_offset:u64 col_offset:u64 rows:u32 cols:u32
                            rows*cols complex128, row-major
    row_perm: nrows x u64, col_perm: ncols x u64

Factor shapes are not stored: every row and column of a factor is covered by
some block, so they are recovered from the block extents and then checked to
chain. The polar ("BFPL") and multiscale ("BFMS") containers wrap butterfly
records together with their index sets; see :func:`save` for the layouts.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .butterfly import BlockSparseFactor, ButterflyFactorization
from .variants import CoronaPiece, MultiscaleFactorization, PolarFactorization

VERSION = 1
MAGIC_BF = b"BF2D"
MAGIC_POLAR = b"BFPL"
MAGIC_MULTI = b"BFMS"

_HEAD = struct.Struct("<4sHHHHQQH")
_BLOCK = struct.Struct("<QQII")


class FormatError(ValueError):
    """Raised for files that are not valid factorization files."""


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, size: int) -> memoryview:
        if self.pos + size > len(self.buf):
            raise FormatError("truncated file")
        out = self.buf[self.pos:self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))

    def scalar(self, code: str) -> int:
        return struct.unpack("<" + code, self.take(struct.calcsize(code)))[0]

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()


def _u64(a) -> bytes:
    return np.asarray(a, dtype="<u8").tobytes()


def _complex(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<c16").tobytes()


# -- butterfly --------------------------------------------------------------


def _write_bf(out, bf: ButterflyFactorization) -> None:
    nrows, ncols = bf.shape
    out.write(_HEAD.pack(MAGIC_BF, VERSION, bf.L, bf.h, bf.rank, nrows, ncols, len(bf.factors)))
    for f in bf.factors:
        out.write(struct.pack("<Q", f.nblocks))
        for r0, c0, b in f.blocks():
            out.write(_BLOCK.pack(r0, c0, *b.shape))
            out.write(_complex(b))
    out.write(_u64(bf.row_perm))
    out.write(_u64(bf.col_perm))


def _read_bf(rd: _Reader) -> ButterflyFactorization:
    magic, version, L, h, r, nrows, ncols, count = rd.unpack(_HEAD)
    if magic != MAGIC_BF:
        raise FormatError(f"bad magic {bytes(magic)!r}, expected {MAGIC_BF!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    raw = []
    for _ in range(count):
        blocks = []
        for _ in range(rd.scalar("Q")):
            r0, c0, m, c = rd.unpack(_BLOCK)
            blocks.append((r0, c0, rd.array("<c16", m * c).reshape(m, c)))
        raw.append(blocks)
    factors = []
    for blocks in raw:
        shape = (max((r0 + b.shape[0] for r0, _, b in blocks), default=0),
                 max((c0 + b.shape[1] for _, c0, b in blocks), default=0))
        f = BlockSparseFactor(*shape)
        for r0, c0, b in blocks:
            f.add(r0, c0, b)
        factors.append(f)
    if factors:
        if factors[0].nrows != nrows or factors[-1].ncols != ncols:
            raise FormatError("factor chain does not match the header shape")
        for a, b in zip(factors[:-1], factors[1:]):
            if a.ncols != b.nrows:
                raise FormatError("factor dimensions do not chain")
    row_perm = rd.array("<u8", nrows).astype(np.int64)
    col_perm = rd.array("<u8", ncols).astype(np.int64)
    return ButterflyFactorization(L, h, r, factors, row_perm, col_perm)


# -- containers ---------------------------------------------------------------


def _write_polar(out, pf: PolarFactorization) -> None:
    out.write(struct.pack("<4sHQ", MAGIC_POLAR, VERSION, pf.n))
    out.write(_u64(pf.index_map))
    _write_bf(out, pf.bf)


def _read_polar(rd: _Reader) -> PolarFactorization:
    n = rd.scalar("Q")
    index_map = rd.array("<u8", n * n).astype(np.int64)
    return PolarFactorization(_read_bf(rd), index_map, n)


def _write_multi(out, mf: MultiscaleFactorization) -> None:
    out.write(struct.pack("<4sHQHH", MAGIC_MULTI, VERSION, mf.n, mf.center_halfwidth, len(mf.pieces)))
    rows, cols = mf.center.shape
    out.write(struct.pack("<QQ", rows, cols))
    out.write(_u64(mf.center_restriction))
    out.write(_complex(mf.center))
    for piece in mf.pieces:
        out.write(struct.pack("<HQ", piece.t, len(piece.restriction)))
        out.write(_u64(piece.restriction))
        _write_bf(out, piece.bf)


def _read_multi(rd: _Reader) -> MultiscaleFactorization:
    n, halfwidth, count = rd.unpack(struct.Struct("<QHH"))
    rows, cols = rd.unpack(struct.Struct("<QQ"))
    center_idx = rd.array("<u8", cols).astype(np.int64)
    center = rd.array("<c16", rows * cols).reshape(rows, cols)
    pieces = []
    for _ in range(count):
        t, size = rd.unpack(struct.Struct("<HQ"))
        restriction = rd.array("<u8", size).astype(np.int64)
        pieces.append(CoronaPiece(t, restriction, _read_bf(rd)))
    return MultiscaleFactorization(n, pieces, center_idx, center, halfwidth)


def dumps(obj) -> bytes:
    """Serialize a butterfly, polar or multiscale factorization to bytes."""
    out = io.BytesIO()
    if isinstance(obj, ButterflyFactorization):
        _write_bf(out, obj)
    elif isinstance(obj, PolarFactorization):
        _write_polar(out, obj)
    elif isinstance(obj, MultiscaleFactorization):
        _write_multi(out, obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return out.getvalue()


def loads(buf: bytes):
    """Inverse of :func:`dumps`; the record type is chosen by the magic bytes."""
    rd = _Reader(buf)
    magic = bytes(rd.buf[:4])
    if magic == MAGIC_BF:
        obj = _read_bf(rd)
    else:
        rd.take(4)
        version = rd.scalar("H")
        if magic not in (MAGIC_POLAR, MAGIC_MULTI):
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        obj = _read_polar(rd) if magic == MAGIC_POLAR else _read_multi(rd)
    if rd.pos != len(rd.buf):
        raise FormatError(f"{len(rd.buf) - rd.pos} trailing bytes")
    return obj


def save(obj, path) -> None:
    Path(path).write_bytes(dumps(obj))


def load(path):
    return loads(Path(path).read_bytes())
