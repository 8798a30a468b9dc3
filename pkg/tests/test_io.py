import struct

import numpy as np
import pytest

from butterfly2d import geometry as geo
from butterfly2d import io as bfio
from butterfly2d import kernels as kn
from butterfly2d import variants as vr
from butterfly2d.butterfly import build_butterfly
from butterfly2d.randlr import RandConfig


@pytest.fixture(scope="module")
def bf16():
    n = 16
    X, omega = geo.build_uniform_grids(n)
    tx = geo.build_quadtree(X, geo.uniform_x_box(), 4)
    tw = geo.build_quadtree(omega, geo.uniform_omega_box(n), 4)
    return build_butterfly(kn.dft_kernel(n), tx, tw, RandConfig(10))


@pytest.fixture(scope="module")
def mbf32():
    return vr.build_mbf(kn.RADON, 32, RandConfig(6))


def _g(N):
    rng = np.random.default_rng(0)
    return rng.standard_normal(N) + 1j * rng.standard_normal(N)


def test_header_layout(bf16):
    buf = bfio.dumps(bf16)
    magic, version, L, h, r, nrows, ncols, count = struct.unpack_from("<4sHHHHQQH", buf)
    assert (magic, version, L, h, r, nrows, ncols, count) == (b"BF2D", 1, 4, 2, 10, 256, 256, 7)
    # The first block of U^L: one row, offset (0, 0), little-endian complex128 payload.
    nblocks, = struct.unpack_from("<Q", buf, 30)
    r0, c0, m, c = struct.unpack_from("<QQII", buf, 38)
    assert nblocks == bf16.factors[0].nblocks and (r0, c0) == (0, 0)
    first = next(bf16.factors[0].blocks())[2]
    assert np.frombuffer(buf, "<c16", m * c, 62).tolist() == first.ravel().tolist()
    # Permutations close the file.
    tail = np.frombuffer(buf[-2 * 256 * 8:], "<u8")
    assert np.array_equal(tail[:256], bf16.row_perm) and np.array_equal(tail[256:], bf16.col_perm)


def test_butterfly_round_trip_bytes(bf16, tmp_path):
    path = tmp_path / "bf.bin"
    bfio.save(bf16, path)
    loaded = bfio.load(path)
    assert bfio.dumps(loaded) == path.read_bytes()
    g = _g(256)
    assert np.array_equal(loaded.apply(g), bf16.apply(g))
    assert np.array_equal(loaded.adjoint_apply(g), bf16.adjoint_apply(g))


def test_multiscale_round_trip(mbf32):
    buf = bfio.dumps(mbf32)
    loaded = bfio.loads(buf)
    assert bfio.dumps(loaded) == buf
    g = _g(1024)
    assert np.array_equal(loaded.apply(g), mbf32.apply(g))


def test_polar_round_trip():
    pf = vr.build_pbf(kn.RADON, 16, RandConfig(6))
    buf = bfio.dumps(pf)
    loaded = bfio.loads(buf)
    assert bfio.dumps(loaded) == buf
    g = _g(256)
    assert np.array_equal(loaded.apply(g), pf.apply(g))


def test_corrupted_magic(bf16, mbf32):
    for obj in (bf16, mbf32):
        buf = bytearray(bfio.dumps(obj))
        buf[0:4] = b"XXXX"
        with pytest.raises(bfio.FormatError):
            bfio.loads(bytes(buf))


def test_bad_version(bf16, mbf32):
    buf = bytearray(bfio.dumps(bf16))
    buf[4:6] = struct.pack("<H", 99)
    with pytest.raises(bfio.FormatError):
        bfio.loads(bytes(buf))
    buf = bytearray(bfio.dumps(mbf32))
    buf[4:6] = struct.pack("<H", 99)
    with pytest.raises(bfio.FormatError):
        bfio.loads(bytes(buf))


@pytest.mark.parametrize("cut", [2, 20, 1000, -1])
def test_truncated(bf16, cut):
    buf = bfio.dumps(bf16)
    with pytest.raises(bfio.FormatError):
        bfio.loads(buf[:cut])


def test_trailing_bytes(bf16):
    with pytest.raises(bfio.FormatError):
        bfio.loads(bfio.dumps(bf16) + b"\0")


def test_unsupported_object():
    with pytest.raises(TypeError):
        bfio.dumps(object())
