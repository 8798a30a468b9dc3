import numpy as np
import pytest

from butterfly2d import randlr
from butterfly2d.randlr import Form, RandConfig


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _rel(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(B)


def _low_rank(rng, m, n, r):
    return _crandn(rng, m, r) @ _crandn(rng, r, n)


def test_truncated_svd_identity():
    a = randlr.truncated_svd(np.eye(3), 2)
    assert np.allclose(a.s, [1, 1])
    assert np.isclose(np.linalg.norm(np.eye(3) - a.reconstruct(), 2), 1.0)


def test_truncated_svd_rank_one_exact():
    rng = np.random.default_rng(1)
    Z = np.outer(_crandn(rng, 5), _crandn(rng, 7).conj())
    a = randlr.truncated_svd(Z, 1)
    assert np.linalg.norm(Z - a.reconstruct()) <= 1e-12 * np.linalg.norm(Z)


def test_truncated_svd_matches_full_svd():
    rng = np.random.default_rng(2)
    Z = _crandn(rng, 4, 4)
    a = randlr.truncated_svd(Z, 2)
    s = np.linalg.svd(Z, compute_uv=False)
    assert np.allclose(a.s, s[:2], atol=1e-10)
    assert np.isclose(np.linalg.norm(Z - a.reconstruct(), 2), s[2])


def test_truncated_svd_clamps_rank():
    a = randlr.truncated_svd(np.ones((2, 5)), 9)
    assert a.rank == 2


def test_convert_form_rank_one_usv():
    Z = 2.0 * np.outer([1.0, 0.0], [0.0, 1.0])
    usv = randlr.convert_form(randlr.truncated_svd(Z, 1), Form.USV)
    assert np.isclose(np.linalg.norm(usv.U[:, 0]), 2.0)
    assert np.allclose(usv.middle, [0.5])


@pytest.mark.parametrize("form", list(Form))
def test_convert_form_preserves_reconstruction(form):
    rng = np.random.default_rng(3)
    a = randlr.truncated_svd(_crandn(rng, 6, 5), 3)
    b = randlr.convert_form(a, form)
    assert np.linalg.norm(b.reconstruct() - a.reconstruct()) <= 1e-12 * np.linalg.norm(a.reconstruct())


def test_convert_form_rejects_zero_singular_value():
    a = randlr.LowRankApprox(np.eye(2), np.array([1.0, 0.0]), np.eye(2))
    with pytest.raises(ValueError):
        randlr.convert_form(a, Form.USV)


def test_config_validation():
    with pytest.raises(ValueError):
        RandConfig(0)
    with pytest.raises(ValueError):
        RandConfig(2, oversample=-1)
    assert RandConfig(4, 8).growth == 24


def test_pivoted_gram_schmidt_orthonormal_and_tie_break():
    rng = np.random.default_rng(4)
    A = _crandn(rng, 3, 12, 5)
    Q, piv, diag = randlr.pivoted_gram_schmidt(A, 5)
    for b in range(3):
        assert np.allclose(Q[b].conj().T @ Q[b], np.eye(5), atol=1e-12)
        assert np.all(np.diff(diag[b]) <= 1e-12)
    # Equal column norms: the first index wins.
    _, piv, _ = randlr.pivoted_gram_schmidt(np.eye(3)[None], 1)
    assert piv[0, 0] == 0


def test_pivoted_gram_schmidt_stops_at_rank():
    rng = np.random.default_rng(5)
    A = _low_rank(rng, 10, 8, 2)[None]
    _, piv, _ = randlr.pivoted_gram_schmidt(A, 6)
    assert np.count_nonzero(piv[0] >= 0) == 2


def _matvec_approx(Z, cfg, seed):
    return randlr.rsvd_matvec(lambda B: Z @ B, lambda B: Z.conj().T @ B, *Z.shape, cfg,
                              randlr.block_rng(seed))


def _sampling_approx(Z, cfg, seed):
    return randlr.rsvd_sampling(lambda i, j: Z[np.ix_(i, j)], *Z.shape, cfg, randlr.block_rng(seed))


@pytest.mark.parametrize("approx", [_matvec_approx, _sampling_approx])
def test_exact_rank_recovery_20_seeds(approx):
    failures = 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        Z = _low_rank(rng, 40, 30, 4)
        a = approx(Z, RandConfig(4, 8, seed), seed)
        failures += _rel(a.reconstruct(), Z) > 1e-8
    assert failures <= 1


@pytest.mark.parametrize("approx", [_matvec_approx, _sampling_approx])
def test_orthonormal_bases(approx):
    rng = np.random.default_rng(6)
    Z = _crandn(rng, 30, 25)
    a = approx(Z, RandConfig(6), 0)
    assert np.allclose(a.U.conj().T @ a.U, np.eye(a.rank), atol=1e-12)
    assert np.allclose(a.V.conj().T @ a.V, np.eye(a.rank), atol=1e-12)
    assert np.all(np.diff(a.s) <= 0)


def test_matvec_zero_matrix():
    a = _matvec_approx(np.zeros((8, 6), complex), RandConfig(3), 0)
    assert np.all(a.s == 0) and np.all(a.reconstruct() == 0)


def test_matvec_chosen_spectrum():
    # Z = U diag(s) V^* with a gap after four singular values.
    rng = np.random.default_rng(7)
    U, _ = np.linalg.qr(_crandn(rng, 64, 64))
    V, _ = np.linalg.qr(_crandn(rng, 64, 64))
    s = np.r_[1, 0.5, 0.25, 0.125, np.full(60, 1e-12)]
    Z = (U * s) @ V.conj().T
    a = _matvec_approx(Z, RandConfig(4, 8), 0)
    assert np.allclose(a.s, s[:4], atol=1e-6)


def test_sampling_one_by_one():
    a = _sampling_approx(np.array([[3 - 4j]]), RandConfig(1), 0)
    assert np.isclose(a.reconstruct()[0, 0], 3 - 4j)


def test_sampling_dft_subblock():
    j = np.arange(32)
    Z = np.exp(2j * np.pi * np.outer(j, j) / 1024)
    a = _sampling_approx(Z, RandConfig(8, 8), 0)
    assert _rel(a.reconstruct(), Z) <= 1e-6


def test_sampling_flags_unconverged():
    rng = np.random.default_rng(8)
    Z = _crandn(rng, 60, 60)
    a = _sampling_approx(Z, RandConfig(4, 2, max_sampling_iters=1), 0)
    assert not a.converged
    b = _sampling_approx(_low_rank(rng, 60, 60, 2), RandConfig(4, 2), 0)
    assert b.converged


@pytest.mark.parametrize("approx", [_matvec_approx, _sampling_approx])
def test_deterministic(approx):
    rng = np.random.default_rng(9)
    Z = _crandn(rng, 20, 30)
    a, b = approx(Z, RandConfig(5), 3), approx(Z, RandConfig(5), 3)
    assert a.U.shape == b.U.shape
    assert abs(_rel(a.reconstruct(), Z) - _rel(b.reconstruct(), Z)) <= 1e-14


def test_sampling_batch_matches_single():
    rng = np.random.default_rng(10)
    Zs = [_crandn(rng, 20, 16) for _ in range(3)]
    cfg = RandConfig(4)

    def entry(sel, rows, cols):
        return np.stack([Zs[s][np.ix_(r, c)] for s, r, c in zip(sel, rows, cols)])

    batch = randlr.rsvd_sampling_batch(entry, 20, 16, cfg, [randlr.block_rng(0, b) for b in range(3)])
    for b, Z in enumerate(Zs):
        single = randlr.rsvd_sampling(lambda i, j, Z=Z: Z[np.ix_(i, j)], 20, 16, cfg, randlr.block_rng(0, b))
        assert np.allclose(single.reconstruct(), batch[b].reconstruct(), atol=1e-12)
