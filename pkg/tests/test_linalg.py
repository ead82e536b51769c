import math

import numpy as np
import pytest

from qdiv import linalg
from qdiv.errors import DomainError, ShapeError
from qdiv.states import random_hermitian


def test_eig_hermitian_deterministic():
    m = random_hermitian(4, seed=0)
    w1, u1 = linalg.eig_hermitian(m)
    w2, u2 = linalg.eig_hermitian(m.copy())
    assert np.array_equal(w1, w2)
    assert np.array_equal(u1, u2)


def test_eig_reconstruction():
    m = random_hermitian(5, seed=1)
    w, u = linalg.eig_hermitian(m)
    assert np.allclose((u * w) @ u.conj().T, m, atol=1e-12)
    assert np.allclose(u.conj().T @ u, np.eye(5), atol=1e-12)


def test_matfun_log_exp_roundtrip():
    m = random_hermitian(3, seed=2)
    assert np.allclose(linalg.matlog(linalg.matexp(m)), m, atol=1e-10)


def test_log_domain_error():
    with pytest.raises(DomainError):
        linalg.matlog(np.diag([1.0, -0.5]).astype(complex))


def test_matpow_negative_requires_pd():
    with pytest.raises(DomainError):
        linalg.matpow(np.diag([1.0, 0.0]).astype(complex), -1.0)


def test_frechet_matches_finite_difference():
    rng = np.random.default_rng(3)
    for f in (linalg.EXP, linalg.LOG, linalg.power(0.7), linalg.power(2.0)):
        a = random_hermitian(3, seed=rng)
        if f is not linalg.EXP:
            a = linalg.symmetrize(a @ a.conj().T) + 0.5 * np.eye(3)
        e = random_hermitian(3, seed=rng)
        t = 1e-6
        fd = (linalg.matfun(a + t * e, f) - linalg.matfun(a - t * e, f)) / (2 * t)
        an = linalg.frechet_matfun(a, f, e)
        assert np.max(np.abs(fd - an)) < 1e-6 * max(1.0, np.max(np.abs(an)))


def test_frechet_self_adjoint():
    rng = np.random.default_rng(4)
    a = random_hermitian(3, seed=rng)
    x = random_hermitian(3, seed=rng)
    y = random_hermitian(3, seed=rng)
    lhs = linalg.hs_inner(linalg.frechet_matfun(a, linalg.EXP, x), y)
    rhs = linalg.hs_inner(x, linalg.frechet_matfun(a, linalg.EXP, y))
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_frechet_degenerate_spectrum():
    # on a degenerate eigenspace the kernel falls back to the derivative
    a = np.eye(3, dtype=complex) * 2.0
    e = random_hermitian(3, seed=5)
    out = linalg.frechet_matfun(a, linalg.EXP, e)
    assert np.allclose(out, math.exp(2.0) * e, atol=1e-10)


def test_partial_trace_and_embed():
    rng = np.random.default_rng(6)
    a = random_hermitian(2, seed=rng)
    b = random_hermitian(3, seed=rng)
    ab = linalg.kron(a, b)
    assert np.allclose(
        linalg.partial_trace(ab, [2, 3], 1), a * np.real(np.trace(b)), atol=1e-12
    )
    lifted = linalg.embed(a, [2, 3], [0])
    assert np.allclose(lifted, linalg.kron(a, np.eye(3)), atol=1e-12)
    # embedding into a middle slot round-trips through permute_systems
    mid = linalg.embed(b, [2, 3, 2], [1])
    assert np.allclose(
        linalg.partial_trace(mid, [2, 3, 2], [0, 2]), 4.0 * b, atol=1e-12
    )


def test_permute_systems_involution():
    m = random_hermitian(6, seed=7)
    back = linalg.permute_systems(
        linalg.permute_systems(m, [2, 3], [1, 0]), [3, 2], [1, 0]
    )
    assert np.allclose(back, m, atol=1e-14)


def test_partial_trace_shape_errors():
    with pytest.raises(ShapeError):
        linalg.partial_trace(np.eye(5), [2, 3], 0)
    with pytest.raises(ShapeError):
        linalg.partial_trace(np.eye(6), [2, 3], 2)


def test_herm_vec_isometry():
    h = random_hermitian(4, seed=8)
    v = linalg.herm_to_vec(h)
    assert np.allclose(linalg.vec_to_herm(v, 4), h, atol=1e-14)
    assert abs(float(v @ v) - float(np.real(np.sum(h * h.conj())))) < 1e-12


def test_minimize_bfgs_quadratic():
    a = np.diag([1.0, 10.0, 100.0])
    b = np.array([1.0, -2.0, 3.0])

    def fg(x):
        return 0.5 * float(x @ a @ x) - float(b @ x), a @ x - b

    res = linalg.minimize_bfgs(fg, np.zeros(3))
    assert res.converged
    assert np.allclose(res.x, np.linalg.solve(a, b), atol=1e-6)


def test_minimize_bfgs_monotone_trace():
    def fg(x):
        return float(np.cosh(x).sum()), np.sinh(x)

    res = linalg.minimize_bfgs(fg, np.array([2.0, -1.0]), record_trace=True)
    assert res.converged
    diffs = np.diff(res.trace)
    assert np.all(diffs <= 1e-12)
