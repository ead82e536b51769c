import math

import numpy as np
import pytest

from helpers import commuting_pair, full_rank_pair, noncommuting_pair
from qdiv import linalg
from qdiv.divergences import (
    INF,
    ClassicalPair,
    Measurement,
    entropy,
    fidelity,
    kl,
    max_divergence,
    measured_value,
    renyi_classical,
    sandwiched_d,
    sandwiched_q,
    umegaki,
)
from qdiv.states import random_density, random_unitary


def test_kl_examples():
    assert kl(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0
    assert kl(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == INF
    got = kl(np.array([0.7, 0.3]), np.array([0.4, 0.6]))
    want = 0.7 * math.log(1.75) + 0.3 * math.log(0.5)
    assert abs(got - want) < 1e-14


def test_renyi_classical_examples():
    p = np.array([0.5, 0.5])
    for alpha in (0.3, 0.5, 2.0, 5.0, 1.0, INF):
        assert abs(renyi_classical(p, alpha, p)) < 1e-14
    got = renyi_classical(np.array([1.0, 0.0]), 2.0, np.array([0.5, 0.5]))
    assert abs(got - math.log(2.0)) < 1e-14


def test_renyi_alpha_to_one_limit():
    p = np.array([0.6, 0.3, 0.1])
    q = np.array([0.2, 0.5, 0.3])
    base = kl(p, q)
    # the near-1 orders converge to the KL divergence
    for k in (3, 4, 5, 6):
        for sign in (+1, -1):
            val = renyi_classical(p, 1.0 + sign * 10.0**-k, q)
            assert abs(val - base) < 10.0 ** -(k - 1)
    assert abs(renyi_classical(p, 1.0 + 1e-6, q) - base) < 1e-6


def test_renyi_support_conventions():
    p = np.array([0.5, 0.5])
    q = np.array([1.0, 0.0])
    assert renyi_classical(p, 2.0, q) == INF  # not p << q
    assert renyi_classical(p, 0.5, q) < INF  # overlap is enough below 1
    disjoint = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    assert renyi_classical(disjoint[0], 0.5, disjoint[1]) == INF


def test_classical_monotone_in_alpha():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.dirichlet(np.ones(3))
        q = rng.dirichlet(np.ones(3))
        grid = [0.3, 0.5, 0.9, 1.0, 1.5, 2.0, 5.0]
        vals = [renyi_classical(p, a, q) for a in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_coarse_graining_never_increases():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = rng.dirichlet(np.ones(4))
        q = rng.dirichlet(np.ones(4))
        pm = np.array([p[0] + p[1], p[2], p[3]])
        qm = np.array([q[0] + q[1], q[2], q[3]])
        for alpha in (0.3, 0.5, 0.9, 1.0, 2.0, 5.0):
            assert renyi_classical(pm, alpha, qm) <= renyi_classical(p, alpha, q) + 1e-12


def test_umegaki_examples():
    rho = random_density(2, seed=2).matrix
    assert abs(umegaki(rho, rho)) < 1e-12
    p = np.array([0.7, 0.3])
    q = np.array([0.4, 0.6])
    got = umegaki(np.diag(p).astype(complex), np.diag(q).astype(complex))
    assert abs(got - kl(p, q)) < 1e-12


def test_umegaki_support_condition():
    rho = np.diag([1.0, 0.0]).astype(complex)
    sigma = np.diag([0.0, 1.0]).astype(complex)
    assert umegaki(rho, sigma) == INF
    # reversed inclusion is fine
    assert np.isfinite(umegaki(rho, np.diag([0.5, 0.5]).astype(complex)))


def test_sandwiched_commuting_reduces_to_classical():
    rng = np.random.default_rng(3)
    rho, sigma = commuting_pair(rng)
    wr = np.sort(np.linalg.eigvalsh(rho))
    ws = np.sort(np.linalg.eigvalsh(sigma))
    # shared basis and simple spectra: sorted eigenvalues pair up
    u = linalg.eig_hermitian(sigma)[1]
    p = np.real(np.einsum("ij,jk,ki->i", u.conj().T, rho, u))
    q = np.real(np.einsum("ij,jk,ki->i", u.conj().T, sigma, u))
    for alpha in (0.3, 0.5, 2.0, 5.0):
        assert abs(sandwiched_d(rho, sigma, alpha) - renyi_classical(p, alpha, q)) < 1e-10
    assert abs(umegaki(rho, sigma) - kl(p, q)) < 1e-10
    del wr, ws


def test_sandwiched_half_is_fidelity():
    rng = np.random.default_rng(4)
    for _ in range(10):
        rho, sigma = full_rank_pair(rng)
        f = fidelity(rho, sigma)
        assert abs(sandwiched_d(rho, sigma, 0.5) + 2.0 * math.log(f)) < 1e-10


def test_sandwiched_limits():
    rng = np.random.default_rng(5)
    rho, sigma = full_rank_pair(rng)
    assert abs(sandwiched_d(rho, sigma, 1.0) - umegaki(rho, sigma)) < 1e-12
    dmax = sandwiched_d(rho, sigma, INF)
    assert abs(dmax - max_divergence(rho, sigma)) < 1e-12
    # D_alpha increases towards D_inf
    assert sandwiched_d(rho, sigma, 5.0) <= dmax + 1e-10


def test_max_divergence_dominance():
    rng = np.random.default_rng(6)
    rho, sigma = full_rank_pair(rng)
    lam = max_divergence(rho, sigma)
    gap = math.exp(lam) * sigma - rho
    assert float(np.min(np.linalg.eigvalsh(gap))) > -1e-10


def test_measured_value_examples():
    rng = np.random.default_rng(7)
    rho, sigma = commuting_pair(rng)
    basis = linalg.eig_hermitian(sigma)[1]
    m = Measurement.projective(basis)
    assert abs(measured_value(rho, sigma, m, 1.0) - umegaki(rho, sigma)) < 1e-10
    trivial = Measurement.povm([np.eye(2, dtype=complex)])
    assert abs(measured_value(rho, sigma, trivial, 2.0)) < 1e-14


def test_measured_data_processing():
    rng = np.random.default_rng(8)
    for _ in range(10):
        rho, sigma = noncommuting_pair(rng)
        u = random_unitary(2, rng)
        m = Measurement.projective(u)
        for alpha in (0.5, 0.75, 1.0, 2.0, 5.0):
            assert measured_value(rho, sigma, m, alpha) <= sandwiched_d(rho, sigma, alpha) + 1e-10


def test_unitary_invariance():
    rng = np.random.default_rng(9)
    rho, sigma = full_rank_pair(rng)
    u = random_unitary(2, rng)
    ur, us = u @ rho @ u.conj().T, u @ sigma @ u.conj().T
    assert abs(umegaki(rho, sigma) - umegaki(ur, us)) < 1e-9
    for alpha in (0.3, 2.0):
        assert abs(sandwiched_d(rho, sigma, alpha) - sandwiched_d(ur, us, alpha)) < 1e-9
    assert abs(max_divergence(rho, sigma) - max_divergence(ur, us)) < 1e-9


def test_tensor_additivity():
    rng = np.random.default_rng(10)
    r1, s1 = full_rank_pair(rng)
    r2, s2 = full_rank_pair(rng)
    rr, ss = linalg.kron(r1, r2), linalg.kron(s1, s2)
    assert abs(umegaki(rr, ss) - umegaki(r1, s1) - umegaki(r2, s2)) < 1e-8
    for alpha in (0.5, 2.0):
        assert (
            abs(
                sandwiched_d(rr, ss, alpha)
                - sandwiched_d(r1, s1, alpha)
                - sandwiched_d(r2, s2, alpha)
            )
            < 1e-8
        )


def test_sandwiched_q_consistency():
    rng = np.random.default_rng(11)
    rho, sigma = full_rank_pair(rng)
    for alpha in (0.3, 0.75, 2.0):
        q = sandwiched_q(rho, sigma, alpha)
        assert abs(math.log(q) / (alpha - 1.0) - sandwiched_d(rho, sigma, alpha)) < 1e-12


def test_entropy():
    assert abs(entropy(np.eye(2, dtype=complex) / 2.0) - math.log(2.0)) < 1e-12
    v = np.array([1.0, 0.0], dtype=complex)
    assert abs(entropy(np.outer(v, v))) < 1e-12


def test_classical_pair_flags():
    pair = ClassicalPair.of(np.array([0.5, 0.5, 0.0]), np.array([0.5, 0.0, 0.5]))
    assert not pair.abs_continuous
    assert not pair.orthogonal
