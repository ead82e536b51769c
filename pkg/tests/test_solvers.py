import math

import numpy as np
import pytest

from helpers import commuting_pair, full_rank_pair, noncommuting_pair
from qdiv import linalg
from qdiv.divergences import INF, kl, measured_value, renyi_classical, sandwiched_d, umegaki
from qdiv.errors import DomainError
from qdiv.solvers import (
    SolverConfig,
    alberti_form_q,
    extract_optimal_measurement,
    frank_lieb_q,
    measured_checked,
    measured_rel_entropy,
    measured_renyi_q,
    petz_umegaki_variational,
)
from qdiv.states import random_density


def test_measured_rel_entropy_identical_states():
    rho = random_density(2, seed=0).matrix
    rep = measured_rel_entropy(rho, rho)
    assert abs(rep.value) < 1e-10
    assert rep.converged


def test_measured_rel_entropy_commuting_closed_form():
    p = np.array([0.7, 0.3])
    q = np.array([0.4, 0.6])
    rep = measured_rel_entropy(np.diag(p).astype(complex), np.diag(q).astype(complex))
    assert abs(rep.value - kl(p, q)) < 1e-10
    # omega* eigenvalues are the probability ratios
    w = np.sort(np.linalg.eigvalsh(rep.optimizer.omega_star))
    assert np.allclose(np.sort(w), np.sort(p / q), atol=1e-6)


def test_measured_strictly_below_umegaki_noncommuting():
    rng = np.random.default_rng(1)
    for _ in range(5):
        rho, sigma = noncommuting_pair(rng)
        rep = measured_rel_entropy(rho, sigma)
        assert umegaki(rho, sigma) - rep.value > 1e-6
        assert rep.converged


def test_measured_support_violation_infinite():
    rho = np.diag([1.0, 0.0]).astype(complex)
    sigma = np.diag([0.0, 1.0]).astype(complex)
    assert measured_rel_entropy(rho, sigma).value == INF


def test_measured_renyi_identical_states():
    rho = random_density(2, seed=2).matrix
    for alpha in (0.3, 0.6, 2.0):
        rep = measured_renyi_q(rho, rho, alpha)
        assert abs(rep.q_value - 1.0) < 1e-9
        assert abs(rep.value) < 1e-9


def test_measured_renyi_commuting_classical():
    rng = np.random.default_rng(3)
    rho, sigma = commuting_pair(rng)
    u = linalg.eig_hermitian(sigma)[1]
    p = np.real(np.einsum("ij,jk,ki->i", u.conj().T, rho, u))
    q = np.real(np.einsum("ij,jk,ki->i", u.conj().T, sigma, u))
    for alpha in (0.3, 0.6, 2.0, 5.0):
        rep = measured_renyi_q(rho, sigma, alpha)
        assert abs(rep.value - renyi_classical(p, alpha, q)) < 1e-8


def test_measured_renyi_half_equals_sandwiched():
    rng = np.random.default_rng(4)
    for _ in range(5):
        rho, sigma = full_rank_pair(rng)
        rep = measured_renyi_q(rho, sigma, 0.5)
        assert abs(rep.value - sandwiched_d(rho, sigma, 0.5)) < 1e-7


def test_measured_renyi_small_alpha_violation():
    rng = np.random.default_rng(5)
    rho, sigma = noncommuting_pair(rng, floor=0.3)
    rep = measured_renyi_q(rho, sigma, 0.3)
    assert rep.value > sandwiched_d(rho, sigma, 0.3) + 1e-5


def test_near_one_dispatch():
    rng = np.random.default_rng(6)
    rho, sigma = full_rank_pair(rng)
    rep = measured_renyi_q(rho, sigma, 1.0 + 1e-4)
    base = measured_rel_entropy(rho, sigma)
    assert rep.method == "measured-variational-near-1"
    assert abs(rep.value - base.value) < 1e-3


def test_alpha_continuity_brackets():
    rng = np.random.default_rng(7)
    rho, sigma = full_rank_pair(rng)
    base = measured_rel_entropy(rho, sigma).value
    lo = measured_renyi_q(rho, sigma, 1.0 - 2e-3).value
    hi = measured_renyi_q(rho, sigma, 1.0 + 2e-3).value
    assert lo - 1e-3 <= base <= hi + 1e-3


def _lifted_omega(rep):
    # the optimizer is expressed in the support eigenbasis of sigma; lift it
    # back into the original coordinates before evaluating objectives
    basis = rep.restriction_basis
    return basis @ rep.optimizer.omega_star @ basis.conj().T


def test_lemma2_form_equivalence():
    # the two sub-1 forms agree under omega -> omega^(alpha/(alpha-1))
    rng = np.random.default_rng(8)
    rho, sigma = full_rank_pair(rng)
    alpha = 0.7
    rep = measured_renyi_q(rho, sigma, alpha)
    omega = _lifted_omega(rep)
    # for alpha in [1/2, 1) the solver variable is the transformed omega of
    # the second form; mapping it back through omega -> omega^((a-1)/a)
    # must reproduce the same Q value
    q1 = alberti_form_q(rho, sigma, alpha, linalg.matpow(omega, (alpha - 1.0) / alpha))
    assert abs(q1 - rep.q_value) < 1e-7


def test_alberti_examples():
    rng = np.random.default_rng(9)
    rho, sigma = full_rank_pair(rng)
    for alpha in (0.3, 0.7, 2.0):
        rep = measured_renyi_q(rho, sigma, alpha)
        omega = _lifted_omega(rep)
        if 0.5 <= alpha < 1.0:
            omega = linalg.matpow(omega, (alpha - 1.0) / alpha)
        assert abs(alberti_form_q(rho, sigma, alpha, omega) - rep.q_value) < 1e-7
        # scale invariance at gamma = 17
        a = alberti_form_q(rho, sigma, alpha, omega)
        b = alberti_form_q(rho, sigma, alpha, 17.0 * omega)
        assert abs(a - b) < 1e-12 * max(1.0, abs(a))
    assert abs(alberti_form_q(rho, sigma, 2.0, np.eye(2, dtype=complex)) - 1.0) < 1e-12
    with pytest.raises(DomainError):
        alberti_form_q(rho, sigma, 2.0, np.diag([1.0, -1.0]).astype(complex))


def test_petz_matches_umegaki():
    rng = np.random.default_rng(10)
    for _ in range(5):
        rho, sigma = full_rank_pair(rng, d=3)
        rep = petz_umegaki_variational(rho, sigma)
        assert abs(rep.value - umegaki(rho, sigma)) < 1e-6


def test_frank_lieb_matches_sandwiched():
    rng = np.random.default_rng(11)
    for alpha in (0.7, 2.0):
        rho, sigma = full_rank_pair(rng, d=3)
        rep = frank_lieb_q(rho, sigma, alpha)
        assert abs(rep.value - sandwiched_d(rho, sigma, alpha)) < 1e-6


def test_extract_measurement_roundtrip():
    rng = np.random.default_rng(12)
    for alpha in (1.0, 0.6, 2.0):
        rho, sigma = noncommuting_pair(rng)
        rep, at_meas = measured_checked(rho, sigma, alpha)
        assert abs(at_meas - rep.value) < 1e-6


def test_extract_measurement_degenerate():
    rho = random_density(2, seed=13).matrix
    rep = measured_rel_entropy(rho, rho)
    m = extract_optimal_measurement(rep)
    assert abs(measured_value(rho, rho, m, 1.0)) < 1e-12


def test_solver_config_roundtrip():
    cfg = SolverConfig(gtol=1e-8, maxiter=500)
    assert SolverConfig.from_json(cfg.to_json()) == cfg


def test_lower_bound_soundness():
    rng = np.random.default_rng(14)
    rho, sigma = full_rank_pair(rng)
    cfg = SolverConfig(record_trace=True)
    rep = measured_rel_entropy(rho, sigma, cfg)
    trace = rep.optimizer.objective_trace
    assert all(v <= rep.value + 1e-12 for v in trace)


def test_truncated_solver_is_still_a_lower_bound():
    rng = np.random.default_rng(15)
    rho, sigma = noncommuting_pair(rng)
    full = measured_rel_entropy(rho, sigma).value
    rough = measured_rel_entropy(rho, sigma, SolverConfig(maxiter=3))
    assert rough.value <= full + 1e-12
