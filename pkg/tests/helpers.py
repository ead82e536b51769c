"""Shared generators for the test suite: seeded state pairs and recovery
instances."""

import numpy as np

from qdiv import linalg
from qdiv.recovery import RecoveryProblem
from qdiv.states import _rng, commutator_norm, random_density, random_unitary

EIG_FLOOR = 0.05


def full_rank_pair(rng, d=2):
    """Seeded full-rank pair with spectra bounded away from zero (the
    strict-inequality statements assume positive definite inputs)."""
    rng = _rng(rng)

    def one():
        u = random_unitary(d, rng)
        p = rng.dirichlet(np.ones(d)) * (1.0 - d * EIG_FLOOR) + EIG_FLOOR
        return linalg.symmetrize((u * p) @ u.conj().T)

    return one(), one()


def commuting_pair(rng, d=2):
    """Full-rank pair diagonal in a shared random basis."""
    rng = _rng(rng)
    u = random_unitary(d, rng)
    p = rng.dirichlet(np.ones(d)) * (1.0 - d * EIG_FLOOR) + EIG_FLOOR
    q = rng.dirichlet(np.ones(d)) * (1.0 - d * EIG_FLOOR) + EIG_FLOOR
    return (
        linalg.symmetrize((u * p) @ u.conj().T),
        linalg.symmetrize((u * q) @ u.conj().T),
    )


def noncommuting_pair(rng, d=2, floor=0.1):
    """Full-rank pair with commutator norm above ``floor``."""
    rng = _rng(rng)
    while True:
        rho, sigma = full_rank_pair(rng, d)
        if commutator_norm(rho, sigma) > floor:
            return rho, sigma


def recovery_instance(
    rng,
    kind,
    alpha=None,
    d_a=2,
    d_d=2,
    d_e=2,
    rho_rank=None,
    sigma_rank=2,
):
    """Random recovery problem; rho full-rank by default (the Renyi primal
    is attained only there) and purification rank <= sigma_rank."""
    rng = _rng(rng)
    while True:
        rho = random_density(d_a * d_d, rank=rho_rank, seed=rng).matrix
        sigma = random_density(
            d_a * d_e, rank=min(sigma_rank, d_a * d_e), seed=rng
        ).matrix
        try:
            return RecoveryProblem(
                rho_ad=rho,
                sigma_ae=sigma,
                dims_ad=(d_a, d_d),
                dims_ae=(d_a, d_e),
                kind=kind,
                alpha=alpha,
            )
        except Exception:
            continue  # marginal positivity can fail for low-rank draws


def perfect_recovery_instance(rng, kind="MeasRec", alpha=None, d_a=2, d_d=2):
    """sigma_AE = rho_AD with E = D: the identity channel recovers exactly."""
    rng = _rng(rng)
    rho = random_density(d_a * d_d, seed=rng).matrix
    return RecoveryProblem(
        rho_ad=rho,
        sigma_ae=rho,
        dims_ad=(d_a, d_d),
        dims_ae=(d_a, d_d),
        kind=kind,
        alpha=alpha,
    )
