"""Variational solvers for measured relative entropies and the independent
variational evaluators for the Umegaki and sandwiched Renyi closed forms.

All problems are solved in the unconstrained parametrization omega = exp(H)
over Hermitian H, with analytic gradients assembled from divided-difference
kernels.  Ascent problems are run through negation so that every accepted
iterate is a valid bound on the reported value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .divergences import (
    INF,
    Measurement,
    check_order,
    dominates,
    measured_value,
    quantum_orthogonal,
)
from .errors import DomainError
from .linalg import EXP, frechet_apply, herm_to_vec, scaled_exp, vec_to_herm
from .states import asmatrix


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for the variational solvers (JSON-serializable)."""

    gtol: float = 1e-9
    maxiter: int = 10000
    armijo_c: float = 1e-4
    record_trace: bool = False

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SolverConfig":
        return cls(**obj)


DEFAULT_CONFIG = SolverConfig()


@dataclass
class OptimizerReport:
    """Outcome of one variational solve in the H = log(omega) coordinates."""

    value: float
    h_star: np.ndarray
    omega_star: np.ndarray
    iterations: int
    gradient_norm: float
    converged: bool
    objective_trace: list = field(default_factory=list)


@dataclass
class DivergenceReport:
    """A divergence value with its optimizer, diagnostics and provenance."""

    value: float
    alpha: float
    method: str
    converged: bool
    iterations: int = 0
    gradient_norm: float = math.nan
    q_value: float | None = None
    optimizer: OptimizerReport | None = None
    measurement: Measurement | None = None
    support_warning: str | None = None
    restriction_basis: np.ndarray | None = None

    def to_json(self) -> dict:
        def enc(x):
            if x is None or isinstance(x, str):
                return x
            if x == INF:
                return "inf"
            if x == -INF:
                return "-inf"
            return float(x)

        return {
            "value": enc(self.value),
            "alpha": enc(self.alpha),
            "method": self.method,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "gradient_norm": enc(self.gradient_norm),
            "q_value": enc(self.q_value),
            "support_warning": self.support_warning,
        }


# ---------------------------------------------------------------------------
# restriction to the support of sigma
# ---------------------------------------------------------------------------


def _restrict(rho: np.ndarray, sigma: np.ndarray):
    """Project both operators onto the support of sigma.  Returns the
    restricted pair and the isometry (columns) of the support basis."""
    w, u = linalg.eig_hermitian(sigma)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    keep = w > 1e-10 * scale
    basis = u[:, keep]
    r = linalg.symmetrize(basis.conj().T @ rho @ basis)
    s = np.diag(w[keep]).astype(complex)
    return r, s, basis


def _lift_basis(columns: np.ndarray, full_dim: int, basis: np.ndarray):
    """Lift an orthonormal basis of the restricted subspace back to the full
    space and complete it with the orthogonal complement."""
    lifted = basis @ columns
    if lifted.shape[1] == full_dim:
        return lifted
    # complete via QR of [lifted | identity]
    q, _ = np.linalg.qr(
        np.concatenate([lifted, np.eye(full_dim, dtype=complex)], axis=1)
    )
    return q[:, :full_dim]


# ---------------------------------------------------------------------------
# generic solve driver
# ---------------------------------------------------------------------------


def _solve(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    h0: np.ndarray,
    maximize: bool,
    config: SolverConfig,
) -> OptimizerReport:
    d = h0.shape[0]
    sign = -1.0 if maximize else 1.0

    def fun_grad(v):
        h = vec_to_herm(v, d)
        with np.errstate(over="ignore", invalid="ignore"):
            f, g = objective(h)
        if not np.isfinite(f):
            return math.inf, np.zeros(d * d)
        return sign * f, sign * herm_to_vec(g)

    res = linalg.minimize_bfgs(
        fun_grad,
        herm_to_vec(h0),
        gtol=config.gtol,
        maxiter=config.maxiter,
        armijo_c=config.armijo_c,
        record_trace=config.record_trace,
    )
    h_star = vec_to_herm(res.x, d)
    return OptimizerReport(
        value=sign * res.value,
        h_star=h_star,
        omega_star=linalg.matexp(h_star),
        iterations=res.iterations,
        gradient_norm=res.grad_norm,
        converged=res.converged,
        objective_trace=[sign * v for v in res.trace],
    )


def _pinched_log_ratio(rho: np.ndarray, sigma: np.ndarray, power: float = 1.0):
    """H0 = V diag(power * log(p_i / q_i)) V† in sigma's eigenbasis, the exact
    optimizer for commuting pairs."""
    w, v = linalg.eig_hermitian(sigma)
    p = np.real(np.einsum("ij,jk,ki->i", v.conj().T, rho, v))
    p = np.maximum(p, 1e-15)
    q = np.maximum(w, 1e-15)
    return linalg.symmetrize((v * (power * (np.log(p) - np.log(q)))) @ v.conj().T)


# ---------------------------------------------------------------------------
# measured relative entropy (KL case)
# ---------------------------------------------------------------------------


def measured_rel_entropy(rho, sigma, config: SolverConfig = DEFAULT_CONFIG) -> DivergenceReport:
    """D^P = D^M via  sup_{H}  tr[rho H] + 1 - tr[sigma exp(H)]."""
    rho_m, sigma_m = asmatrix(rho), asmatrix(sigma)
    if not dominates(sigma_m, rho_m):
        return DivergenceReport(
            value=INF, alpha=1.0, method="measured-variational",
            converged=True, support_warning="supp(rho) not within supp(sigma)",
        )
    r, s, basis = _restrict(rho_m, sigma_m)

    def objective(h):
        w, u = linalg.eig_hermitian(h)
        if np.max(w) > 300:
            return math.inf, h
        exp_h = linalg.symmetrize((u * np.exp(w)) @ u.conj().T)
        f = linalg.hs_inner(r, h) + 1.0 - linalg.hs_inner(s, exp_h)
        g = r - frechet_apply(w, u, EXP, s)
        return f, g

    opt = _solve(objective, _pinched_log_ratio(r, s), maximize=True, config=config)
    report = DivergenceReport(
        value=opt.value, alpha=1.0, method="measured-variational",
        converged=opt.converged, iterations=opt.iterations,
        gradient_norm=opt.gradient_norm, optimizer=opt,
        restriction_basis=basis,
    )
    report.measurement = extract_optimal_measurement(report)
    return report


# ---------------------------------------------------------------------------
# measured Renyi relative entropy
# ---------------------------------------------------------------------------

NEAR_ONE_WINDOW = 1e-3


def measured_renyi_q(rho, sigma, alpha: float, config: SolverConfig = DEFAULT_CONFIG) -> DivergenceReport:
    """Q_alpha^P = Q_alpha^M through the regime-split variational forms.

    The report's ``q_value`` holds Q and ``value`` holds
    D = log(Q) / (alpha - 1).  Orders within 1e-3 of 1 dispatch to the
    measured relative entropy (the Renyi form is ill-conditioned there).
    """
    alpha = check_order(alpha)
    if alpha == INF:
        raise DomainError(
            "order infinity has no Q-form; use the max-divergence routines"
        )
    if abs(alpha - 1.0) < NEAR_ONE_WINDOW:
        base = measured_rel_entropy(rho, sigma, config)
        base.alpha = alpha
        base.method = "measured-variational-near-1"
        if alpha != 1.0 and base.value not in (INF, -INF):
            base.q_value = math.exp((alpha - 1.0) * base.value)
        return base
    rho_m, sigma_m = asmatrix(rho), asmatrix(sigma)
    if alpha > 1.0 and not dominates(sigma_m, rho_m):
        return DivergenceReport(
            value=INF, alpha=alpha, method="measured-renyi", converged=True,
            q_value=INF, support_warning="supp(rho) not within supp(sigma)",
        )
    if alpha < 1.0 and quantum_orthogonal(rho_m, sigma_m):
        return DivergenceReport(
            value=INF, alpha=alpha, method="measured-renyi", converged=True,
            q_value=0.0, support_warning="rho orthogonal to sigma",
        )
    r, s, basis = _restrict(rho_m, sigma_m)
    boundary = not dominates(sigma_m, rho_m)

    if alpha < 0.5:
        c = alpha / (alpha - 1.0)
        f_c = scaled_exp(c)

        def objective(h):
            w, u = linalg.eig_hermitian(h)
            if np.max(np.abs(w)) > 300:
                return math.inf, h
            e1 = linalg.symmetrize((u * np.exp(w)) @ u.conj().T)
            e2 = linalg.symmetrize((u * np.exp(c * w)) @ u.conj().T)
            f = alpha * linalg.hs_inner(r, e1) + (1 - alpha) * linalg.hs_inner(s, e2)
            g = alpha * frechet_apply(w, u, EXP, r) + (1 - alpha) * frechet_apply(w, u, f_c, s)
            return f, g

        h0 = _pinched_log_ratio(r, s, power=alpha - 1.0)
        opt = _solve(objective, h0, maximize=False, config=config)
    else:
        b = 1.0 - 1.0 / alpha
        f_b = scaled_exp(b)
        maximize = alpha > 1.0

        def objective(h):
            w, u = linalg.eig_hermitian(h)
            if np.max(np.abs(w)) > 300:
                return math.inf, h
            e1 = linalg.symmetrize((u * np.exp(b * w)) @ u.conj().T)
            e2 = linalg.symmetrize((u * np.exp(w)) @ u.conj().T)
            f = alpha * linalg.hs_inner(r, e1) + (1 - alpha) * linalg.hs_inner(s, e2)
            g = alpha * frechet_apply(w, u, f_b, r) + (1 - alpha) * frechet_apply(w, u, EXP, s)
            return f, g

        h0 = _pinched_log_ratio(r, s, power=alpha)
        opt = _solve(objective, h0, maximize=maximize, config=config)

    q = opt.value
    d_val = math.log(q) / (alpha - 1.0) if q > 0 else INF
    report = DivergenceReport(
        value=d_val, alpha=alpha, method="measured-renyi",
        converged=opt.converged and not boundary,
        iterations=opt.iterations, gradient_norm=opt.gradient_norm,
        q_value=q, optimizer=opt, restriction_basis=basis,
        support_warning="boundary support; attainment not guaranteed" if boundary else None,
    )
    report.measurement = extract_optimal_measurement(report)
    return report


def alberti_form_q(rho, sigma, alpha: float, omega) -> float:
    """Scale-invariant product objective; at the optimizer it equals
    Q_alpha^P, and it is invariant under omega -> gamma * omega."""
    alpha = check_order(alpha)
    if alpha in (1.0, INF):
        raise DomainError("product form defined for alpha != 1, inf")
    r, s = asmatrix(rho), asmatrix(sigma)
    om = asmatrix(omega)
    w, _ = linalg.eig_hermitian(om)
    if np.min(w) <= 0:
        raise DomainError("omega must be positive definite")
    if alpha < 1.0:
        t1 = linalg.hs_inner(r, om)
        t2 = linalg.hs_inner(s, linalg.matpow(om, alpha / (alpha - 1.0)))
        return t1**alpha * t2 ** (1.0 - alpha)
    t1 = linalg.hs_inner(r, linalg.matpow(om, 1.0 - 1.0 / alpha))
    t2 = linalg.hs_inner(s, om)
    return t1**alpha * t2 ** (1.0 - alpha)


# ---------------------------------------------------------------------------
# Petz (Umegaki) and Frank-Lieb (sandwiched) variational evaluators
# ---------------------------------------------------------------------------


def petz_umegaki_variational(rho, sigma, config: SolverConfig = DEFAULT_CONFIG) -> DivergenceReport:
    """Umegaki relative entropy via
    sup_H tr[rho H] + 1 - tr[exp(log sigma + H)]."""
    rho_m, sigma_m = asmatrix(rho), asmatrix(sigma)
    if not dominates(sigma_m, rho_m):
        return DivergenceReport(
            value=INF, alpha=1.0, method="petz-variational", converged=True,
            support_warning="supp(rho) not within supp(sigma)",
        )
    r, s, basis = _restrict(rho_m, sigma_m)
    log_s = linalg.matlog(s)

    def objective(h):
        m = linalg.symmetrize(log_s + h)
        w, u = linalg.eig_hermitian(m)
        if np.max(w) > 300:
            return math.inf, h
        exp_m = linalg.symmetrize((u * np.exp(w)) @ u.conj().T)
        f = linalg.hs_inner(r, h) + 1.0 - float(np.real(np.trace(exp_m)))
        g = r - exp_m
        return f, g

    opt = _solve(objective, _pinched_log_ratio(r, s), maximize=True, config=config)
    return DivergenceReport(
        value=opt.value, alpha=1.0, method="petz-variational",
        converged=opt.converged, iterations=opt.iterations,
        gradient_norm=opt.gradient_norm, optimizer=opt,
        restriction_basis=basis,
    )


def frank_lieb_q(rho, sigma, alpha: float, config: SolverConfig = DEFAULT_CONFIG) -> DivergenceReport:
    """Sandwiched Q_alpha via the trace-function variational form
    alpha tr[rho w] + (1-alpha) tr[(w^1/2 sigma^((a-1)/a) w^1/2)^(a/(a-1))].
    """
    alpha = check_order(alpha)
    if alpha in (1.0, INF):
        raise DomainError("Frank-Lieb form defined for alpha != 1, inf")
    rho_m, sigma_m = asmatrix(rho), asmatrix(sigma)
    if alpha > 1.0 and not dominates(sigma_m, rho_m):
        return DivergenceReport(
            value=INF, alpha=alpha, method="frank-lieb", converged=True,
            q_value=INF, support_warning="supp(rho) not within supp(sigma)",
        )
    r, s, basis = _restrict(rho_m, sigma_m)
    c = alpha / (alpha - 1.0)
    a_mat = linalg.matpow(s, (alpha - 1.0) / alpha)
    half = scaled_exp(0.5)

    def objective(h):
        w, u = linalg.eig_hermitian(h)
        if np.max(np.abs(w)) > 300:
            return math.inf, h
        e1 = linalg.symmetrize((u * np.exp(w)) @ u.conj().T)
        root = (u * np.exp(0.5 * w)) @ u.conj().T
        m = linalg.symmetrize(root @ a_mat @ root)
        wm, um = linalg.eig_hermitian(m)
        if np.min(wm) <= 1e-250:
            return math.inf, h
        h_m = linalg.symmetrize((um * wm**c) @ um.conj().T)
        hp_m = linalg.symmetrize((um * (c * wm ** (c - 1.0))) @ um.conj().T)
        f = alpha * linalg.hs_inner(r, e1) + (1 - alpha) * float(np.real(np.trace(h_m)))
        w_mat = linalg.symmetrize(a_mat @ root @ hp_m + hp_m @ root @ a_mat)
        g = alpha * frechet_apply(w, u, EXP, r) + (1 - alpha) * frechet_apply(w, u, half, w_mat)
        return f, g

    # known closed-form optimizer, exact also for non-commuting pairs
    s_pow = linalg.matpow(s, (1.0 - alpha) / (2.0 * alpha))
    g_mat = linalg.symmetrize(s_pow @ r @ s_pow)
    wg, ug = linalg.eig_hermitian(g_mat)
    wg = np.maximum(wg, 1e-15)
    s_pow2 = linalg.matpow(s, (alpha - 1.0) / (2.0 * alpha))
    omega0 = linalg.symmetrize(
        s_pow2 @ ((ug * wg ** (alpha - 1.0)) @ ug.conj().T) @ s_pow2
    )
    h0 = linalg.matlog(omega0)
    opt = _solve(objective, h0, maximize=alpha > 1.0, config=config)
    q = opt.value
    d_val = math.log(q) / (alpha - 1.0) if q > 0 else INF
    return DivergenceReport(
        value=d_val, alpha=alpha, method="frank-lieb",
        converged=opt.converged, iterations=opt.iterations,
        gradient_norm=opt.gradient_norm, q_value=q, optimizer=opt,
        restriction_basis=basis,
    )


# ---------------------------------------------------------------------------
# optimal measurement extraction
# ---------------------------------------------------------------------------


def extract_optimal_measurement(report: DivergenceReport) -> Measurement:
    """The optimal rank-1 projective measurement: the eigenbasis of the
    optimizer omega*, lifted back to the full space and completed."""
    if report.optimizer is None:
        raise DomainError("report carries no optimizer")
    _, u = linalg.eig_hermitian(report.optimizer.h_star)
    basis = report.restriction_basis
    full_dim = basis.shape[0]
    return Measurement.projective(_lift_basis(u, full_dim, basis))


def measured_checked(rho, sigma, alpha: float = 1.0, config: SolverConfig = DEFAULT_CONFIG):
    """Convenience: solve, then re-evaluate the value at the extracted
    measurement.  Returns (report, value_at_measurement)."""
    if alpha == 1.0:
        report = measured_rel_entropy(rho, sigma, config)
    else:
        report = measured_renyi_q(rho, sigma, alpha, config)
    if report.measurement is None:
        return report, report.value
    return report, measured_value(rho, sigma, report.measurement, alpha)
