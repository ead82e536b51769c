"""Closed-form classical and quantum divergences.

Renyi orders are plain floats from (0, 1) u (1, inf); the value 1.0 is
understood symbolically as the Kullback-Leibler / Umegaki limit and
``math.inf`` as the max-divergence limit.  All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError, ShapeError
from .states import asmatrix

CLASSICAL_SUPPORT_TOL = 1e-14
QUANTUM_SUPPORT_TOL = 1e-10

INF = math.inf


def check_order(alpha: float) -> float:
    alpha = float(alpha)
    if alpha != INF and not alpha > 0:
        raise DomainError(f"Renyi order must be positive, got {alpha}")
    return alpha


@dataclass(frozen=True)
class ClassicalPair:
    """A probability vector P against a nonnegative measure Q, with support
    relationship flags computed at threshold 1e-14."""

    p: np.ndarray
    q: np.ndarray
    abs_continuous: bool  # P << Q
    orthogonal: bool  # P _|_ Q

    @classmethod
    def of(cls, p, q) -> "ClassicalPair":
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ShapeError("P and Q must be equal-length vectors")
        if abs(p.sum() - 1.0) > 1e-10:
            raise DomainError(f"P sums to {p.sum()}, not 1")
        if np.min(p) < -CLASSICAL_SUPPORT_TOL or np.min(q) < -CLASSICAL_SUPPORT_TOL:
            raise DomainError("negative entries in P or Q")
        p = np.maximum(p, 0.0)
        q = np.maximum(q, 0.0)
        sp = p > CLASSICAL_SUPPORT_TOL
        sq = q > CLASSICAL_SUPPORT_TOL
        return cls(
            p=p,
            q=q,
            abs_continuous=bool(np.all(sq[sp])),
            orthogonal=not bool(np.any(sp & sq)),
        )


def _aspair(pair_or_p, q=None) -> ClassicalPair:
    if isinstance(pair_or_p, ClassicalPair):
        return pair_or_p
    return ClassicalPair.of(pair_or_p, q)


def kl(pair, q=None) -> float:
    """Kullback-Leibler divergence, +inf when P is not absolutely continuous
    with respect to Q.  0 log 0 := 0."""
    pair = _aspair(pair, q)
    if not pair.abs_continuous:
        return INF
    mask = pair.p > CLASSICAL_SUPPORT_TOL
    p, qv = pair.p[mask], pair.q[mask]
    return float(np.sum(p * (np.log(p) - np.log(qv))))


def renyi_classical(pair, alpha: float, q=None) -> float:
    """Classical Renyi divergence of order alpha (1.0 -> KL, inf -> max)."""
    pair = _aspair(pair, q)
    alpha = check_order(alpha)
    if alpha == 1.0:
        return kl(pair)
    if alpha == INF:
        if not pair.abs_continuous:
            return INF
        mask = pair.p > CLASSICAL_SUPPORT_TOL
        return float(np.max(np.log(pair.p[mask]) - np.log(pair.q[mask])))
    if alpha > 1.0:
        if not pair.abs_continuous:
            return INF
        mask = pair.p > CLASSICAL_SUPPORT_TOL
        s = float(np.sum(pair.p[mask] ** alpha * pair.q[mask] ** (1.0 - alpha)))
        return math.log(s) / (alpha - 1.0)
    # alpha in (0, 1): finite unless P and Q are orthogonal
    if pair.orthogonal:
        return INF
    mask = (pair.p > CLASSICAL_SUPPORT_TOL) & (pair.q > CLASSICAL_SUPPORT_TOL)
    s = float(np.sum(pair.p[mask] ** alpha * pair.q[mask] ** (1.0 - alpha)))
    return math.log(s) / (alpha - 1.0)


def renyi_classical_q(pair, alpha: float, q=None) -> float:
    """The sum  sum_x P(x)^alpha Q(x)^(1-alpha)  (finite alpha != 1)."""
    pair = _aspair(pair, q)
    alpha = check_order(alpha)
    if alpha == 1.0 or alpha == INF:
        raise DomainError("Q-value undefined at the symbolic limits")
    if alpha > 1.0 and not pair.abs_continuous:
        return INF
    mask = (pair.p > CLASSICAL_SUPPORT_TOL) & (pair.q > CLASSICAL_SUPPORT_TOL)
    return float(np.sum(pair.p[mask] ** alpha * pair.q[mask] ** (1.0 - alpha)))


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Measurement:
    """Either a rank-1 projective basis (columns of a unitary) or a general
    POVM given by its PSD elements."""

    kind: str
    basis: np.ndarray | None = None
    elements: tuple | None = None

    @classmethod
    def projective(cls, basis: np.ndarray) -> "Measurement":
        basis = np.asarray(basis, dtype=complex)
        d = basis.shape[0]
        if basis.shape != (d, d):
            raise ShapeError("projective basis must be square")
        if np.max(np.abs(basis.conj().T @ basis - np.eye(d))) > 1e-10:
            raise ShapeError("basis columns are not orthonormal to 1e-10")
        return cls(kind="projective", basis=basis)

    @classmethod
    def povm(cls, elements) -> "Measurement":
        elements = tuple(np.asarray(e, dtype=complex) for e in elements)
        d = elements[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for e in elements:
            if e.shape != (d, d):
                raise ShapeError("POVM elements must share dimension")
            w, _ = linalg.eig_hermitian(e)
            if np.min(w) < -1e-10:
                raise ShapeError("POVM element is not PSD")
            total += e
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise ShapeError("POVM elements do not sum to identity")
        return cls(kind="povm", elements=elements)

    @property
    def dim(self) -> int:
        if self.kind == "projective":
            return self.basis.shape[0]
        return self.elements[0].shape[0]

    def probabilities(self, state) -> np.ndarray:
        m = asmatrix(state)
        if self.kind == "projective":
            return np.real(np.einsum("ij,jk,ki->i", self.basis.conj().T, m, self.basis))
        return np.array(
            [float(np.real(np.trace(e @ m))) for e in self.elements]
        )


def measured_value(rho, sigma, measurement: Measurement, alpha: float = 1.0) -> float:
    """Classical divergence of the outcome distributions of (rho, sigma)
    under a fixed measurement."""
    p = measurement.probabilities(rho)
    q = measurement.probabilities(sigma)
    p = np.maximum(p, 0.0)
    p = p / p.sum()
    q = np.maximum(q, 0.0)
    return renyi_classical(ClassicalPair.of(p, q), alpha)


# ---------------------------------------------------------------------------
# quantum divergences
# ---------------------------------------------------------------------------


def _support_basis(matrix: np.ndarray, rel_tol: float = QUANTUM_SUPPORT_TOL):
    w, u = linalg.eig_hermitian(matrix)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    keep = w > rel_tol * scale
    return u[:, keep], w[keep]


def dominates(sigma, rho, rel_tol: float = QUANTUM_SUPPORT_TOL) -> bool:
    """True when supp(rho) is contained in supp(sigma)."""
    r, s = asmatrix(rho), asmatrix(sigma)
    u, _ = _support_basis(s, rel_tol)
    off = r - u @ (u.conj().T @ r @ u) @ u.conj().T
    return float(np.linalg.norm(off)) <= rel_tol * max(
        1.0, float(np.linalg.norm(r))
    )


def quantum_orthogonal(rho, sigma, rel_tol: float = QUANTUM_SUPPORT_TOL) -> bool:
    """tr[Pi_rho Pi_sigma] = 0 within tolerance."""
    ur, _ = _support_basis(asmatrix(rho), rel_tol)
    us, _ = _support_basis(asmatrix(sigma), rel_tol)
    return float(np.linalg.norm(ur.conj().T @ us)) ** 2 <= rel_tol


def entropy(rho) -> float:
    """von Neumann entropy -tr[rho log rho] in nats."""
    w, _ = linalg.eig_hermitian(asmatrix(rho))
    w = w[w > CLASSICAL_SUPPORT_TOL]
    return float(-np.sum(w * np.log(w)))


def umegaki(rho, sigma) -> float:
    """tr[rho (log rho - log sigma)]; +inf when supp(rho) is not inside
    supp(sigma).  Computed with pseudo-logs on the support of sigma."""
    r, s = asmatrix(rho), asmatrix(sigma)
    if r.shape != s.shape:
        raise ShapeError("dimension mismatch")
    if not dominates(s, r):
        return INF
    u, w = _support_basis(s)
    r_sub = u.conj().T @ r @ u
    log_s_sub = np.diag(np.log(w)).astype(complex)
    wr, _ = linalg.eig_hermitian(r)
    wr = wr[wr > CLASSICAL_SUPPORT_TOL]
    tr_rho_log_rho = float(np.sum(wr * np.log(wr)))
    return tr_rho_log_rho - linalg.hs_inner(r_sub, log_s_sub)


def sandwiched_q(rho, sigma, alpha: float) -> float:
    """Q_alpha = tr[(sigma^((1-alpha)/2a) rho sigma^((1-alpha)/2a))^alpha]."""
    alpha = check_order(alpha)
    if alpha in (1.0, INF):
        raise DomainError("Q-value undefined at the symbolic limits")
    r, s = asmatrix(rho), asmatrix(sigma)
    if alpha > 1.0 and not dominates(s, r):
        return INF
    u, w = _support_basis(s)
    r_sub = u.conj().T @ r @ u
    power = (1.0 - alpha) / (2.0 * alpha)
    s_pow = np.diag(w**power).astype(complex)
    inner = linalg.symmetrize(s_pow @ r_sub @ s_pow)
    wi, _ = linalg.eig_hermitian(inner)
    wi = np.maximum(wi, 0.0)
    return float(np.sum(wi**alpha))


def sandwiched_d(rho, sigma, alpha: float) -> float:
    """Sandwiched Renyi relative entropy D_alpha (1.0 -> Umegaki, inf ->
    max-divergence)."""
    alpha = check_order(alpha)
    if alpha == 1.0:
        return umegaki(rho, sigma)
    if alpha == INF:
        return max_divergence(rho, sigma)
    if alpha < 1.0 and quantum_orthogonal(rho, sigma):
        return INF
    q = sandwiched_q(rho, sigma, alpha)
    if q == INF:
        return INF
    if q <= 0:
        return INF if alpha < 1.0 else -INF
    return math.log(q) / (alpha - 1.0)


def max_divergence(rho, sigma) -> float:
    """D_inf = log lambda_max(sigma^(-1/2) rho sigma^(-1/2)) on the support
    of sigma; +inf when rho is not dominated."""
    r, s = asmatrix(rho), asmatrix(sigma)
    if not dominates(s, r):
        return INF
    u, w = _support_basis(s)
    r_sub = u.conj().T @ r @ u
    s_inv_half = np.diag(w**-0.5).astype(complex)
    m = linalg.symmetrize(s_inv_half @ r_sub @ s_inv_half)
    wm, _ = linalg.eig_hermitian(m)
    return float(np.log(np.max(wm)))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity tr|sqrt(rho) sqrt(sigma)| (square-root convention)."""
    r, s = asmatrix(rho), asmatrix(sigma)
    root = linalg.matsqrt(r)
    inner = linalg.symmetrize(root @ s @ root)
    w, _ = linalg.eig_hermitian(inner)
    w = np.maximum(w, 0.0)
    return float(np.sum(np.sqrt(w)))
