"""Brute-force measurement search: Bloch-sphere grids for qubits, Givens
hill climbing for d <= 4, and random POVM sampling.

These routines are deliberately independent of the variational solvers so
the two can cross-check each other.  Values are always reported in the
D-sense (so "best" means largest divergence for every order)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergences import (
    INF,
    ClassicalPair,
    Measurement,
    check_order,
    measured_value,
    renyi_classical,
)
from .errors import ShapeError
from .states import _rng, asmatrix, random_unitary

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MeasurementSearchResult:
    best: Measurement
    value: float
    trials: int
    method: str


def _classical_d(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    p = np.maximum(p, 0.0)
    return renyi_classical(ClassicalPair.of(p / p.sum(), np.maximum(q, 0.0)), alpha)


def _qubit_basis(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    e = np.exp(1j * phi)
    return np.array([[c, s], [e * s, -e * c]], dtype=complex)


def _grid_objective(rho, sigma, alpha):
    """D_alpha as a vectorized function of Bloch angles."""
    r, s = asmatrix(rho), asmatrix(sigma)

    def d_of(theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        c, sn = np.cos(theta / 2.0), np.sin(theta / 2.0)
        # p1 = <v|rho|v> for v = (c, e^{i phi} s)
        p1 = (
            np.real(r[0, 0]) * c**2
            + np.real(r[1, 1]) * sn**2
            + 2.0 * np.real(r[0, 1] * np.exp(1j * phi)) * c * sn
        )
        q1 = (
            np.real(s[0, 0]) * c**2
            + np.real(s[1, 1]) * sn**2
            + 2.0 * np.real(s[0, 1] * np.exp(1j * phi)) * c * sn
        )
        tr_r = float(np.real(np.trace(r)))
        tr_s = float(np.real(np.trace(s)))
        p = np.stack([p1, tr_r - p1], axis=-1)
        q = np.stack([q1, tr_s - q1], axis=-1)
        return _d_array(p, q, alpha)

    return d_of


def _d_array(p: np.ndarray, q: np.ndarray, alpha: float) -> np.ndarray:
    """Vectorized classical D_alpha along the last axis; clipping at 1e-14."""
    eps = 1e-14
    p = np.clip(p, 0.0, None)
    q = np.clip(q, 0.0, None)
    p = p / np.sum(p, axis=-1, keepdims=True)
    bad_q = (p > eps) & (q <= eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        if alpha == 1.0:
            terms = np.where(p > eps, p * (np.log(np.maximum(p, eps)) - np.log(np.maximum(q, eps))), 0.0)
            out = np.sum(terms, axis=-1)
            return np.where(np.any(bad_q, axis=-1), INF, out)
        if alpha == INF:
            ratio = np.where(p > eps, np.log(np.maximum(p, eps)) - np.log(np.maximum(q, eps)), -INF)
            out = np.max(ratio, axis=-1)
            return np.where(np.any(bad_q, axis=-1), INF, out)
        mask = (p > eps) & (q > eps)
        terms = np.where(mask, np.maximum(p, eps) ** alpha * np.maximum(q, eps) ** (1.0 - alpha), 0.0)
        qsum = np.sum(terms, axis=-1)
        if alpha > 1.0:
            out = np.log(np.maximum(qsum, 1e-300)) / (alpha - 1.0)
            return np.where(np.any(bad_q, axis=-1), INF, out)
        return np.where(qsum <= 0, INF, np.log(np.maximum(qsum, 1e-300)) / (alpha - 1.0))


def _golden_1d(fun, lo, hi, iters=60):
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fun(x2)
    return (a + b) / 2.0, fun((a + b) / 2.0)


def projective_grid_qubit(
    rho, sigma, alpha: float = 1.0, n_theta: int = 256, n_phi: int = 256
) -> MeasurementSearchResult:
    """Exhaustive Bloch-angle grid followed by coordinate golden-section
    polish.  Maximizes D_alpha over rank-1 projective qubit bases."""
    alpha = check_order(alpha)
    if asmatrix(rho).shape[0] != 2:
        raise ShapeError("grid search is qubit-only")
    if n_theta < 64 or n_phi < 64:
        raise ShapeError("grid sizes must be at least 64")
    d_of = _grid_objective(rho, sigma, alpha)
    thetas = np.linspace(0.0, math.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    vals = d_of(tt, pp)
    idx = np.unravel_index(np.argmax(vals), vals.shape)
    theta, phi = float(tt[idx]), float(pp[idx])
    # local polish: alternate golden-section in each angle
    for _ in range(4):
        theta, _ = _golden_1d(lambda t: -d_of(t, phi), max(0.0, theta - 0.05), min(math.pi, theta + 0.05))
        phi, _ = _golden_1d(lambda f: -d_of(theta, f), phi - 0.05, phi + 0.05)
    value = float(d_of(theta, phi))
    best = Measurement.projective(_qubit_basis(theta, phi))
    value_check = measured_value(rho, sigma, best, alpha)
    return MeasurementSearchResult(
        best=best, value=value_check, trials=n_theta * n_phi, method="Grid2D"
    )


def _givens(d: int, i: int, j: int, t: float, phi: float) -> np.ndarray:
    g = np.eye(d, dtype=complex)
    g[i, i] = math.cos(t)
    g[j, j] = math.cos(t)
    g[i, j] = -np.exp(-1j * phi) * math.sin(t)
    g[j, i] = np.exp(1j * phi) * math.sin(t)
    return g


def projective_multistart(
    rho, sigma, alpha: float = 1.0, restarts: int = 16, seed=0
) -> MeasurementSearchResult:
    """Random-start Givens-rotation hill climbing over projective bases,
    d <= 4.  Heuristic; documented as such."""
    alpha = check_order(alpha)
    r, s = asmatrix(rho), asmatrix(sigma)
    d = r.shape[0]
    if d > 4:
        raise ShapeError("multistart search supports d <= 4 only")
    rng = _rng(seed)

    def value_of(u):
        p = np.real(np.einsum("ji,jk,ki->i", u.conj(), r, u))
        q = np.real(np.einsum("ji,jk,ki->i", u.conj(), s, u))
        return float(_d_array(p, q, alpha))

    import numpy.linalg as la

    _, sig_basis = np.linalg.eigh(s)
    best_u, best_v = None, -INF
    trials = 0
    for k in range(restarts):
        u = sig_basis if k == 0 else random_unitary(d, rng)
        cur = value_of(u)
        for _ in range(40):
            improved = False
            for i in range(d):
                for j in range(i + 1, d):
                    def f_t(t, phi=0.0, i=i, j=j, u=u):
                        return -value_of(u @ _givens(d, i, j, t, phi))
                    phi_best = 0.0
                    for _ in range(2):
                        t_best, _ = _golden_1d(lambda t: f_t(t, phi_best), -math.pi / 4, math.pi / 4, iters=40)
                        phi_best, _ = _golden_1d(lambda f: f_t(t_best, f), -math.pi, math.pi, iters=40)
                    cand = u @ _givens(d, i, j, t_best, phi_best)
                    v = value_of(cand)
                    trials += 1
                    if v > cur + 1e-13:
                        u, cur, improved = cand, v, True
            if not improved:
                break
        if cur > best_v:
            best_u, best_v = u, cur
    # re-orthonormalize against drift before constructing the measurement
    q, _ = la.qr(best_u)
    best = Measurement.projective(q)
    return MeasurementSearchResult(
        best=best,
        value=measured_value(rho, sigma, best, alpha),
        trials=trials,
        method="MultiStartRefine",
    )


def sample_povms(d: int, n_outcomes: int, trials: int, rng) -> np.ndarray:
    """Batch of random POVMs via symmetrized Wishart elements, shape
    (trials, n_outcomes, d, d)."""
    rng = _rng(rng)
    g = (
        rng.standard_normal((trials, n_outcomes, d, d))
        + 1j * rng.standard_normal((trials, n_outcomes, d, d))
    ) / math.sqrt(2.0)
    w = g @ np.conj(np.swapaxes(g, -1, -2))
    total = w.sum(axis=1)
    ew, ev = np.linalg.eigh(total)
    inv_root = (ev * (ew[..., None, :] ** -0.5)) @ np.conj(np.swapaxes(ev, -1, -2))
    return np.einsum("tab,tkbc,tcd->tkad", inv_root, w, inv_root)


def povm_audit(rho, sigma, alphas, n_outcomes: int = 4, trials: int = 1000, seed=0) -> dict:
    """Best D_alpha over a batch of sampled POVMs, for several orders at
    once (the probability vectors are shared across orders).  Returns
    {alpha: (best_value, best_index)}."""
    r, s = asmatrix(rho), asmatrix(sigma)
    d = r.shape[0]
    if n_outcomes > 2 * d * d:
        raise ShapeError("n_outcomes exceeds 2 d^2")
    povms = sample_povms(d, n_outcomes, trials, seed)
    p = np.real(np.einsum("tkab,ba->tk", povms, r))
    q = np.real(np.einsum("tkab,ba->tk", povms, s))
    out = {}
    for alpha in alphas:
        vals = _d_array(p, q, check_order(alpha))
        i = int(np.argmax(vals))
        out[alpha] = (float(vals[i]), i)
    return out


def povm_sample(
    rho, sigma, alpha: float = 1.0, n_outcomes: int = 4, trials: int = 1000, seed=0
) -> MeasurementSearchResult:
    """Best POVM found by random sampling (D-sense maximum)."""
    audit = povm_audit(rho, sigma, [alpha], n_outcomes, trials, seed)
    _, idx = audit[alpha]
    povms = sample_povms(asmatrix(rho).shape[0], n_outcomes, trials, seed)
    best = Measurement.povm(list(povms[idx]))
    return MeasurementSearchResult(
        best=best,
        value=measured_value(rho, sigma, best, alpha),
        trials=trials,
        method="PovmSample",
    )
