"""Quantum state and channel model: validated operator types, random
ensembles, purification and Choi-state application."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import FeasibilityError, ShapeError

SUPPORT_EIG_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-12


def asmatrix(x) -> np.ndarray:
    """Coerce an ndarray or wrapped operator to a complex square ndarray."""
    if isinstance(x, (HermitianOperator, DensityOperator, PsdOperator)):
        return x.matrix
    return linalg.check_square(x)


class HermitianOperator:
    """A Hermitian matrix with its spectral decomposition cached at
    construction.  Immutable; safe to share between threads."""

    __slots__ = ("matrix", "eigenvalues", "eigenvectors")

    def __init__(self, matrix: np.ndarray):
        matrix = linalg.check_square(matrix)
        scale = max(1.0, float(np.max(np.abs(matrix))))
        if np.max(np.abs(matrix - matrix.conj().T)) > 1e-12 * scale:
            raise FeasibilityError("matrix is not Hermitian to 1e-12")
        m = linalg.symmetrize(matrix)
        w, u = linalg.eig_hermitian(m)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", u)
        self.matrix.setflags(write=False)

    def __setattr__(self, *_):
        raise AttributeError("HermitianOperator is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def matfun(self, f: linalg.SpectralFunction) -> np.ndarray:
        w, u = self.eigenvalues, self.eigenvectors
        return linalg.symmetrize((u * f(w)) @ u.conj().T)


def support_projector(matrix: np.ndarray, rel_tol: float = SUPPORT_EIG_TOL):
    """Orthogonal projector onto the span of eigenvectors with eigenvalue
    above ``rel_tol`` times the largest one.  Returns (projector, rank)."""
    w, u = linalg.eig_hermitian(matrix)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    keep = w > rel_tol * scale
    us = u[:, keep]
    return us @ us.conj().T, int(np.count_nonzero(keep))


class DensityOperator:
    """Trace-one PSD operator; tiny negative eigenvalues are clipped and the
    trace renormalized."""

    __slots__ = ("op", "support_rank", "support_projector")

    def __init__(self, matrix: np.ndarray):
        matrix = asmatrix(matrix)
        tr = float(np.real(np.trace(matrix)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise FeasibilityError(f"trace {tr} deviates from 1 beyond 1e-10")
        w, u = linalg.eig_hermitian(matrix)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.min(w) < -PSD_TOL * scale:
            raise FeasibilityError(
                f"matrix not PSD: min eigenvalue {np.min(w)}"
            )
        w = np.maximum(w, 0.0)
        w = w / np.sum(w)
        m = linalg.symmetrize((u * w) @ u.conj().T)
        object.__setattr__(self, "op", HermitianOperator(m))
        proj, rank = support_projector(m)
        object.__setattr__(self, "support_projector", proj)
        object.__setattr__(self, "support_rank", rank)

    def __setattr__(self, *_):
        raise AttributeError("DensityOperator is immutable")

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim


class PsdOperator:
    """Nonzero positive semidefinite operator with support metadata."""

    __slots__ = ("op", "support_rank", "support_projector")

    def __init__(self, matrix: np.ndarray):
        matrix = asmatrix(matrix)
        w, u = linalg.eig_hermitian(matrix)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.min(w) < -PSD_TOL * scale:
            raise FeasibilityError(
                f"matrix not PSD: min eigenvalue {np.min(w)}"
            )
        if np.real(np.trace(matrix)) <= 1e-12:
            raise FeasibilityError("PSD operator is numerically zero")
        w = np.maximum(w, 0.0)
        m = linalg.symmetrize((u * w) @ u.conj().T)
        object.__setattr__(self, "op", HermitianOperator(m))
        proj, rank = support_projector(m)
        object.__setattr__(self, "support_projector", proj)
        object.__setattr__(self, "support_rank", rank)

    def __setattr__(self, *_):
        raise AttributeError("PsdOperator is immutable")

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim


@dataclass(frozen=True)
class MultipartiteLabel:
    """Ordered subsystem names with their dimensions."""

    names: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.dims):
            raise ShapeError("names and dims length mismatch")
        if len(set(self.names)) != len(self.names):
            raise ShapeError("duplicate subsystem names")

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def positions(self, names: Sequence[str]) -> list[int]:
        return [self.index(n) for n in names]


CHOI_FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class ChoiState:
    """Unnormalized Choi-Jamiolkowski operator tau on A x D x F of a recovery
    map, with the marginal constraint tr_D[tau] = Pi (projector onto the
    support of sigma_AF).  The feasibility residual is recorded, not silently
    accepted."""

    tau: np.ndarray
    labels: MultipartiteLabel
    marginal_constraint: np.ndarray
    feasibility_residual: float = field(init=False)

    def __post_init__(self):
        tau = linalg.check_square(np.asarray(self.tau, dtype=complex))
        if tau.shape[0] != self.labels.total_dim:
            raise ShapeError("tau dimension does not match labels")
        w, _ = linalg.eig_hermitian(tau)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.min(w) < -1e-9 * scale:
            raise FeasibilityError(f"tau not PSD: min eigenvalue {np.min(w)}")
        d_pos = self.labels.index("D")
        marg = linalg.partial_trace(tau, list(self.labels.dims), d_pos)
        residual = float(
            np.linalg.norm(marg - np.asarray(self.marginal_constraint))
        )
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "feasibility_residual", residual)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.labels.dims


# ---------------------------------------------------------------------------
# random ensembles
# ---------------------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(d: int, k: int, rng) -> np.ndarray:
    rng = _rng(rng)
    return (rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))) / math.sqrt(2)


def random_density(d: int, rank: int | None = None, seed=0) -> DensityOperator:
    """G G† / tr[G G†] for a d x rank standard complex Gaussian G."""
    rank = d if rank is None else rank
    if not 1 <= rank <= d:
        raise ShapeError(f"rank {rank} out of range for dimension {d}")
    g = ginibre(d, rank, seed)
    m = g @ g.conj().T
    return DensityOperator(m / np.real(np.trace(m)))


def random_unitary(d: int, seed=0) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase fixing."""
    g = ginibre(d, d, seed)
    q, r = np.linalg.qr(g)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_hermitian(d: int, seed=0, scale: float = 1.0) -> np.ndarray:
    g = ginibre(d, d, seed)
    return linalg.symmetrize(g) * scale


# ---------------------------------------------------------------------------
# purification and Choi application
# ---------------------------------------------------------------------------


def purify(sigma, rel_tol: float = SUPPORT_EIG_TOL) -> np.ndarray:
    """Purification vector on (system x F) with dim F = support rank, built
    from the ascending eigenbasis of sigma."""
    m = asmatrix(sigma)
    w, u = linalg.eig_hermitian(m)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    keep = np.nonzero(w > rel_tol * scale)[0]
    r = len(keep)
    d = m.shape[0]
    vec = np.zeros(d * r, dtype=complex)
    for f_idx, i in enumerate(keep):
        amp = math.sqrt(float(w[i]))
        vec += amp * np.kron(u[:, i], _basis(r, f_idx))
    return vec


def _basis(d: int, i: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[i] = 1.0
    return e


def apply_choi(tau: ChoiState, sigma_af) -> np.ndarray:
    """Recovered operator tr_F[sqrt(sigma_AF) tau sqrt(sigma_AF)] on A x D."""
    if tau.feasibility_residual > CHOI_FEASIBILITY_TOL:
        raise FeasibilityError(
            f"Choi state infeasible: marginal residual "
            f"{tau.feasibility_residual:.3e}"
        )
    return _apply_choi_raw(tau.tau, asmatrix(sigma_af), tau.labels.dims)


def _apply_choi_raw(
    tau: np.ndarray, sigma_af: np.ndarray, dims: Sequence[int]
) -> np.ndarray:
    """Same as apply_choi but on raw arrays; dims = (dA, dD, dF)."""
    d_a, d_d, d_f = dims
    root = linalg.matsqrt(sigma_af)
    e = linalg.embed(root, list(dims), [0, 2])
    return linalg.partial_trace(e @ tau @ e, list(dims), 2)


def choi_from_kraus(
    kraus: Sequence[np.ndarray], sigma_ae, dims_ae: tuple[int, int]
) -> ChoiState:
    """Choi state (in the purification-anchored convention used here) of the
    channel E -> D given by Kraus operators, relative to sigma_AE."""
    d_a, d_e = dims_ae
    sigma_ae = asmatrix(sigma_ae)
    if sigma_ae.shape[0] != d_a * d_e:
        raise ShapeError("sigma_AE dimension mismatch")
    d_d = kraus[0].shape[0]
    for k in kraus:
        if k.shape != (d_d, d_e):
            raise ShapeError("Kraus operators must share shape (d_D, d_E)")
    vec = purify(sigma_ae)  # on A x E x F
    d_f = vec.size // (d_a * d_e)
    # Schmidt decomposition across AF : E
    psi = vec.reshape(d_a, d_e, d_f).transpose(0, 2, 1).reshape(d_a * d_f, d_e)
    uu, ss, vvh = np.linalg.svd(psi, full_matrices=False)
    keep = ss > 1e-12 * max(ss[0], 1e-300)
    uu, vvh = uu[:, keep], vvh[keep, :]
    # tau_{AF,D} = sum_{mn} |u_m><u_n| (x) Gamma(|v_m><v_n|)
    channel_blocks = np.zeros((uu.shape[1], uu.shape[1], d_d, d_d), dtype=complex)
    for m in range(uu.shape[1]):
        for n in range(uu.shape[1]):
            x = np.outer(vvh[m], vvh[n].conj())
            channel_blocks[m, n] = sum(k @ x @ k.conj().T for k in kraus)
    tau_af_d = np.einsum(
        "am,bn,mnde->adbe", uu, uu.conj(), channel_blocks
    ).reshape(d_a * d_f * d_d, d_a * d_f * d_d)
    # current ordering is (A, F, D); permute to (A, D, F)
    tau = linalg.permute_systems(tau_af_d, [d_a, d_f, d_d], [0, 2, 1])
    pi = uu @ uu.conj().T  # projector onto support of sigma_AF, on A x F
    labels = MultipartiteLabel(("A", "D", "F"), (d_a, d_d, d_f))
    return ChoiState(tau=tau, labels=labels, marginal_constraint=pi)


def sigma_af_of(sigma_ae, dims_ae: tuple[int, int]) -> np.ndarray:
    """Marginal on A x F of the canonical purification of sigma_AE."""
    d_a, d_e = dims_ae
    vec = purify(asmatrix(sigma_ae))
    d_f = vec.size // (d_a * d_e)
    rho_full = np.outer(vec, vec.conj())
    return linalg.partial_trace(rho_full, [d_a, d_e, d_f], 1)


def commutator_norm(rho, sigma) -> float:
    """Frobenius norm of [rho, sigma]."""
    a, b = asmatrix(rho), asmatrix(sigma)
    if a.shape != b.shape:
        raise ShapeError("commutator of mismatched shapes")
    return float(np.linalg.norm(a @ b - b @ a))


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------


def matrix_to_json(matrix: np.ndarray, dims: Sequence[int] | None = None) -> dict:
    matrix = linalg.check_square(matrix)
    if dims is None:
        dims = [matrix.shape[0]]
    return {
        "dims": list(int(d) for d in dims),
        "matrix": [
            [[float(z.real), float(z.imag)] for z in row] for row in matrix
        ],
    }


def matrix_from_json(obj: dict) -> tuple[np.ndarray, list[int]]:
    dims = [int(d) for d in obj["dims"]]
    rows = obj["matrix"]
    d = len(rows)
    out = np.empty((d, d), dtype=complex)
    for i, row in enumerate(rows):
        for j, (re, im) in enumerate(row):
            out[i, j] = complex(re, im)
    if math.prod(dims) != d:
        raise ShapeError("dims do not match matrix size")
    return out, dims
