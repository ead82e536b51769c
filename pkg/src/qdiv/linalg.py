"""Dense Hermitian linear algebra: spectral decompositions, matrix functions,
Frechet derivatives and tensor/partial-trace calculus.

All routines work on plain complex ndarrays.  Matrices are assumed (and where
cheap, checked) to be Hermitian; results of spectral calculus are explicitly
re-symmetrized to keep roundoff from accumulating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ShapeError

HERMITICITY_TOL = 1e-12
DEGENERACY_REL_GAP = 1e-9


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (A + A†)/2."""
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a


def eig_hermitian(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spectral decomposition A = U diag(w) U† with a canonical eigenvector
    convention: eigenvalues ascending, each eigenvector's first significantly
    nonzero component made real positive, exact ties ordered lexicographically.
    """
    a = check_square(a)
    w, u = np.linalg.eigh(symmetrize(a))
    u = _canonical_phases(u)
    w, u = _order_ties(w, u)
    return w, u


def _canonical_phases(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    for k in range(u.shape[1]):
        col = u[:, k]
        idx = np.argmax(np.abs(col) > 1e-12)
        pivot = col[idx]
        if abs(pivot) > 0:
            u[:, k] = col * (pivot.conj() / abs(pivot))
    return u


def _order_ties(w: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # lexicographic order inside exactly-degenerate groups keeps the
    # decomposition deterministic for symbolic inputs such as identity blocks
    order = np.arange(len(w))
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] == w[i]:
            j += 1
        if j - i > 1:
            block = sorted(
                range(i, j),
                key=lambda k: tuple(np.round(np.ascontiguousarray(u[:, k]).view(float), 12)),
            )
            order[i:j] = block
        i = j
    return w[order], u[:, order]


# ---------------------------------------------------------------------------
# scalar spectral functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar map applied spectrally to Hermitian operators.

    ``domain`` is the half-open classification (lo, hi); ``closed_lo`` marks
    whether the lower endpoint is attainable.  Eigenvalues that fall outside
    by more than ``boundary_tol`` raise :class:`DomainError`; tiny negative
    roundoff is clipped to the boundary when it is closed.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    lo: float = -math.inf
    hi: float = math.inf
    closed_lo: bool = False
    boundary_tol: float = 1e-12

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(self._admit(np.asarray(x, dtype=float)))

    def dfn(self, x: np.ndarray) -> np.ndarray:
        return self.deriv(self._admit(np.asarray(x, dtype=float)))

    def _admit(self, x: np.ndarray) -> np.ndarray:
        if x.size == 0:
            return x
        scale = max(1.0, float(np.max(np.abs(x))))
        tol = self.boundary_tol * scale
        low = float(np.min(x))
        if math.isfinite(self.lo):
            if self.closed_lo:
                if low < self.lo - tol:
                    raise DomainError(
                        f"eigenvalue {low!r} outside domain of {self.name}"
                    )
                x = np.maximum(x, self.lo)
            elif low <= self.lo:
                raise DomainError(
                    f"eigenvalue {low!r} outside open domain of {self.name}"
                )
        if math.isfinite(self.hi) and float(np.max(x)) > self.hi + tol:
            raise DomainError(f"eigenvalue above domain of {self.name}")
        return x


LOG = SpectralFunction("log", np.log, lambda t: 1.0 / t, lo=0.0)
EXP = SpectralFunction("exp", np.exp, np.exp)
IDENTITY = SpectralFunction("identity", lambda t: t, lambda t: np.ones_like(t))


def power(p: float) -> SpectralFunction:
    """t -> t**p as a spectral function with the appropriate domain."""
    if p == 1.0:
        return IDENTITY
    if p >= 0 and float(p).is_integer():
        return SpectralFunction(
            f"power({p})", lambda t: t**p, lambda t: p * t ** (p - 1)
        )
    if p > 0:
        return SpectralFunction(
            f"power({p})",
            lambda t: np.power(t, p),
            lambda t: p * np.power(t, p - 1),
            lo=0.0,
            closed_lo=True,
        )
    return SpectralFunction(
        f"power({p})",
        lambda t: np.power(t, p),
        lambda t: p * np.power(t, p - 1),
        lo=0.0,
        closed_lo=False,
    )


def scaled_exp(c: float) -> SpectralFunction:
    """t -> exp(c t)."""
    return SpectralFunction(
        f"exp({c}t)", lambda t: np.exp(c * t), lambda t: c * np.exp(c * t)
    )


def matfun(a: np.ndarray, f: SpectralFunction) -> np.ndarray:
    """Apply ``f`` spectrally: U diag(f(w)) U†."""
    w, u = eig_hermitian(a)
    return symmetrize((u * f(w)) @ u.conj().T)


def matlog(a: np.ndarray) -> np.ndarray:
    return matfun(a, LOG)


def matexp(a: np.ndarray) -> np.ndarray:
    return matfun(a, EXP)


def matsqrt(a: np.ndarray) -> np.ndarray:
    return matfun(a, power(0.5))


def matpow(a: np.ndarray, p: float) -> np.ndarray:
    return matfun(a, power(p))


def _divided_difference(w: np.ndarray, f: SpectralFunction) -> np.ndarray:
    """First divided-difference (Daleckii-Krein) kernel of f at spectrum w."""
    fw = f(w)
    dw = w[:, None] - w[None, :]
    scale = max(np.max(np.abs(w)), 1e-300)
    near = np.abs(dw) < DEGENERACY_REL_GAP * scale
    num = fw[:, None] - fw[None, :]
    kernel = np.where(near, 1.0, num) / np.where(near, 1.0, dw)
    mid = 0.5 * (w[:, None] + w[None, :])
    kernel = np.where(near, f.dfn(mid.ravel()).reshape(mid.shape), kernel)
    return kernel


def frechet_matfun(
    a: np.ndarray, f: SpectralFunction, direction: np.ndarray
) -> np.ndarray:
    """Frechet derivative Df(A)[direction] via the divided-difference kernel
    in A's eigenbasis.  The kernel is symmetric, so this map is self-adjoint
    with respect to the Hilbert-Schmidt inner product.
    """
    w, u = eig_hermitian(a)
    return frechet_apply(w, u, f, direction)


def frechet_apply(
    w: np.ndarray, u: np.ndarray, f: SpectralFunction, x: np.ndarray
) -> np.ndarray:
    """Df(A)[X] given the eigensystem (w, u) of A."""
    kernel = _divided_difference(w, f)
    xt = u.conj().T @ np.asarray(x, dtype=complex) @ u
    return symmetrize(u @ (kernel * xt) @ u.conj().T)


# ---------------------------------------------------------------------------
# tensor calculus
# ---------------------------------------------------------------------------


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product of one or more matrices."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(
    a: np.ndarray, dims: Sequence[int], traced: int | Sequence[int]
) -> np.ndarray:
    """Trace out the subsystems listed in ``traced`` (indices into ``dims``)."""
    a = check_square(a)
    dims = list(dims)
    if a.shape[0] != math.prod(dims):
        raise ShapeError(f"dims {dims} do not factor dimension {a.shape[0]}")
    if isinstance(traced, int):
        traced = [traced]
    traced = sorted(set(traced))
    n = len(dims)
    if any(t < 0 or t >= n for t in traced):
        raise ShapeError(f"traced index out of range for {n} subsystems")
    tensor = a.reshape(dims + dims)
    for offset, t in enumerate(traced):
        k = t - offset
        m = len(tensor.shape) // 2
        tensor = np.trace(tensor, axis1=k, axis2=k + m)
    keep = math.prod(d for i, d in enumerate(dims) if i not in traced)
    return tensor.reshape(keep, keep)


def permute_systems(
    a: np.ndarray, dims: Sequence[int], order: Sequence[int]
) -> np.ndarray:
    """Reorder tensor factors; ``order[k]`` is the old index of the new k-th
    subsystem."""
    a = check_square(a)
    dims = list(dims)
    n = len(dims)
    if sorted(order) != list(range(n)):
        raise ShapeError(f"order {order} is not a permutation of {n} systems")
    tensor = a.reshape(dims + dims)
    perm = list(order) + [n + o for o in order]
    new_dims = [dims[o] for o in order]
    d = math.prod(new_dims)
    return tensor.transpose(perm).reshape(d, d)


def embed(
    x: np.ndarray, dims: Sequence[int], positions: Sequence[int]
) -> np.ndarray:
    """Lift an operator acting on the subsystems ``positions`` (factors of x
    ordered as listed) into the full space ``dims``, identity elsewhere."""
    dims = list(dims)
    positions = list(positions)
    x = check_square(x)
    sub = math.prod(dims[p] for p in positions)
    if x.shape[0] != sub:
        raise ShapeError(
            f"operator dim {x.shape[0]} does not match subsystems {positions}"
        )
    rest = [i for i in range(len(dims)) if i not in positions]
    full = kron(x, np.eye(math.prod([dims[i] for i in rest] or [1])))
    cur = positions + rest
    order = [cur.index(k) for k in range(len(dims))]
    return permute_systems(full, [dims[i] for i in cur], order)


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """tr[A B] for Hermitian A, B (real by Hermiticity)."""
    a = check_square(a)
    b = check_square(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.real(np.sum(a * b.T)))


# ---------------------------------------------------------------------------
# Hermitian <-> real vector isometry (optimizer parametrization)
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def herm_to_vec(h: np.ndarray) -> np.ndarray:
    h = check_square(h)
    d = h.shape[0]
    iu = np.triu_indices(d, k=1)
    return np.concatenate(
        [np.real(np.diag(h)), _SQRT2 * np.real(h[iu]), _SQRT2 * np.imag(h[iu])]
    )


def vec_to_herm(v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n_off = d * (d - 1) // 2
    h = np.zeros((d, d), dtype=complex)
    h[np.diag_indices(d)] = v[:d]
    iu = np.triu_indices(d, k=1)
    off = (v[d : d + n_off] + 1j * v[d + n_off :]) / _SQRT2
    h[iu] = off
    h += np.triu(h, k=1).conj().T
    return h


# ---------------------------------------------------------------------------
# quasi-Newton ascent/descent with a monotone Armijo line search
# ---------------------------------------------------------------------------


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def minimize_bfgs(
    fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    gtol: float = 1e-9,
    maxiter: int = 10000,
    armijo_c: float = 1e-4,
    record_trace: bool = False,
    stall_gtol: float = 1e-7,
) -> OptimizeResult:
    """Minimize a smooth function with BFGS updates and Armijo backtracking.

    Every accepted iterate strictly decreases the objective, so for the
    concave maximization problems (run through negation) each visited point
    is a valid bound on the final value.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    n = x.size
    hinv = np.eye(n)
    trace = [f] if record_trace else []
    it = 0
    converged = False
    stalls = 0
    while it < maxiter:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= gtol:
            converged = True
            break
        if stalls >= 5:
            # objective decreases are below roundoff; accept the point if the
            # gradient is small enough to certify stationarity
            converged = gnorm <= stall_gtol
            break
        p = -hinv @ g
        slope = float(g @ p)
        if slope >= 0:
            hinv = np.eye(n)
            p = -g
            slope = -gnorm**2
        t = 1.0
        accepted = False
        for _ in range(30):
            x_new = x + t * p
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + armijo_c * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = float(np.linalg.norm(g)) <= stall_gtol
            break
        # negligible accepted decreases mean the line search is fitting
        # noise in the objective, not descending: treat them like stalls
        # (step length alone is no signal; stiff exponentials legitimately
        # descend through tiny steps)
        if abs(f - f_new) <= 1e-11 * max(1.0, abs(f)):
            stalls += 1
        else:
            stalls = 0
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if it == 0:
                # scale the initial inverse Hessian to the first curvature
                # estimate so the next trial step is well-sized
                hinv = (sy / float(y @ y)) * np.eye(n)
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            hinv = v @ hinv @ v.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        if record_trace:
            trace.append(f)
        it += 1
    return OptimizeResult(
        x=x,
        value=f,
        grad_norm=float(np.linalg.norm(g)),
        iterations=it,
        converged=converged,
        trace=trace,
    )
