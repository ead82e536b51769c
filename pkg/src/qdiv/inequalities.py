"""Trace-inequality experiments: Golden-Thompson and Araki-Lieb-Thirring
gaps, order sweeps of the measured-vs-sandwiched gap, and a search for
data-processing violations of the measured Renyi divergence at small
orders, with re-validatable certificates."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .divergences import Measurement, measured_value, sandwiched_d, umegaki
from .errors import DomainError, ShapeError
from .solvers import (
    extract_optimal_measurement,
    measured_rel_entropy,
    measured_renyi_q,
)
from .states import (
    _rng,
    asmatrix,
    commutator_norm,
    random_density,
    random_hermitian,
)

SPECTRAL_CLIP = 300.0


@dataclass
class GapReport:
    """lhs - rhs = gap for a single trace inequality instance."""

    name: str
    lhs: float
    rhs: float
    gap: float
    commutator: float
    params: dict = field(default_factory=dict)


def _clip_spectrum(x: np.ndarray) -> np.ndarray:
    w, u = linalg.eig_hermitian(asmatrix(x))
    w = np.clip(w, -SPECTRAL_CLIP, SPECTRAL_CLIP)
    return linalg.symmetrize((u * w) @ u.conj().T)


def golden_thompson_gap(x, y) -> GapReport:
    """tr[e^X e^Y] - tr[e^(X+Y)] >= 0, with equality iff [X, Y] = 0.
    Spectra are clipped to |lambda| <= 300 to keep exponentials finite."""
    x = _clip_spectrum(x)
    y = _clip_spectrum(y)
    ex, ey = linalg.matexp(x), linalg.matexp(y)
    lhs = linalg.hs_inner(ex, ey)
    rhs = float(np.real(np.trace(linalg.matexp(x + y))))
    return GapReport(
        name="golden-thompson",
        lhs=lhs,
        rhs=rhs,
        gap=lhs - rhs,
        commutator=commutator_norm(x, y),
    )


def alt_gap(x, y, r: float) -> GapReport:
    """tr[Y^r X^r Y^r] - tr[(Y X Y)^r]: nonnegative for r >= 1 and
    nonpositive for r in (0, 1], for PSD X, Y."""
    x, y = asmatrix(x), asmatrix(y)
    if r <= 0:
        raise DomainError("exponent r must be positive")
    wx, _ = linalg.eig_hermitian(x)
    wy, _ = linalg.eig_hermitian(y)
    if np.min(wx) < -1e-12 or np.min(wy) < -1e-12:
        raise DomainError("X and Y must be PSD")
    xr = linalg.matpow(x, r)
    yr = linalg.matpow(y, r)
    lhs = float(np.real(np.trace(yr @ xr @ yr)))
    inner = linalg.symmetrize(y @ x @ y)
    wi, _ = linalg.eig_hermitian(inner)
    rhs = float(np.sum(np.maximum(wi, 0.0) ** r))
    return GapReport(
        name="araki-lieb-thirring",
        lhs=lhs,
        rhs=rhs,
        gap=lhs - rhs,
        commutator=commutator_norm(x, y),
        params={"r": r},
    )


# ---------------------------------------------------------------------------
# order sweeps
# ---------------------------------------------------------------------------

ALPHA_GUARD = 1e-3


def alpha_sweep(rho, sigma, grid=None) -> list[dict]:
    """Rows {alpha, d_alpha, d_alpha_measured, gap} with gap = sandwiched
    minus measured.  The grid must stay at least 1e-3 away from alpha = 1
    (where both reduce to the Umegaki / measured relative entropy pair)."""
    if grid is None:
        grid = [0.2, 0.3, 0.4, 0.5, 0.6, 0.75, 0.9, 1.1, 1.5, 2.0, 3.0, 5.0]
    rows = []
    for alpha in grid:
        alpha = float(alpha)
        if alpha != 1.0 and abs(alpha - 1.0) < ALPHA_GUARD:
            raise DomainError(f"sweep grid point {alpha} is inside the guard window around 1")
        if alpha == 1.0:
            d_meas = measured_rel_entropy(rho, sigma).value
            d_sand = umegaki(rho, sigma)
        else:
            d_meas = measured_renyi_q(rho, sigma, alpha).value
            d_sand = sandwiched_d(rho, sigma, alpha)
        rows.append(
            {
                "alpha": alpha,
                "d_alpha": d_sand,
                "d_alpha_measured": d_meas,
                "gap": d_sand - d_meas,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# data-processing violation certificates
# ---------------------------------------------------------------------------


def _hex_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [
        [
            [struct.pack(">d", float(v.real)).hex(), struct.pack(">d", float(v.imag)).hex()]
            for v in row
        ]
        for row in m
    ]


def _unhex_matrix(rows: list) -> np.ndarray:
    def f(h):
        return struct.unpack(">d", bytes.fromhex(h))[0]

    return np.array([[complex(f(re), f(im)) for re, im in row] for row in rows])


@dataclass
class ViolationCertificate:
    """A pair of states whose measured Renyi divergence exceeds the
    sandwiched one at the stated order, together with the witnessing
    measurement basis.  Matrices are serialized as big-endian hex doubles
    so re-validation is bit-exact."""

    alpha: float
    rho: np.ndarray
    sigma: np.ndarray
    witness_basis: np.ndarray
    measured_d: float
    sandwiched_d: float
    margin: float
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "rho": _hex_matrix(self.rho),
                "sigma": _hex_matrix(self.sigma),
                "witness_basis": _hex_matrix(self.witness_basis),
                "measured_d": self.measured_d,
                "sandwiched_d": self.sandwiched_d,
                "margin": self.margin,
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ViolationCertificate":
        d = json.loads(text)
        return cls(
            alpha=float(d["alpha"]),
            rho=_unhex_matrix(d["rho"]),
            sigma=_unhex_matrix(d["sigma"]),
            witness_basis=_unhex_matrix(d["witness_basis"]),
            measured_d=float(d["measured_d"]),
            sandwiched_d=float(d["sandwiched_d"]),
            margin=float(d["margin"]),
            seed=int(d["seed"]),
        )

    def revalidate(self, tol: float = 1e-8) -> dict:
        """Recompute everything from the serialized matrices alone.  Raises
        DomainError if any stored value or the violation itself fails to
        reproduce."""
        sand = sandwiched_d(self.rho, self.sigma, self.alpha)
        report = measured_renyi_q(self.rho, self.sigma, self.alpha)
        witness = Measurement.projective(self.witness_basis)
        at_witness = measured_value(self.rho, self.sigma, witness, self.alpha)
        if abs(sand - self.sandwiched_d) > tol:
            raise DomainError(
                f"stored sandwiched value {self.sandwiched_d} not reproduced ({sand})"
            )
        if abs(report.value - self.measured_d) > tol:
            raise DomainError(
                f"stored measured value {self.measured_d} not reproduced ({report.value})"
            )
        if abs((self.measured_d - self.sandwiched_d) - self.margin) > tol:
            raise DomainError("stored margin inconsistent with stored values")
        if not at_witness >= self.sandwiched_d + self.margin / 2.0:
            raise DomainError("witness measurement does not certify the violation")
        return {
            "sandwiched_d": sand,
            "measured_d": report.value,
            "witness_value": at_witness,
            "margin": report.value - sand,
        }


def dp_violation_search(
    alpha: float,
    trials: int = 100,
    seed: int = 0,
    dim: int = 2,
    margin_threshold: float = 1e-4,
    commutator_floor: float = 0.1,
) -> list[ViolationCertificate]:
    """Sample full-rank non-commuting state pairs and keep those where the
    measured Renyi divergence of order alpha < 1/2 strictly exceeds the
    sandwiched one by more than margin_threshold."""
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise DomainError("violations only occur for orders in (0, 1/2)")
    rng = _rng(seed)
    out = []
    attempts = 0
    while attempts < trials:
        pair_seed = int(rng.integers(0, 2**31 - 1))
        pair_rng = _rng(pair_seed)
        rho = random_density(dim, seed=pair_rng)
        sigma = random_density(dim, seed=pair_rng)
        if commutator_norm(rho, sigma) <= commutator_floor:
            continue
        attempts += 1
        report = measured_renyi_q(rho, sigma, alpha)
        sand = sandwiched_d(rho, sigma, alpha)
        margin = report.value - sand
        if margin <= margin_threshold:
            continue
        witness = extract_optimal_measurement(report)
        out.append(
            ViolationCertificate(
                alpha=alpha,
                rho=rho.matrix,
                sigma=sigma.matrix,
                witness_basis=witness.basis,
                measured_d=report.value,
                sandwiched_d=sand,
                margin=margin,
                seed=pair_seed,
            )
        )
    return out


def trace_inequality_trials(
    n_trials: int = 10000, dim: int = 2, seed: int = 0, scale: float = 1.0
) -> dict:
    """Monte-Carlo audit of the Golden-Thompson and Araki-Lieb-Thirring
    directions.  Returns min gaps and violation counts beyond -1e-10."""
    rng = _rng(seed)
    gt_min = math.inf
    alt_hi_min = math.inf  # r >= 1: gap should be >= 0
    alt_lo_max = -math.inf  # r <= 1: gap should be <= 0
    violations = 0
    for _ in range(n_trials):
        x = random_hermitian(dim, rng) * scale
        y = random_hermitian(dim, rng) * scale
        g = golden_thompson_gap(x, y)
        gt_min = min(gt_min, g.gap)
        if g.gap < -1e-10:
            violations += 1
        px = linalg.symmetrize(x @ x.conj().T) + 1e-3 * np.eye(dim)
        py = linalg.symmetrize(y @ y.conj().T) + 1e-3 * np.eye(dim)
        r_hi = float(rng.uniform(1.0, 3.0))
        r_lo = float(rng.uniform(0.2, 1.0))
        a_hi = alt_gap(px, py, r_hi)
        a_lo = alt_gap(px, py, r_lo)
        alt_hi_min = min(alt_hi_min, a_hi.gap)
        alt_lo_max = max(alt_lo_max, a_lo.gap)
        if a_hi.gap < -1e-10 or a_lo.gap > 1e-10:
            violations += 1
    return {
        "trials": n_trials,
        "gt_min_gap": gt_min,
        "alt_min_gap_r_ge_1": alt_hi_min,
        "alt_max_gap_r_le_1": alt_lo_max,
        "violations": violations,
    }
