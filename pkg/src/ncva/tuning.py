"""Gain/delay tuning that places resonant-substructure roots at ``+-j omega``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .substructure import RsDecomposition

POSITIVE = "positive"
NEGATIVE = "negative"
FAMILIES = (POSITIVE, NEGATIVE)

# |q| below this fraction of the passive RS matrix scale counts as exact resonance
DEGENERATE_RTOL = 1e-10


class PassiveResonanceError(ArithmeticError):
    """The passive resonant substructure is singular at ``j omega``."""


def parse_family(family: str) -> str:
    key = str(family).strip().lower()
    if key in ("positive", "pos", "+", "plus"):
        return POSITIVE
    if key in ("negative", "neg", "-", "minus"):
        return NEGATIVE
    raise ValueError(f"unknown gain family {family!r} (use 'positive' or 'negative')")


@dataclass(frozen=True)
class DrTuning:
    g: float
    tau: float
    family: str
    k: int
    omega: float
    residual: float = 0.0
    degenerate: bool = False
    requested_k: int | None = None

    @property
    def omega_hz(self) -> float:
        return self.omega / (2.0 * math.pi)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["omega_hz"] = self.omega_hz
        out["tau"] = None if math.isnan(self.tau) else self.tau
        return out


def _passive_matrix(rs: RsDecomposition, omega: float) -> np.ndarray:
    s = 1j * omega
    return rs.M_R * s**2 + rs.C_R * s + rs.K_R


def resonance_ratio(rs: RsDecomposition, omega: float) -> complex:
    """``q(j omega) = 1 / (e_a^T A_passive(j omega)^{-1} b_u)``.

    ``g exp(-j omega tau) = q`` is the resonance condition.  Raises
    PassiveResonanceError when the passive substructure is (numerically)
    singular at ``j omega``.
    """
    A = _passive_matrix(rs, omega)
    scale = max(np.abs(A).max(), np.abs(rs.K_R).max() + omega * np.abs(rs.C_R).max()
                + omega**2 * np.abs(rs.M_R).max())
    try:
        y = np.linalg.solve(A, rs.b_u.astype(complex))
    except np.linalg.LinAlgError:
        raise PassiveResonanceError(f"passive RS resonance at omega={omega}") from None
    denom = rs.e_a @ y
    if denom == 0 or not np.isfinite(denom):
        raise PassiveResonanceError(f"passive RS resonance at omega={omega}")
    q = 1.0 / denom
    if abs(q) <= DEGENERATE_RTOL * scale:
        raise PassiveResonanceError(f"passive RS resonance at omega={omega} (|q|={abs(q):.3e})")
    return complex(q)


def tuning_residual(rs: RsDecomposition, omega: float, g: float, tau: float) -> float:
    """``|1 - g e_a^T A_passive(j omega)^{-1} b_u exp(-j omega tau)|``."""
    y = np.linalg.solve(_passive_matrix(rs, omega), rs.b_u.astype(complex))
    return float(abs(1.0 - g * (rs.e_a @ y) * np.exp(-1j * omega * tau)))


def _branch_offset(q: complex, family: str) -> float:
    # delay numerator before adding 2 k pi; angle in (-pi, pi]
    phase = math.atan2(q.imag, q.real)
    if phase == -math.pi:
        phase = math.pi
    return -phase if family == POSITIVE else math.pi - phase


def first_admissible_k(q: complex, family: str) -> int:
    off = _branch_offset(q, parse_family(family))
    return 0 if off >= 0 else int(math.ceil(-off / (2.0 * math.pi)))


def tune(rs: RsDecomposition, omega: float, family: str = NEGATIVE, k: int = 0) -> DrTuning:
    """Solve ``g exp(-j omega tau) = q(j omega)`` on branch ``(family, k)``.

    A branch with negative delay is replaced by the first nonnegative one of
    the same family; the requested index is kept in ``requested_k``.  An
    exactly resonant passive substructure yields ``g = 0`` with ``tau = nan``.
    """
    family = parse_family(family)
    if k < 0:
        raise ValueError("branch index k must be >= 0")
    if omega <= 0:
        raise ValueError("omega must be positive")
    try:
        q = resonance_ratio(rs, omega)
    except PassiveResonanceError:
        return DrTuning(0.0, math.nan, family, int(k), omega, 0.0, True)
    off = _branch_offset(q, family)
    requested = None
    k_used = int(k)
    if off + 2.0 * math.pi * k_used < 0:
        requested = k_used
        k_used = first_admissible_k(q, family)
    g = abs(q) if family == POSITIVE else -abs(q)
    tau = (off + 2.0 * math.pi * k_used) / omega
    res = tuning_residual(rs, omega, g, tau)
    return DrTuning(g, tau, family, k_used, omega, res, False, requested)


def enumerate_tunings(rs: RsDecomposition, omega: float, k_max: int = 1,
                      families=FAMILIES) -> list[DrTuning]:
    """First ``k_max + 1`` nonnegative-delay branches per family, sorted by delay."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    out = []
    for fam in families:
        fam = parse_family(fam)
        first = tune(rs, omega, fam, 0)
        if first.degenerate:
            out.append(first)
            continue
        for j in range(k_max + 1):
            out.append(tune(rs, omega, fam, first.k + j))
    return sorted(out, key=lambda t: (math.inf if math.isnan(t.tau) else t.tau, t.family))
