"""
Second-order model of a mass-spring-damper chain carrying one active absorber.

Coordinates are ordered ``[x_a, x_1, ..., x_d]``: row 0 is always the
absorber and row ``i`` is chain mass ``m_i`` (1-based, so physical mass
numbers double as row indices).  Both chain ends are tied to a rigid frame
through ``k_1, c_1`` and ``k_{d+1}, c_{d+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class ModelError(ValueError):
    """Invalid physical description of the chain."""


class DeploymentError(ModelError):
    """Absorber/target/disturbance placement admits no resonant substructure."""


class Absorber(NamedTuple):
    m: float
    k: float
    c: float


def _as_tuple(values: Sequence[float], name: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name}: expected a list of numbers") from exc
    if not all(math.isfinite(v) for v in out):
        raise ModelError(f"{name}: non-finite entry")
    return out


def check_deployment(p: int, n: int, dist: int, d: int) -> None:
    """Raise DeploymentError unless ``1 <= p <= n <= dist <= d``."""
    if not 1 <= p <= d:
        raise DeploymentError(f"p={p}: absorber must sit on a chain mass 1..{d}")
    if not 1 <= n <= d:
        raise DeploymentError(f"n={n}: target must be a chain mass 1..{d}")
    if not 1 <= dist <= d:
        raise DeploymentError(f"dist={dist}: disturbance must act on a chain mass 1..{d}")
    if p > n:
        raise DeploymentError(
            f"p={p} > n={n}: the absorber must be deployed between the frame and "
            "the target (p <= n), otherwise no resonant substructure exists"
        )
    if n > dist:
        raise DeploymentError(
            f"n={n} > dist={dist}: the target must lie between the absorber and "
            "the disturbed mass (n <= dist)"
        )


@dataclass(frozen=True)
class ChainModel:
    """Physical description of ``d`` chained masses plus one absorber.

    ``stiffnesses`` and ``dampings`` have ``d + 1`` entries; the first and
    last connect the end masses to the frame.  ``dist`` defaults to ``d``.
    """

    masses: tuple[float, ...]
    stiffnesses: tuple[float, ...]
    dampings: tuple[float, ...]
    absorber: Absorber
    p: int = 1
    n: int = 1
    dist: int | None = None

    def __post_init__(self):
        masses = _as_tuple(self.masses, "masses")
        stiff = _as_tuple(self.stiffnesses, "stiffnesses")
        damp = _as_tuple(self.dampings, "dampings")
        try:
            absorber = Absorber(*(float(v) for v in self.absorber))
        except (TypeError, ValueError) as exc:
            raise ModelError("absorber: expected (m, k, c)") from exc
        d = len(masses)
        if d < 1:
            raise ModelError("masses: at least one chain mass is required")
        if len(stiff) != d + 1:
            raise ModelError(f"stiffnesses: expected {d + 1} entries (d + 1), got {len(stiff)}")
        if len(damp) != d + 1:
            raise ModelError(f"dampings: expected {d + 1} entries (d + 1), got {len(damp)}")
        if any(m <= 0 for m in masses):
            raise ModelError("masses: every mass must be strictly positive")
        if any(k < 0 for k in stiff):
            raise ModelError("stiffnesses: entries must be nonnegative")
        if any(c < 0 for c in damp):
            raise ModelError("dampings: entries must be nonnegative")
        if absorber.m <= 0:
            raise ModelError("absorber.m: must be strictly positive")
        if absorber.k < 0 or absorber.c < 0:
            raise ModelError("absorber.k, absorber.c: must be nonnegative")
        if absorber.k == 0 and absorber.c == 0:
            raise ModelError("absorber: k or c must be positive (absorber must be coupled)")
        if stiff[0] == 0 and damp[0] == 0:
            raise ModelError("k_1, c_1: free left end is not supported (frame connection required)")
        if stiff[-1] == 0 and damp[-1] == 0:
            raise ModelError("k_{d+1}, c_{d+1}: free right end is not supported (frame connection required)")
        dist = d if self.dist is None else int(self.dist)
        check_deployment(int(self.p), int(self.n), dist, d)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "stiffnesses", stiff)
        object.__setattr__(self, "dampings", damp)
        object.__setattr__(self, "absorber", absorber)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dist", dist)

    @property
    def d(self) -> int:
        return len(self.masses)

    def with_target(self, n: int) -> "ChainModel":
        return ChainModel(self.masses, self.stiffnesses, self.dampings,
                          self.absorber, self.p, n, self.dist)

    def to_dict(self) -> dict:
        return {
            "masses": list(self.masses),
            "stiffnesses": list(self.stiffnesses),
            "dampings": list(self.dampings),
            "absorber": dict(self.absorber._asdict()),
            "p": self.p,
            "n": self.n,
            "dist": self.dist,
        }


@dataclass(frozen=True)
class SecondOrderSystem:
    """Matrices of ``M x'' + C x' + K x = B_f f + B_u u``."""

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    B_f: np.ndarray
    B_u: np.ndarray
    p: int
    n: int
    dist: int
    model: ChainModel | None = field(default=None, compare=False, repr=False)

    @property
    def d(self) -> int:
        return self.M.shape[0] - 1

    @property
    def E_a(self) -> np.ndarray:
        return self.selector(0)

    def selector(self, i: int) -> np.ndarray:
        """Unit vector picking coordinate ``i`` (0 = absorber, i = mass m_i)."""
        if not 0 <= i <= self.d:
            raise IndexError(f"coordinate {i} outside 0..{self.d}")
        e = np.zeros(self.d + 1)
        e[i] = 1.0
        return e


def build_system(model: ChainModel) -> SecondOrderSystem:
    """Assemble M, C, K and the input vectors by parallel-spring rules."""
    d = model.d
    ma, ka, ca = model.absorber
    M = np.diag([ma, *model.masses])
    K = _chain_matrix(model.stiffnesses, ka, model.p)
    C = _chain_matrix(model.dampings, ca, model.p)
    B_f = np.zeros(d + 1)
    B_f[model.dist] = 1.0
    B_u = np.zeros(d + 1)
    B_u[0] = 1.0
    B_u[model.p] = -1.0
    for arr in (M, C, K, B_f, B_u):
        arr.setflags(write=False)
    return SecondOrderSystem(M, C, K, B_f, B_u, model.p, model.n, model.dist, model)


def _chain_matrix(links: Sequence[float], absorber_link: float, p: int) -> np.ndarray:
    # links[i] joins mass i and i+1 (1-based masses, links[0] and links[d] go to the frame)
    d = len(links) - 1
    A = np.zeros((d + 1, d + 1))
    for i in range(1, d + 1):
        A[i, i] = links[i - 1] + links[i]
        if i < d:
            A[i, i + 1] = A[i + 1, i] = -links[i]
    A[0, 0] += absorber_link
    A[p, p] += absorber_link
    A[0, p] -= absorber_link
    A[p, 0] -= absorber_link
    return A


def harmonic_force(F: float, omega: float, t):
    """Disturbance ``F cos(omega t)``; omega in rad/s."""
    return F * np.cos(omega * t)


def hz_to_rad(f_hz):
    return 2.0 * np.pi * np.asarray(f_hz, dtype=float) if np.ndim(f_hz) else 2.0 * math.pi * float(f_hz)


def rad_to_hz(omega):
    return np.asarray(omega, dtype=float) / (2.0 * np.pi) if np.ndim(omega) else float(omega) / (2.0 * math.pi)


# Identified parameters of the three-cart laboratory setup.
TABLE1 = ChainModel(
    masses=(1.175, 0.509, 0.705),
    stiffnesses=(1001.0, 749.0, 711.0, 950.0),
    dampings=(4.35, 0.85, 1.85, 4.95),
    absorber=Absorber(0.520, 407.0, 1.80),
    p=1,
    n=1,
    dist=3,
)
