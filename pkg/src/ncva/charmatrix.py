"""
Quasi-polynomial characteristic matrices ``M s^2 + C s + K - g b e^T exp(-s tau)``.

Both the full closed loop and its resonant substructure have this form, so
root finding, spectra and determinant evaluation all work on `CharMatrix`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RootHit(ArithmeticError):
    """The characteristic matrix is exactly singular at the evaluation point."""

    def __init__(self, s):
        super().__init__(f"exact singularity (zero pivot) at s={s}")
        self.s = s


@dataclass(frozen=True)
class CharMatrix:
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    b: np.ndarray
    e: np.ndarray
    g: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau={self.tau}: delay must be nonnegative")
        for name in ("M", "C", "K", "b", "e"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def size(self) -> int:
        return self.M.shape[0]

    @property
    def delay_free(self) -> bool:
        return self.g == 0.0 or self.tau == 0.0

    @property
    def feedback(self) -> np.ndarray:
        return self.g * np.outer(self.b, self.e)

    def __call__(self, s):
        """Evaluate at a scalar or an array of points; arrays give shape ``(..., n, n)``."""
        s = np.asarray(s, dtype=complex)
        ss = s[..., None, None]
        return (self.M * ss**2 + self.C * ss + self.K
                - self.feedback * np.exp(-ss * self.tau))

    def derivative(self, s):
        s = np.asarray(s, dtype=complex)
        ss = s[..., None, None]
        return (2.0 * self.M * ss + self.C
                + self.tau * self.feedback * np.exp(-ss * self.tau))

    def slogdet(self, s):
        """Batched ``(unit phase factor, log|det|)``; phase is 0 at exact roots."""
        return np.linalg.slogdet(self(s))

    def magnitude(self, s):
        """Entrywise sum of term magnitudes; bounds ``|R(s)|`` without cancellation."""
        s = np.asarray(s, dtype=complex)
        a = np.abs(s)[..., None, None]
        return (np.abs(self.M) * a**2 + np.abs(self.C) * a + np.abs(self.K)
                + np.abs(self.feedback) * np.exp(-s.real[..., None, None] * self.tau))

    def row_norm_logscale(self, s):
        """Sum of log row norms of `magnitude`, an upper bound on ``log|det R|``."""
        rn = np.linalg.norm(self.magnitude(s), axis=-1)
        with np.errstate(divide="ignore"):
            return np.log(rn).sum(axis=-1)

    def normalized_residual(self, s) -> float:
        """``|det R(s)|`` over the row-norm product of `magnitude`, in [0, 1]."""
        sign, logabs = self.slogdet(s)
        if sign == 0:
            return 0.0
        return float(np.exp(logabs - self.row_norm_logscale(s)))

    def first_order(self) -> tuple[np.ndarray, np.ndarray]:
        """State matrices of ``z' = A0 z + A1 z(t - tau)`` with ``z = [x, x']``."""
        n = self.size
        Minv = np.diag(1.0 / np.diag(self.M)) if _is_diag(self.M) else np.linalg.inv(self.M)
        A0 = np.zeros((2 * n, 2 * n))
        A0[:n, n:] = np.eye(n)
        A0[n:, :n] = -Minv @ self.K
        A0[n:, n:] = -Minv @ self.C
        A1 = np.zeros((2 * n, 2 * n))
        A1[n:, :n] = Minv @ self.feedback
        return A0, A1

    def envelope(self, re_min: float = 0.0) -> tuple[float, float]:
        """Bounds ``(re_bound, modulus_bound)`` on characteristic roots.

        Every root with ``Re s >= 0`` has ``Re s <= re_bound``, and every root
        with ``Re s >= re_min`` has ``|s| <= modulus_bound``.  Derived from the
        scalar quadratic ``v* R(s) v = 0`` of a null vector, using that M is
        positive definite and C, K are symmetric positive semidefinite.
        """
        m_half = 1.0 / np.sqrt(np.diag(self.M))
        c_max = max(0.0, float(np.linalg.eigvalsh(self.C * np.outer(m_half, m_half))[-1]))
        k_max = max(0.0, float(np.linalg.eigvalsh(self.K * np.outer(m_half, m_half))[-1]))
        bt, et = self.b * m_half, self.e * m_half
        rho = 0.5 * (np.linalg.norm(bt) * np.linalg.norm(et) + abs(bt @ et))
        delay_gain = abs(self.g) * rho
        re_bound = math.sqrt(delay_gain)
        growth = math.exp(max(0.0, -re_min) * self.tau)
        modulus = 0.5 * c_max + math.sqrt(0.25 * c_max**2 + k_max + delay_gain * growth)
        return re_bound, modulus


def _is_diag(A: np.ndarray) -> bool:
    return np.count_nonzero(A - np.diag(np.diagonal(A))) == 0
