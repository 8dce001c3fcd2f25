"""
Closed-loop characteristic matrix, its resonant/target/vibrating partition,
and an executable check that resonant-substructure poles are zeros of the
disturbance-to-target transfer function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import DeploymentError, SecondOrderSystem, check_deployment
from .charmatrix import CharMatrix, RootHit
from .roots import Rect, locate_roots


@dataclass(frozen=True)
class CharMatrixEval:
    s: complex
    value: np.ndarray


@dataclass(frozen=True)
class RsDecomposition:
    """Leading ``n x n`` blocks forming the resonant substructure.

    Row/column ``n`` is the target, rows ``n+1..d`` the vibrating part.
    """

    M_R: np.ndarray
    C_R: np.ndarray
    K_R: np.ndarray
    b_u: np.ndarray
    e_a: np.ndarray
    n: int
    d: int

    @property
    def target_index(self) -> int:
        return self.n

    @property
    def vibrating_indices(self) -> range:
        return range(self.n + 1, self.d + 1)

    def char_matrix(self, g: float = 0.0, tau: float = 0.0) -> CharMatrix:
        return CharMatrix(self.M_R, self.C_R, self.K_R, self.b_u, self.e_a, g, tau)

    def passive(self, s) -> np.ndarray:
        return self.char_matrix()(s)


def closed_loop(sys: SecondOrderSystem, g: float = 0.0, tau: float = 0.0) -> CharMatrix:
    return CharMatrix(sys.M, sys.C, sys.K, sys.B_u, sys.E_a, g, tau)


def eval_char_matrix(sys: SecondOrderSystem, g: float, tau: float, s: complex) -> CharMatrixEval:
    s = complex(s)
    return CharMatrixEval(s, closed_loop(sys, g, tau)(s))


def decompose(sys: SecondOrderSystem, n: int | None = None) -> RsDecomposition:
    n = sys.n if n is None else int(n)
    check_deployment(sys.p, n, sys.dist, sys.d)
    sl = slice(0, n)
    return RsDecomposition(
        sys.M[sl, sl].copy(), sys.C[sl, sl].copy(), sys.K[sl, sl].copy(),
        sys.B_u[sl].copy(), sys.E_a[sl].copy(), n, sys.d,
    )


def log_det_char(sys, g: float, tau: float, s: complex, normalize: bool = False):
    """``(log|det R(s)|, arg det R(s))`` from an LU factorization with partial pivoting.

    ``sys`` may be a SecondOrderSystem, an RsDecomposition or a CharMatrix.
    With ``normalize`` the log row-norm product of the term-magnitude matrix
    is subtracted, so the magnitude is at most 0.  Raises RootHit on a zero pivot.
    """
    cm = _as_char_matrix(sys, g, tau)
    sign, logabs = cm.slogdet(complex(s))
    if sign == 0:
        raise RootHit(s)
    if normalize:
        logabs = logabs - cm.row_norm_logscale(complex(s))
    return float(logabs), float(np.angle(sign))


def _as_char_matrix(obj, g, tau) -> CharMatrix:
    if isinstance(obj, CharMatrix):
        return CharMatrix(obj.M, obj.C, obj.K, obj.b, obj.e, g, tau)
    if isinstance(obj, RsDecomposition):
        return obj.char_matrix(g, tau)
    return closed_loop(obj, g, tau)


def bordered_matrix(sys: SecondOrderSystem, n: int, g: float, tau: float, s: complex,
                    magnitude: bool = False) -> np.ndarray:
    """``[[R(s), -B_f], [E_n^T, 0]]``; its determinant vanishes at transfer zeros.

    With ``magnitude`` the R block is replaced by its cancellation-free
    entrywise magnitude, which gives the normalization scale.
    """
    size = sys.d + 1
    cm = closed_loop(sys, g, tau)
    Z = np.zeros((size + 1, size + 1), dtype=float if magnitude else complex)
    Z[:size, :size] = cm.magnitude(s) if magnitude else cm(s)
    Z[:size, size] = np.abs(sys.B_f) if magnitude else -sys.B_f
    Z[size, :size] = sys.selector(n)
    return Z


def bordered_det(sys, n, g, tau, s, normalize: bool = True) -> float:
    """``|z(s)|``, by default divided by the row-norm product of the magnitude matrix."""
    Z = bordered_matrix(sys, n, g, tau, s)
    sign, logabs = np.linalg.slogdet(Z)
    if sign == 0:
        return 0.0
    if normalize:
        scale = bordered_matrix(sys, n, g, tau, s, magnitude=True)
        logabs -= np.log(np.linalg.norm(scale, axis=1)).sum()
    return float(np.exp(logabs))


@dataclass
class Prop1Report:
    omega: float
    g: float
    tau: float
    n: int
    rect: Rect
    roots: np.ndarray
    z_normalized: np.ndarray
    certified: bool
    count: int | None
    tol: float
    message: str = ""

    @property
    def max_z(self) -> float:
        return float(self.z_normalized.max()) if self.z_normalized.size else 0.0

    @property
    def passed(self) -> bool:
        return self.certified and self.roots.size > 0 and self.max_z <= self.tol

    def to_dict(self) -> dict:
        return {
            "omega": self.omega, "omega_hz": self.omega / (2 * math.pi),
            "g": self.g, "tau": self.tau, "n": self.n,
            "rect": self.rect.to_list(),
            "roots": [[r.real, r.imag] for r in self.roots],
            "z_normalized": self.z_normalized.tolist(),
            "max_z": self.max_z, "certified": self.certified,
            "count": self.count, "tol": self.tol, "passed": self.passed,
            "message": self.message,
        }


def check_proposition1(sys: SecondOrderSystem, g: float, tau: float, omega: float,
                       tol: float = 1e-8, n: int | None = None,
                       rect: Rect | None = None) -> Prop1Report:
    """Locate roots of ``det A_R`` near ``+-j omega`` and test them as transfer zeros.

    The default search box is ``|Re s| <= h``, ``|Im s| in [omega - h, omega + h]``
    with ``h = max(1, omega / 4)``; only the upper box is searched and
    conjugates are added.  Passes iff the box count is certified by the
    argument principle, at least one root is found, and every normalized
    bordered determinant is at most ``tol``.
    """
    n = sys.n if n is None else int(n)
    rs = decompose(sys, n)
    if rect is None:
        h = max(1.0, 0.25 * omega)
        rect = Rect(-h, h, max(omega - h, 1e-3 * h), omega + h)
    cm = rs.char_matrix(g, tau)
    found = locate_roots(cm, rect)
    roots = found.roots
    if roots.size:
        roots = np.concatenate([roots, roots.conj()])
    z = np.array([bordered_det(sys, n, g, tau, r) for r in roots])
    msg = found.message
    if not found.certified and not msg:
        msg = f"root search in {rect.to_list()} did not certify (orders {found.history})"
    return Prop1Report(omega, g, tau, n, rect, roots, z, found.certified, found.count, tol, msg)


__all__ = [
    "CharMatrixEval", "RsDecomposition", "DeploymentError", "closed_loop",
    "eval_char_matrix", "decompose", "log_det_char", "bordered_matrix",
    "bordered_det", "Prop1Report", "check_proposition1",
]
