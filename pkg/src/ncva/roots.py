"""
Characteristic-root machinery for retarded systems with one discrete delay.

Three independent pieces, combined by `locate_roots`:

* candidates from Chebyshev collocation of the infinitesimal generator,
* Newton refinement on ``det R(s)`` with the exact Jacobi-formula derivative,
* completeness checks by the argument principle on rectangle boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charmatrix import CharMatrix, RootHit

RESIDUAL_TOL = 1e-8


class ContourError(RuntimeError):
    """Phase tracking along a contour failed to resolve."""


@dataclass(frozen=True)
class Rect:
    """Closed rectangle ``[re_min, re_max] x [im_min, im_max]`` in the s-plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate rectangle {self}")

    @classmethod
    def symmetric(cls, re_min: float, re_max: float, im_max: float) -> "Rect":
        return cls(re_min, re_max, -im_max, im_max)

    def contains(self, s, pad: float = 0.0):
        s = np.asarray(s)
        return ((s.real >= self.re_min - pad) & (s.real <= self.re_max + pad)
                & (s.imag >= self.im_min - pad) & (s.imag <= self.im_max + pad))

    def corners(self) -> list[complex]:
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def expanded(self, pad: float) -> "Rect":
        return Rect(self.re_min - pad, self.re_max + pad, self.im_min - pad, self.im_max + pad)

    def to_list(self) -> list[float]:
        return [self.re_min, self.re_max, self.im_min, self.im_max]


def cheb(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev points ``cos(pi j / N)`` and the differentiation matrix."""
    if N < 1:
        raise ValueError("N must be >= 1")
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def generator_matrix(cm: CharMatrix, N: int) -> np.ndarray:
    """Collocation of the solution-semigroup generator on ``N + 1`` Chebyshev nodes.

    Block row 0 carries the splicing condition ``phi'(0) = A0 phi(0) + A1 phi(-tau)``;
    the remaining rows differentiate the interpolant on ``[-tau, 0]``.
    """
    A0, A1 = cm.first_order()
    m = A0.shape[0]
    if cm.delay_free:
        return A0 + A1
    _, D = cheb(N)
    D = D * (2.0 / cm.tau)
    A = np.zeros(((N + 1) * m, (N + 1) * m))
    A[:m, :m] = A0
    A[:m, N * m:] += A1
    A[m:, :] = np.kron(D[1:, :], np.eye(m))
    return A


def candidate_roots(cm: CharMatrix, N: int) -> np.ndarray:
    return np.linalg.eigvals(generator_matrix(cm, N))


def newton_polish(cm: CharMatrix, s0, maxiter: int = 60, tol: float = 1e-14):
    """Vectorized Newton on ``det R`` using ``det'/det = tr(R^{-1} R')``.

    Returns ``(roots, converged_mask)``.
    """
    s = np.array(s0, dtype=complex, ndmin=1).copy()
    done = np.zeros(s.shape, dtype=bool)
    active = np.ones(s.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        _newton_loop(cm, s, done, active, maxiter, tol)
    return s, done


def _newton_loop(cm, s, done, active, maxiter, tol):
    for _ in range(maxiter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        si = s[idx]
        R = cm(si)
        dR = cm.derivative(si)
        sign, _ = np.linalg.slogdet(R)
        hit = sign == 0
        ok = ~hit & np.isfinite(sign)
        step = np.zeros(si.shape, dtype=complex)
        if ok.any():
            X = np.linalg.solve(R[ok], dR[ok])
            tr = np.trace(X, axis1=-2, axis2=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step[ok] = 1.0 / tr
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        s[idx] = si - step
        small = np.abs(step) <= tol * (1.0 + np.abs(si))
        finished = hit | (small & ok & ~bad)
        done[idx[finished]] = True
        active[idx[finished | bad | ~(ok | hit)]] = False
        # runaway iterates are dropped
        far = np.abs(s[idx]) > 1e8
        active[idx[far]] = False


def dedupe(roots, tol: float = 1e-7) -> np.ndarray:
    roots = np.asarray(roots, dtype=complex)
    out: list[complex] = []
    for r in sorted(roots, key=lambda z: (z.real, z.imag)):
        if not any(abs(r - q) <= tol * (1.0 + abs(r)) for q in out):
            out.append(r)
    return np.array(out, dtype=complex)


def conjugate_close(roots, imag_tol: float = 1e-9) -> np.ndarray:
    """Keep upper-half roots, mirror them, and snap near-real roots onto the axis."""
    roots = np.asarray(roots, dtype=complex)
    upper = []
    for r in roots:
        if abs(r.imag) <= imag_tol * (1.0 + abs(r)):
            upper.append(complex(r.real, 0.0))
        elif r.imag > 0:
            upper.append(r)
        else:
            upper.append(r.conjugate())
    upper = dedupe(upper)
    full = list(upper) + [r.conjugate() for r in upper if r.imag != 0.0]
    return np.array(sorted(full, key=lambda z: (-z.real, -z.imag)), dtype=complex)


def winding_number(cm: CharMatrix, rect: Rect, n_init: int = 32,
                   max_evals: int = 400_000) -> int:
    """Number of zeros of ``det R`` inside ``rect`` (argument principle).

    Each edge is subdivided until every phase increment is below pi/2.
    Raises RootHit when a zero lies exactly on the boundary.
    """
    corners = rect.corners()
    total = 0.0
    evals = 0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        # exp(-s tau) turns by tau * |d Im s|; sample so it cannot alias a full turn
        n_edge = max(n_init, int(math.ceil(abs((b - a).imag) * cm.tau / (0.125 * math.pi))))
        u = np.linspace(0.0, 1.0, n_edge + 1)
        pts = a + (b - a) * u
        sign, _ = cm.slogdet(pts)
        evals += u.size
        while True:
            if np.any(sign == 0):
                raise RootHit(pts[np.flatnonzero(sign == 0)[0]])
            dphi = np.angle(sign[1:] / sign[:-1])
            bad = np.flatnonzero(np.abs(dphi) >= 0.5 * math.pi)
            if bad.size == 0:
                break
            umid = 0.5 * (u[bad] + u[bad + 1])
            if np.any(np.diff(u)[bad] < 1e-15):
                raise ContourError(f"phase unresolved near s={a + (b - a) * umid[0]}")
            smid = a + (b - a) * umid
            sm, _ = cm.slogdet(smid)
            evals += umid.size
            if evals > max_evals:
                raise ContourError(f"argument principle exceeded {max_evals} evaluations")
            u = np.insert(u, bad + 1, umid)
            pts = np.insert(pts, bad + 1, smid)
            sign = np.insert(sign, bad + 1, sm)
        total += dphi.sum()
    w = total / (2.0 * math.pi)
    k = int(round(w))
    if abs(w - k) > 1e-6:
        raise ContourError(f"non-integer winding {w}")
    return k


@dataclass
class RootSet:
    roots: np.ndarray
    rect: Rect
    order: int
    converged: bool
    certified: bool
    count: int | None = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: list = field(default_factory=list)
    message: str = ""


def _polish_in(cm: CharMatrix, cands, rect: Rect) -> np.ndarray:
    if len(cands) == 0:
        return np.zeros(0, dtype=complex)
    s, ok = newton_polish(cm, cands)
    s = s[ok & np.isfinite(s)]
    s = s[rect.contains(s)]
    if s.size == 0:
        return s
    res = np.array([cm.normalized_residual(r) for r in s])
    s = s[res <= RESIDUAL_TOL]
    return conjugate_close(s) if rect.im_min == -rect.im_max else dedupe(s)


def _same_set(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if a.size != b.size:
        return False
    if a.size == 0:
        return True
    return all(np.min(np.abs(b - r)) <= tol for r in a)


def _max_shift(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 or b.size == 0:
        return 0.0 if a.size == b.size else math.inf
    return float(max(np.min(np.abs(b - r)) for r in a))


def locate_roots(cm: CharMatrix, rect: Rect, n_start: int = 20, n_max: int = 160,
                 certify: bool = True, set_tol: float = 1e-6,
                 candidate_pad: float | None = None,
                 initial: np.ndarray | None = None) -> RootSet:
    """All characteristic roots inside ``rect``.

    Collocation order doubles from ``n_start`` until two successive polished
    root sets agree to ``set_tol``; with ``certify`` the final count is
    checked against the argument principle on the rectangle boundary.
    Without ``certify`` a single collocation order is used.  ``initial`` may
    hold precomputed candidates for the starting order.
    """
    if candidate_pad is None:
        candidate_pad = 0.25 * max(rect.re_max - rect.re_min, 1.0)
    search = rect.expanded(candidate_pad)

    def at_order(N):
        if initial is not None and N == (0 if cm.delay_free else n_start):
            cands = np.asarray(initial)
        else:
            cands = candidate_roots(cm, N)
        return _polish_in(cm, cands[search.contains(cands)], rect)

    history = []
    if cm.delay_free:
        roots = at_order(0)
        order, converged = 0, True
    elif not certify:
        roots = at_order(n_start)
        order, converged = n_start, False
    else:
        N = n_start
        prev = at_order(N)
        history.append((N, prev.size))
        converged = False
        roots = prev
        order = N
        while 2 * N <= n_max:
            N *= 2
            cur = at_order(N)
            history.append((N, cur.size, _max_shift(prev, cur)))
            roots, order = cur, N
            if _same_set(prev, cur, set_tol) and _same_set(cur, prev, set_tol):
                converged = True
                break
            prev = cur

    residuals = np.array([cm.normalized_residual(r) for r in roots])
    out = RootSet(roots, rect, order, converged, False, None, residuals, history)
    if certify:
        try:
            out.count = winding_number(cm, rect)
        except (RootHit, ContourError) as exc:
            out.message = f"argument principle failed: {exc}"
            out.converged = False
            return out
        out.certified = out.count == roots.size
        if not out.certified:
            out.converged = False
            out.message = (f"argument principle counts {out.count} roots in "
                           f"{rect.to_list()}, located {roots.size}")
    return out
