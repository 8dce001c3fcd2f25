"""
Rightmost characteristic roots and spectral abscissa of the retarded closed
loop or of its resonant substructure.

Pipeline: collocation candidates -> Newton polish on ``det R`` -> order
doubling until the polished set stops moving -> argument-principle count on
the search rectangle.  The search rectangle spans ``[re_min, re_max]`` and
``|Im s| <= im_max`` where ``im_max`` comes from `CharMatrix.envelope`, so
the count covers every root in that vertical strip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import SecondOrderSystem
from .charmatrix import CharMatrix
from .roots import Rect, candidate_roots, locate_roots, newton_polish
from .substructure import RsDecomposition, closed_loop

RE_MAX_DEFAULT = 50.0
MARGIN_DEFAULT = 1.0
MARGINAL_TOL = 1e-6


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class Region:
    """Search strip ``re_min <= Re s <= re_max``; ``im_max=None`` uses the root envelope."""

    re_min: float | None = None
    re_max: float = RE_MAX_DEFAULT
    im_max: float | None = None


@dataclass
class SpectrumReport:
    roots: np.ndarray
    abscissa: float
    discretization_order: int
    converged: bool
    residuals: np.ndarray
    rect: Rect | None = None
    count: int | None = None
    certified: bool = False
    no_roots_right: bool = False
    envelope: tuple[float, float] | None = None
    message: str = ""
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "roots": [[r.real, r.imag] for r in self.roots],
            "abscissa": None if not math.isfinite(self.abscissa) else self.abscissa,
            "discretization_order": self.discretization_order,
            "converged": self.converged,
            "certified": self.certified,
            "count": self.count,
            "residuals": self.residuals.tolist(),
            "rect": None if self.rect is None else self.rect.to_list(),
            "no_roots_right": self.no_roots_right,
            "envelope": None if self.envelope is None else list(self.envelope),
            "message": self.message,
        }


def as_char_matrix(target, g: float, tau: float) -> CharMatrix:
    if isinstance(target, CharMatrix):
        return CharMatrix(target.M, target.C, target.K, target.b, target.e, g, tau)
    if isinstance(target, RsDecomposition):
        return target.char_matrix(g, tau)
    if isinstance(target, SecondOrderSystem):
        return closed_loop(target, g, tau)
    raise TypeError(f"cannot build a characteristic matrix from {type(target).__name__}")


def _rightmost_estimate(cm: CharMatrix, cands: np.ndarray, re_max: float) -> float:
    c = cands[cands.real <= re_max]
    if c.size == 0:
        raise SpectrumError("no characteristic-root candidates left of re_max")
    top = c[c.real >= c.real.max() - MARGIN_DEFAULT]
    s, ok = newton_polish(cm, top)
    s = s[ok & (s.real <= re_max)]
    best = c.real.max()
    if s.size:
        best = max(best, float(s.real.max()))
    return float(best)


def _clear_line(x: float, cands: np.ndarray, gap: float) -> float:
    # move a vertical contour edge off nearby candidate roots
    for _ in range(50):
        close = np.abs(cands.real - x) < gap
        if not close.any():
            return x
        x = float(cands.real[close].min()) - gap
    return x


def spectrum(target, g: float = 0.0, tau: float = 0.0, region: Region | None = None, *,
             margin: float = MARGIN_DEFAULT, n_start: int = 20, n_max: int = 160,
             certify: bool = True) -> SpectrumReport:
    """Roots in a strip right of ``abscissa - margin`` (or a given region).

    Without ``certify`` only one collocation order is polished and nothing
    is counted; ``converged`` is then False by construction.
    """
    cm = as_char_matrix(target, g, tau)
    region = region or Region()
    env = cm.envelope()
    cands = candidate_roots(cm, 0 if cm.delay_free else n_start)
    re_min = region.re_min
    if re_min is None:
        alpha0 = _rightmost_estimate(cm, cands, region.re_max)
        re_min = _clear_line(alpha0 - margin, cands, 1e-3 * (1.0 + margin))
    if re_min >= region.re_max:
        raise SpectrumError(f"empty strip: re_min={re_min} >= re_max={region.re_max}")
    im_max = region.im_max
    if im_max is None:
        im_max = 1.05 * cm.envelope(re_min)[1] + 1.0
    rect = Rect.symmetric(re_min, region.re_max, im_max)
    found = locate_roots(cm, rect, n_start=n_start, n_max=n_max, certify=certify,
                         initial=cands)
    roots = found.roots
    abscissa = float(roots.real.max()) if roots.size else -math.inf
    msg = found.message
    if certify and not found.converged and not msg:
        msg = f"collocation orders {found.history} did not converge"
    return SpectrumReport(
        roots=roots,
        abscissa=abscissa,
        discretization_order=found.order,
        converged=found.converged,
        residuals=found.residuals,
        rect=rect,
        count=found.count,
        certified=found.certified,
        no_roots_right=region.re_max >= max(env[0], 0.0),
        envelope=(env[0], cm.envelope(re_min)[1]),
        message=msg,
        history=found.history,
    )


def spectral_abscissa(target, g: float = 0.0, tau: float = 0.0, **kw) -> float:
    return spectrum(target, g, tau, **kw).abscissa


def is_marginal(alpha_rs: float, tol: float = MARGINAL_TOL) -> bool:
    return math.isfinite(alpha_rs) and abs(alpha_rs) <= tol
