"""Disturbance-to-target frequency response ``P(j omega) = E_n^T R^{-1}(j omega) B_f``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .chain import SecondOrderSystem
from .substructure import closed_loop
from .tuning import DrTuning

POLE_RCOND = 1e-14


class PoleError(ArithmeticError):
    """``R(j omega)`` is singular: the frequency is a closed-loop pole."""

    def __init__(self, omega, rcond):
        super().__init__(f"pole at omega={omega} rad/s (rcond={rcond:.2e})")
        self.omega = omega
        self.rcond = rcond


def transfer_at(sys: SecondOrderSystem, n: int, g: float, tau: float, omega: float) -> complex:
    """Complex receptance from the disturbance force to ``x_n``, in m/N."""
    R = closed_loop(sys, g, tau)(1j * omega)
    lu, piv = la.lu_factor(R, check_finite=True)
    anorm = np.linalg.norm(R, 1)
    rcond = la.lapack.zgecon(lu, anorm)[0] if anorm > 0 else 0.0
    if rcond < POLE_RCOND or not np.all(np.isfinite(lu)):
        raise PoleError(omega, rcond)
    x = la.lu_solve((lu, piv), sys.B_f.astype(complex))
    return complex(x[n])


def passive_transfer(sys: SecondOrderSystem, n: int, omega: float) -> complex:
    return transfer_at(sys, n, 0.0, 0.0, omega)


@dataclass
class FrequencyResponseCurve:
    grid: np.ndarray          # Hz
    magnitude: np.ndarray     # m/N, nan at recorded poles
    n: int
    g: float = 0.0
    tau: float = 0.0

    @property
    def passive(self) -> bool:
        return self.g == 0.0

    @property
    def mode(self) -> str:
        return "passive" if self.passive else "tuned"

    def db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.magnitude)

    def local_minima(self) -> np.ndarray:
        """Grid frequencies of strict interior local minima of the magnitude."""
        m = self.magnitude
        idx = [i for i in range(1, m.size - 1) if m[i] < m[i - 1] and m[i] < m[i + 1]]
        return self.grid[idx]


def response_curve(sys: SecondOrderSystem, n: int, g: float = 0.0, tau: float = 0.0,
                   grid=None) -> FrequencyResponseCurve:
    """``|P|`` over a strictly increasing grid in Hz (default 2..12 Hz, 1000 log points)."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    mag = np.empty(grid.size)
    for i, f in enumerate(grid):
        try:
            mag[i] = abs(transfer_at(sys, n, g, tau, 2.0 * math.pi * f))
        except PoleError:
            mag[i] = np.nan
    return FrequencyResponseCurve(grid, mag, n, g, tau)


def default_grid() -> np.ndarray:
    return np.logspace(np.log10(2.0), np.log10(12.0), 1000)


def passive_minimum(sys: SecondOrderSystem, n: int, lo_hz: float = 2.0, hi_hz: float = 12.0,
                    step_hz: float = 1e-3) -> float:
    """Lowest-frequency local minimum of ``|P_passive|`` in ``[lo_hz, hi_hz]``, refined."""
    grid = np.arange(lo_hz, hi_hz + 0.5 * step_hz, step_hz)
    mins = response_curve(sys, n, grid=grid).local_minima()
    if mins.size == 0:
        raise ValueError(f"no interior minimum of |P| for target {n} in [{lo_hz}, {hi_hz}] Hz")
    f0 = float(mins[0])
    res = _golden(lambda f: abs(passive_transfer(sys, n, 2.0 * math.pi * f)),
                  f0 - step_hz, f0 + step_hz)
    return res


def _golden(fun, a, b, tol=1e-9):
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    while b - a > tol:
        if fun(c) < fun(d):
            b = d
        else:
            a = c
        c, d = b - gr * (b - a), a + gr * (b - a)
    return 0.5 * (a + b)


def vshape_sensitivity(sys: SecondOrderSystem, n: int, tuning: DrTuning, delta_hz: float) -> float:
    """Worst ``|P(j(omega +- delta))| / |P_passive(j omega)|`` around the design point."""
    if delta_hz <= 0:
        raise ValueError("delta_hz must be positive")
    w = tuning.omega
    dw = 2.0 * math.pi * delta_hz
    ref = abs(passive_transfer(sys, n, w))
    off = max(abs(transfer_at(sys, n, tuning.g, tuning.tau, w + sgn * dw)) for sgn in (-1.0, 1.0))
    return off / ref
