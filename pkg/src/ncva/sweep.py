"""
Frequency sweeps for admissible delayed-resonator operation.

A design frequency is admissible on a branch ``(family, k)`` when the tuned
overall system is exponentially stable and the tuned resonant substructure
is marginally stable (its rightmost roots sit on the imaginary axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .chain import ChainModel, SecondOrderSystem, build_system
from .spectrum import MARGINAL_TOL, SpectrumError, spectrum
from .substructure import decompose
from .tuning import NEGATIVE, parse_family, tune

Interval = tuple[float, float]
BranchKey = tuple[str, int]

BISECT_RESOLUTION_HZ = 0.01


@dataclass
class PointResult:
    omega_hz: float
    g: float
    tau: float
    alpha_rs: float
    alpha_os: float
    admissible: bool
    status: str = "ok"


def evaluate_point(sys: SecondOrderSystem, n: int, omega_hz: float, family: str, k: int,
                   certify: bool = False, marginal_tol: float = MARGINAL_TOL) -> PointResult:
    """Tune on ``(family, k)`` at one frequency and classify it."""
    rs = decompose(sys, n)
    t = tune(rs, 2.0 * math.pi * omega_hz, family, k)
    if t.degenerate:
        return PointResult(omega_hz, t.g, t.tau, math.nan, math.nan, False, "degenerate")
    if t.requested_k is not None:
        # literal branch k has a negative delay
        return PointResult(omega_hz, t.g, t.tau, math.nan, math.nan, False, "negative-delay")
    try:
        a_rs = spectrum(rs, t.g, t.tau, certify=certify)
        a_os = spectrum(sys, t.g, t.tau, certify=certify)
    except (SpectrumError, np.linalg.LinAlgError) as exc:
        return PointResult(omega_hz, t.g, t.tau, math.nan, math.nan, False, f"spectrum-failed: {exc}")
    status = "ok"
    if certify and not (a_rs.converged and a_os.converged):
        status = "uncertified"
    ok = (a_os.abscissa < 0.0) and abs(a_rs.abscissa) <= marginal_tol
    return PointResult(omega_hz, t.g, t.tau, a_rs.abscissa, a_os.abscissa, bool(ok), status)


@dataclass
class BranchSweep:
    family: str
    k: int
    points: list[PointResult]
    intervals: list[Interval] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


@dataclass
class SweepResult:
    n: int
    grid: np.ndarray
    branches: dict[BranchKey, BranchSweep]

    @property
    def admissible_intervals(self) -> dict[BranchKey, list[Interval]]:
        return {key: b.intervals for key, b in self.branches.items()}

    def union(self, keys: Iterable[BranchKey] | None = None) -> list[Interval]:
        keys = list(self.branches) if keys is None else [(parse_family(f), int(k)) for f, k in keys]
        out: list[Interval] = []
        for key in keys:
            out = union_intervals(out, self.branches[key].intervals)
        return out

    def rows(self):
        """Flat records ordered by (family, k, frequency)."""
        for (fam, k), b in sorted(self.branches.items()):
            for p in b.points:
                yield {"omega_hz": p.omega_hz, "family": fam, "k": k, "g": p.g, "tau": p.tau,
                       "alpha_rs": p.alpha_rs, "alpha_os": p.alpha_os,
                       "admissible": int(p.admissible)}


def _runs(grid: np.ndarray, flags: Sequence[bool]) -> list[tuple[int, int]]:
    runs, start = [], None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        if not f and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def _bisect(pred, lo: float, hi: float, lo_val: bool, resolution: float) -> float:
    # pred(lo) == lo_val, pred(hi) != lo_val
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if pred(mid) == lo_val:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sweep_branch(sys: SecondOrderSystem, n: int, grid_hz, family: str = NEGATIVE, k: int = 0,
                 certify: bool = False, resolution: float = BISECT_RESOLUTION_HZ) -> BranchSweep:
    family = parse_family(family)
    grid = np.asarray(grid_hz, dtype=float)
    points = [evaluate_point(sys, n, f, family, k, certify) for f in grid]
    flags = [p.admissible for p in points]

    def pred(f):
        return evaluate_point(sys, n, f, family, k, certify).admissible

    intervals = []
    for i0, i1 in _runs(grid, flags):
        a = grid[i0] if i0 == 0 else _bisect(pred, grid[i0 - 1], grid[i0], False, resolution)
        b = grid[i1] if i1 == len(grid) - 1 else _bisect(pred, grid[i1], grid[i1 + 1], True, resolution)
        intervals.append((round(float(a), 6), round(float(b), 6)))
    return BranchSweep(family, int(k), points, intervals)


def sweep_admissible(model: ChainModel | SecondOrderSystem, n: int,
                     families: Iterable[str] = (NEGATIVE,), k_list: Iterable[int] = (0, 1),
                     grid=None, certify: bool = False) -> SweepResult:
    """Admissibility over a frequency grid in Hz (default 2..12 Hz, step 0.05).

    Interval endpoints strictly inside the grid are refined by bisection to
    `BISECT_RESOLUTION_HZ`.  Failed or degenerate points count as gaps.
    """
    sys = build_system(model) if isinstance(model, ChainModel) else model
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty strictly increasing 1-D array (Hz)")
    branches = {}
    for fam in families:
        fam = parse_family(fam)
        for k in k_list:
            branches[(fam, int(k))] = sweep_branch(sys, n, grid, fam, int(k), certify)
    return SweepResult(int(n), grid, branches)


def default_grid(lo: float = 2.0, hi: float = 12.0, step: float = 0.05) -> np.ndarray:
    count = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(count + 1), 10)


def union_intervals(a: Iterable[Interval], b: Iterable[Interval]) -> list[Interval]:
    items = sorted([*a, *b])
    out: list[list[float]] = []
    for lo, hi in items:
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def intersect_intervals(a: Iterable[Interval], b: Iterable[Interval]) -> list[Interval]:
    out = []
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if lo <= hi:
                out.append((lo, hi))
    return sorted(out)


def cross_target_intersection(results: dict[int, SweepResult],
                              assignment: dict[int, Iterable[BranchKey]] | None = None) -> list[Interval]:
    """Frequencies at which every target can be silenced, one at a time.

    ``assignment`` maps each target to the branches allowed for it; by
    default every swept branch is allowed.
    """
    current: list[Interval] | None = None
    for n in sorted(results):
        keys = None if assignment is None else assignment.get(n)
        allowed = results[n].union(keys)
        current = allowed if current is None else intersect_intervals(current, allowed)
    return current or []
