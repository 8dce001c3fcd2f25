"""
Time-domain simulation of the chain under harmonic forcing with scheduled
delayed-resonator feedback ``u(t) = g x_a(t - tau)``.

Integration is classical fixed-step RK4.  Because the plant is linear, one
RK4 step is an exact linear map of the current state and the six stage
inputs (force and feedback at ``t``, ``t + h/2``, ``t + h``); that map is
precomputed once so the time loop only performs two small mat-vecs.  The
delayed absorber position between samples comes from cubic Hermite
interpolation of stored positions and velocities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain import SecondOrderSystem
from .tuning import DrTuning

DIVERGENCE_LIMIT = 1e3  # m
DT_DEFAULT = 1e-4


class ScenarioError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, t: float, value: float):
        super().__init__(f"simulation diverged at t={t:.6g} s (|x|={value:.3g} m)")
        self.t = t
        self.value = value


@dataclass(frozen=True)
class Force:
    F: float
    omega_hz: float
    t_on: float = 0.0
    t_off: float = math.inf

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.omega_hz

    def __call__(self, t):
        """``F cos(omega t)`` while ``t_on <= t < t_off``, else 0."""
        t = np.asarray(t, dtype=float)
        on = (t >= self.t_on) & (t < self.t_off)
        return np.where(on, self.F * np.cos(self.omega * t), 0.0)


@dataclass(frozen=True)
class Segment:
    """Feedback window ``[t_start, t_end)``; ``tuning=None`` means passive."""

    t_start: float
    t_end: float
    tuning: DrTuning | None = None
    label: str = ""

    @property
    def g(self) -> float:
        return 0.0 if self.tuning is None else self.tuning.g

    @property
    def tau(self) -> float:
        return 0.0 if self.tuning is None else self.tuning.tau


@dataclass
class Scenario:
    system: SecondOrderSystem
    force: Force
    segments: Sequence[Segment]
    duration: float
    dt: float = DT_DEFAULT
    sensor_quantization: float = 0.0
    quantized_feedback: bool = False
    x0: np.ndarray | None = None
    v0: np.ndarray | None = None
    record_every: int = 1

    def validate(self) -> None:
        if not self.dt > 0:
            raise ScenarioError("dt must be positive")
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if self.sensor_quantization < 0:
            raise ScenarioError("sensor_quantization must be >= 0")
        if self.record_every < 1:
            raise ScenarioError("record_every must be >= 1")
        if self.force.F < 0 or self.force.omega_hz <= 0:
            raise ScenarioError("force needs F >= 0 and omega_hz > 0")
        size = self.system.d + 1
        for name in ("x0", "v0"):
            v = getattr(self, name)
            if v is not None and np.shape(v) != (size,):
                raise ScenarioError(f"{name}: expected {size} entries [x_a, x_1..x_d]")
        prev_end = -math.inf
        for i, seg in enumerate(self.segments):
            if not seg.t_start < seg.t_end:
                raise ScenarioError(f"segment {i}: t_start must be < t_end")
            if seg.t_start < prev_end:
                raise ScenarioError(f"segment {i}: segments must be time-ordered and non-overlapping")
            prev_end = seg.t_end
            if seg.g != 0.0:
                if not (seg.tau > 0 and self.dt <= seg.tau / 10.0 * (1 + 1e-12)):
                    raise ScenarioError(
                        f"segment {i}: dt={self.dt} violates dt <= tau/10 (tau={seg.tau})")


@dataclass
class SimulationTrace:
    t: np.ndarray
    x: np.ndarray            # (samples, d + 1), columns x_a, x_1..x_d
    u: np.ndarray
    f: np.ndarray
    segment_id: np.ndarray   # -1 where no feedback segment is active
    events: list = field(default_factory=list)
    force_omega_hz: float = 0.0
    velocity: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.x.shape[1] - 1

    def column(self, coordinate) -> np.ndarray:
        return self.x[:, coordinate_index(coordinate, self.d)]

    def final_state(self) -> np.ndarray:
        if self.velocity is None:
            return self.x[-1].copy()
        return np.concatenate([self.x[-1], self.velocity[-1]])


def coordinate_index(coordinate, d: int) -> int:
    """``0``/``"x_a"`` is the absorber, ``i``/``"x_i"`` chain mass ``i``."""
    if isinstance(coordinate, str):
        key = coordinate.strip().lower()
        if key in ("a", "x_a", "xa"):
            return 0
        key = key.removeprefix("x_").removeprefix("x")
        coordinate = int(key)
    i = int(coordinate)
    if not 0 <= i <= d:
        raise IndexError(f"coordinate {coordinate} outside 0..{d}")
    return i


def rk4_linear_step(A: np.ndarray, h: float, z, w0, wh, w1):
    """One classical RK4 step of ``z' = A z + w(t)``; accepts matrices column-wise."""
    k1 = A @ z + w0
    k2 = A @ (z + 0.5 * h * k1) + wh
    k3 = A @ (z + 0.5 * h * k2) + wh
    k4 = A @ (z + h * k3) + w1
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_maps(sys: SecondOrderSystem, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Phi, Q)`` with ``z+ = Phi z + Q [f0, u0, fh, uh, f1, u1]`` for RK4."""
    m = sys.d + 1
    Minv = 1.0 / np.diag(sys.M)
    A = np.zeros((2 * m, 2 * m))
    A[:m, m:] = np.eye(m)
    A[m:, :m] = -Minv[:, None] * sys.K
    A[m:, m:] = -Minv[:, None] * sys.C
    W = np.zeros((2 * m, 2))
    W[m:, 0] = Minv * sys.B_f
    W[m:, 1] = Minv * sys.B_u
    Z = np.zeros_like(W)
    Phi = rk4_linear_step(A, h, np.eye(2 * m), 0.0, 0.0, 0.0)
    Q = np.hstack([rk4_linear_step(A, h, Z, W, Z, Z),
                   rk4_linear_step(A, h, Z, Z, W, Z),
                   rk4_linear_step(A, h, Z, Z, Z, W)])
    return Phi, Q


def _active_segment(segments: Sequence[Segment], times: np.ndarray) -> np.ndarray:
    ids = np.full(times.shape, -1, dtype=np.int64)
    for i, seg in enumerate(segments):
        ids[(times >= seg.t_start) & (times < seg.t_end)] = i
    return ids


def simulate(scenario: Scenario) -> SimulationTrace:
    """Integrate the scheduled closed loop; see module docstring for the scheme."""
    scenario.validate()
    sys = scenario.system
    h = float(scenario.dt)
    m = sys.d + 1
    nsteps = int(math.ceil(scenario.duration / h - 1e-9))
    Phi, Q = step_maps(sys, h)

    # stage times are k*h, (k+1/2)*h, (k+1)*h; indices in half steps avoid drift
    half_times = 0.5 * h * np.arange(2 * nsteps + 1)
    f_half = scenario.force(half_times)
    seg_half = _active_segment(scenario.segments, half_times)
    segs = list(scenario.segments)
    gains = np.array([s.g for s in segs] + [0.0])
    tau_steps = np.array([s.tau / h for s in segs] + [0.0])

    z = np.zeros(2 * m)
    if scenario.x0 is not None:
        z[:m] = scenario.x0
    if scenario.v0 is not None:
        z[m:] = scenario.v0
    xa = np.empty(nsteps + 1)
    va = np.empty(nsteps + 1)
    xa[0], va[0] = z[0], z[m]
    xa_hist0 = float(z[0])

    q = float(scenario.sensor_quantization)
    quant_fb = scenario.quantized_feedback and q > 0

    def delayed(sk: float) -> float:
        # absorber position at time sk*h (sk in steps), history constant before 0
        if sk <= 0.0:
            y = xa_hist0
        else:
            i = int(sk)
            th = sk - i
            if th == 0.0:
                y = xa[i]
            else:
                th2 = th * th
                th3 = th2 * th
                y = ((2 * th3 - 3 * th2 + 1) * xa[i] + (th3 - 2 * th2 + th) * h * va[i]
                     + (-2 * th3 + 3 * th2) * xa[i + 1] + (th3 - th2) * h * va[i + 1])
        if quant_fb:
            y = q * round(y / q)
        return y

    rec_idx = np.arange(0, nsteps + 1, scenario.record_every)
    x_rec = np.empty((rec_idx.size, m))
    v_rec = np.empty((rec_idx.size, m))
    u_rec = np.zeros(rec_idx.size)
    x_rec[0], v_rec[0] = z[:m], z[m:]
    ri = 1
    every = scenario.record_every
    u_at_step = np.zeros(nsteps + 1)
    v = np.zeros(6)
    check = 1000

    for k in range(nsteps):
        j = 2 * k
        v[0], v[2], v[4] = f_half[j], f_half[j + 1], f_half[j + 2]
        for slot, jj, c in ((1, j, 0.0), (3, j + 1, 0.5), (5, j + 2, 1.0)):
            sid = seg_half[jj]
            if sid < 0 or gains[sid] == 0.0:
                v[slot] = 0.0
            else:
                v[slot] = gains[sid] * delayed(k + c - tau_steps[sid])
        u_at_step[k] = v[1]
        z = Phi @ z + Q @ v
        xa[k + 1] = z[0]
        va[k + 1] = z[m]
        if (k + 1) % every == 0:
            x_rec[ri], v_rec[ri] = z[:m], z[m:]
            ri += 1
        if (k + 1) % check == 0 or k + 1 == nsteps:
            peak = float(np.max(np.abs(z[:m])))
            if not peak <= DIVERGENCE_LIMIT:
                raise DivergenceError((k + 1) * h, peak)

    last = seg_half[2 * nsteps]
    if last >= 0 and gains[last] != 0.0:
        u_at_step[nsteps] = gains[last] * delayed(nsteps - tau_steps[last])
    t = rec_idx * h
    u_rec = u_at_step[rec_idx]
    if q > 0:
        x_rec = q * np.round(x_rec / q)
    events = []
    for i, seg in enumerate(segs):
        name = seg.label or f"segment {i}"
        events.append((seg.t_start, f"{name} on"))
        events.append((seg.t_end, f"{name} off"))
    if scenario.force.F > 0:
        events.append((scenario.force.t_on, "force on"))
        if math.isfinite(scenario.force.t_off):
            events.append((scenario.force.t_off, "force off"))
    events.sort()
    return SimulationTrace(t, x_rec, u_rec, f_half[2 * rec_idx], seg_half[2 * rec_idx],
                           events, scenario.force.omega_hz, v_rec)


def steady_state_amplitude(trace: SimulationTrace, coordinate, window: tuple[float, float],
                           min_periods: float = 3.0, settle: float = 1.0 / 3.0) -> float:
    """Half peak-to-peak over ``window`` after skipping its first ``settle`` fraction."""
    t0, t1 = map(float, window)
    if not (trace.t[0] - 1e-12 <= t0 < t1 <= trace.t[-1] + 1e-12):
        raise ValueError(f"window {window} not inside trace [{trace.t[0]}, {trace.t[-1]}]")
    if trace.force_omega_hz > 0 and (t1 - t0) * trace.force_omega_hz < min_periods:
        raise ValueError(f"window {window} shorter than {min_periods} forcing periods")
    if not 0.0 <= settle < 1.0:
        raise ValueError("settle must lie in [0, 1)")
    start = t0 + (t1 - t0) * settle
    sel = (trace.t >= start - 1e-12) & (trace.t <= t1 + 1e-12)
    y = trace.column(coordinate)[sel]
    if y.size == 0:
        raise ValueError("window contains no samples")
    return 0.5 * float(y.max() - y.min())


def schedule(system: SecondOrderSystem, force: Force, windows, duration: float,
             dt: float = DT_DEFAULT, **kw) -> Scenario:
    """Scenario from ``[(t_start, t_end, DrTuning | None, label), ...]``."""
    segs = [Segment(a, b, tun, lab) for a, b, tun, lab in windows]
    return Scenario(system, force, segs, duration, dt, **kw)
