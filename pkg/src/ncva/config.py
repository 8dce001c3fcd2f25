"""
JSON configuration for chains and simulation scenarios.

A config file is one JSON object.  Chain keys sit at the top level::

    {
      "masses": [1.175, 0.509, 0.705],
      "stiffnesses": [1001, 749, 711, 950],
      "dampings": [4.35, 0.85, 1.85, 4.95],
      "absorber": {"m": 0.520, "k": 407, "c": 1.80},
      "p": 1, "n": 1, "dist": 3,
      "scenario": {...}
    }

The optional ``scenario`` object drives ``simulate``::

    {
      "force": {"F": 3.0, "omega_hz": 4.2, "t_on": 5.0, "t_off": null},
      "segments": [
        {"t_start": 15, "t_end": 30, "n": 1, "family": "negative", "k": 1},
        {"t_start": 40, "t_end": 55, "g": -124.14, "tau": 0.016457}
      ],
      "duration": 86.0, "dt": 1e-4,
      "sensor_quantization": 0.0, "quantized_feedback": false,
      "record_every": 1,
      "initial_state": {"x": [...], "v": [...]}
    }

A segment is tuned either from ``n``/``family``/``k`` (at the force
frequency unless ``omega_hz`` is given) or from an explicit ``g``/``tau``.
A segment with neither is passive.  Every error names the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .chain import ChainModel, ModelError, SecondOrderSystem, build_system
from .simulate import DT_DEFAULT, Force, Scenario, Segment
from .substructure import decompose
from .tuning import DrTuning, parse_family, tune

CHAIN_KEYS = ("masses", "stiffnesses", "dampings", "absorber", "p", "n", "dist")


class ConfigError(ValueError):
    """Schema violation; ``field`` is a dotted path into the document."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class Config:
    path: str | None
    raw: dict
    model: ChainModel
    system: SecondOrderSystem


def _number(obj: dict, key: str, where: str, default=None, *, minimum=None, strict=False):
    if obj.get(key) is None:
        if default is None:
            raise ConfigError(f"{where}{key}", "required number is missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}{key}", f"expected a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}{key}", "must be finite")
    if minimum is not None and (v <= minimum if strict else v < minimum):
        raise ConfigError(f"{where}{key}", f"must be {'>' if strict else '>='} {minimum}")
    return v


def _integer(obj: dict, key: str, where: str, default=None):
    v = obj.get(key, default)
    if v is None:
        raise ConfigError(f"{where}{key}", "required integer is missing")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}{key}", f"expected an integer, got {v!r}")
    return v


def _number_list(obj: dict, key: str, where: str = "") -> list[float]:
    v = obj.get(key)
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}{key}", "expected a non-empty list of numbers")
    out = []
    for i, item in enumerate(v):
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not math.isfinite(item):
            raise ConfigError(f"{where}{key}[{i}]", f"expected a finite number, got {item!r}")
        out.append(float(item))
    return out


def parse_chain(doc: dict) -> ChainModel:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    masses = _number_list(doc, "masses")
    for i, m in enumerate(masses):
        if m <= 0:
            raise ConfigError(f"masses[{i}]", "mass must be strictly positive")
    stiff = _number_list(doc, "stiffnesses")
    damp = _number_list(doc, "dampings")
    for name, vals in (("stiffnesses", stiff), ("dampings", damp)):
        if len(vals) != len(masses) + 1:
            raise ConfigError(name, f"expected {len(masses) + 1} entries (one more than masses)")
        for i, v in enumerate(vals):
            if v < 0:
                raise ConfigError(f"{name}[{i}]", "must be nonnegative")
    ab = doc.get("absorber")
    if not isinstance(ab, dict):
        raise ConfigError("absorber", "expected an object {m, k, c}")
    absorber = (_number(ab, "m", "absorber.", minimum=0.0, strict=True),
                _number(ab, "k", "absorber.", minimum=0.0),
                _number(ab, "c", "absorber.", minimum=0.0))
    p = _integer(doc, "p", "", 1)
    n = _integer(doc, "n", "", p)
    dist = _integer(doc, "dist", "", len(masses))
    try:
        return ChainModel(masses, stiff, damp, absorber, p, n, dist)
    except ModelError as exc:
        raise ConfigError("chain", str(exc)) from exc


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(doc, str(path))


def config_from_dict(doc: dict, path: str | None = None) -> Config:
    model = parse_chain(doc)
    return Config(path, doc, model, build_system(model))


def _segment_tuning(seg: dict, where: str, system: SecondOrderSystem,
                    force_hz: float) -> DrTuning | None:
    has_n = "n" in seg
    has_g = "g" in seg or "tau" in seg
    if has_n and has_g:
        raise ConfigError(where.rstrip("."), "give either n/family/k or g/tau, not both")
    if has_g:
        g = _number(seg, "g", where)
        tau = _number(seg, "tau", where, minimum=0.0)
        w = 2.0 * math.pi * _number(seg, "omega_hz", where, force_hz, minimum=0.0, strict=True)
        return DrTuning(g, tau, "explicit", 0, w, math.nan)
    if not has_n:
        return None
    n = _integer(seg, "n", where)
    try:
        fam = parse_family(seg.get("family", "negative"))
    except ValueError as exc:
        raise ConfigError(f"{where}family", str(exc)) from exc
    k = _integer(seg, "k", where, 0)
    if k < 0:
        raise ConfigError(f"{where}k", "must be >= 0")
    f_hz = _number(seg, "omega_hz", where, force_hz, minimum=0.0, strict=True)
    try:
        rs = decompose(system, n)
    except ModelError as exc:
        raise ConfigError(f"{where}n", str(exc)) from exc
    t = tune(rs, 2.0 * math.pi * f_hz, fam, k)
    if t.degenerate:
        raise ConfigError(f"{where}n", "degenerate: zero gain (passive substructure resonant)")
    return t


def parse_scenario(cfg: Config, overrides: dict | None = None) -> Scenario:
    doc = dict(cfg.raw.get("scenario") or {})
    doc.update(overrides or {})
    if not doc:
        raise ConfigError("scenario", "config has no scenario section")
    fo = doc.get("force")
    if not isinstance(fo, dict):
        raise ConfigError("scenario.force", "expected an object {F, omega_hz, t_on, t_off}")
    force = Force(
        _number(fo, "F", "scenario.force.", minimum=0.0),
        _number(fo, "omega_hz", "scenario.force.", minimum=0.0, strict=True),
        _number(fo, "t_on", "scenario.force.", 0.0, minimum=0.0),
        _number(fo, "t_off", "scenario.force.", math.inf, minimum=0.0),
    )
    duration = _number(doc, "duration", "scenario.", minimum=0.0, strict=True)
    dt = _number(doc, "dt", "scenario.", DT_DEFAULT, minimum=0.0, strict=True)
    segs_raw = doc.get("segments", [])
    if not isinstance(segs_raw, list):
        raise ConfigError("scenario.segments", "expected a list")
    segments = []
    for i, seg in enumerate(segs_raw):
        where = f"scenario.segments[{i}]."
        if not isinstance(seg, dict):
            raise ConfigError(where.rstrip("."), "expected an object")
        a = _number(seg, "t_start", where, minimum=0.0)
        b = _number(seg, "t_end", where, minimum=0.0)
        tun = _segment_tuning(seg, where, cfg.system, force.omega_hz)
        segments.append(Segment(a, b, tun, str(seg.get("label", ""))))
    quant = _number(doc, "sensor_quantization", "scenario.", 0.0, minimum=0.0)
    qfb = doc.get("quantized_feedback", False)
    if not isinstance(qfb, bool):
        raise ConfigError("scenario.quantized_feedback", "expected true or false")
    every = _integer(doc, "record_every", "scenario.", 1)
    if every < 1:
        raise ConfigError("scenario.record_every", "must be >= 1")
    size = cfg.system.d + 1
    x0 = v0 = None
    init = doc.get("initial_state")
    if init is not None:
        if not isinstance(init, dict):
            raise ConfigError("scenario.initial_state", "expected an object {x, v}")
        for key in ("x", "v"):
            if key in init:
                vals = _number_list(init, key, "scenario.initial_state.")
                if len(vals) != size:
                    raise ConfigError(f"scenario.initial_state.{key}",
                                      f"expected {size} entries [x_a, x_1..x_d]")
                if key == "x":
                    x0 = np.array(vals)
                else:
                    v0 = np.array(vals)
    return Scenario(cfg.system, force, segments, duration, dt, quant, qfb, x0, v0, every)


def segment_record(seg: Segment, system: SecondOrderSystem) -> dict:
    """JSON-ready description of a resolved segment."""
    out: dict[str, Any] = {"t_start": seg.t_start, "t_end": seg.t_end, "label": seg.label}
    t = seg.tuning
    if t is None:
        out["mode"] = "passive"
        return out
    out.update(mode="tuned", g=t.g, tau=t.tau, family=t.family, k=t.k,
               omega_hz=t.omega_hz, omega_rad_s=t.omega)
    if t.family == "explicit":
        out["residual"] = None
    else:
        out["residual"] = t.residual
    return out


__all__ = ["ConfigError", "Config", "CHAIN_KEYS", "load_config", "config_from_dict",
           "parse_chain", "parse_scenario", "segment_record"]
