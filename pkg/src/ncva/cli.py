"""
Command-line workbench: ``ncva [--config PATH] [--out DIR] [--format csv|json] COMMAND``.

Commands are ``tune``, ``sweep``, ``bode``, ``simulate`` and ``verify``.
Exit codes: 0 success, 1 config or usage error, 2 degenerate tuning,
3 simulation divergence, 4 a ``verify`` check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg as la

from . import __version__
from .chain import ModelError, SecondOrderSystem, hz_to_rad
from .config import Config, ConfigError, load_config, parse_scenario, segment_record
from .freqresp import PoleError, passive_transfer, response_curve, transfer_at
from .simulate import DivergenceError, ScenarioError, simulate, steady_state_amplitude
from .substructure import check_proposition1, closed_loop, decompose
from .spectrum import Region, spectrum
from .sweep import cross_target_intersection, default_grid, sweep_admissible
from .tuning import NEGATIVE, FAMILIES, enumerate_tunings, parse_family, tune

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4
WINDOW_S = 5.0


class UsageError(Exception):
    pass


class DegenerateTuning(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return "" if v is None else str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    buf.write(f"# ncva {__version__}\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        self.out = Path(args.out) if args.out else None
        self.files: list[str] = []
        self.params: dict = {}
        self.t0 = time.perf_counter()
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, primary: bool = False):
        if self.out:
            path = self.out / name
            path.write_text(text)
            self.files.append(str(path))
        elif primary:
            sys.stdout.write(text)

    def finish(self):
        if not self.out:
            return
        manifest = {
            "command": self.command,
            "config": self.args.config,
            "parameters": self.params,
            "outputs": sorted(self.files) + [str(self.out / "manifest.json")],
            "version": __version__,
            "wall_time_s": time.perf_counter() - self.t0,
        }
        (self.out / "manifest.json").write_text(json_text(manifest))


def _config(args) -> Config:
    if not args.config:
        raise UsageError("--config is required for this command")
    return load_config(args.config)


def _freq_record(omega_hz: float) -> dict:
    return {"omega_hz": omega_hz, "omega_rad_s": hz_to_rad(omega_hz)}


# ---------------------------------------------------------------- commands


def cmd_tune(args) -> int:
    cfg = _config(args)
    n = cfg.model.n if args.n is None else args.n
    rs = decompose(cfg.system, n)
    w = hz_to_rad(args.f)
    if args.k_max is not None:
        tunings = enumerate_tunings(rs, w, args.k_max)
    else:
        tunings = [tune(rs, w, args.family, args.k)]
    if any(t.degenerate for t in tunings):
        raise DegenerateTuning(f"target {n} at {args.f} Hz")
    recs = []
    for t in tunings:
        r = t.to_dict()
        r.update(n=n, omega_rad_s=t.omega)
        recs.append(r)
    run = Run(args, "tune")
    run.params = {"n": n, "f_hz": args.f, "family": args.family, "k": args.k, "k_max": args.k_max}
    cols = ["omega_hz", "omega_rad_s", "n", "family", "k", "g", "tau", "residual", "requested_k"]
    if args.format == "csv":
        text = csv_text(cols, [[r[c] for c in cols] for r in recs])
        run.emit("tune.csv", text, primary=True)
    else:
        text = json_text(recs if args.k_max is not None else recs[0])
        run.emit("tune.json", text, primary=True)
    run.finish()
    return EXIT_OK


def _grid(args):
    if args.grid is None:
        return default_grid()
    lo, hi, step = args.grid
    if not (0 < lo < hi and step > 0):
        raise UsageError("--grid needs 0 < LO < HI and STEP > 0")
    return default_grid(lo, hi, step)


def _parse_assign(items) -> dict:
    out = {}
    for item in items or []:
        try:
            n, k = item.split(":")
            out[int(n)] = [(NEGATIVE, int(k))]
        except ValueError as exc:
            raise UsageError(f"--assign expects N:K pairs, got {item!r}") from exc
    return out


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if not args.n:
        raise UsageError("sweep needs at least one target (--n 1 2 3)")
    if not args.k:
        raise UsageError("sweep needs at least one branch index (--k 0 1)")
    families = [parse_family(f) for f in args.family]
    grid = _grid(args)
    results = {}
    for n in args.n:
        results[n] = sweep_admissible(cfg.system, n, families, args.k, grid, certify=args.certify)
    report = {"targets": {}, "grid_hz": [float(grid[0]), float(grid[-1]), len(grid)]}
    for n, res in results.items():
        report["targets"][str(n)] = {
            f"{fam}:k={k}": [list(iv) for iv in ivs]
            for (fam, k), ivs in sorted(res.admissible_intervals.items())
        }
    if len(results) > 1:
        inter = {"any_branch": cross_target_intersection(results)}
        for fam in families:
            for k in args.k:
                inter[f"{fam}:k={k}"] = cross_target_intersection(
                    results, {n: [(fam, k)] for n in results})
        assign = _parse_assign(args.assign)
        if assign:
            missing = set(results) - set(assign)
            if missing:
                raise UsageError(f"--assign misses targets {sorted(missing)}")
            if any(key not in results[n].branches for n, keys in assign.items() for key in keys):
                raise UsageError("--assign uses a branch index not listed in --k")
            inter["assigned"] = cross_target_intersection(results, assign)
        report["intersection"] = {key: [list(iv) for iv in v] for key, v in inter.items()}
    header = ["omega_hz", "family", "k", "g", "tau", "alpha_rs", "alpha_os", "admissible", "target"]
    rows = []
    for n, res in results.items():
        for r in res.rows():
            rows.append([r["omega_hz"], r["family"], r["k"], r["g"], r["tau"],
                         r["alpha_rs"], r["alpha_os"], r["admissible"], n])
    run = Run(args, "sweep")
    run.params = {"n": args.n, "k": args.k, "family": families, "grid": report["grid_hz"],
                  "certify": args.certify, "assign": args.assign}
    run.emit("sweep.csv", csv_text(header, rows), primary=args.format == "csv")
    run.emit("sweep_intervals.json", json_text(report), primary=args.format == "json")
    run.finish()
    return EXIT_OK


def cmd_bode(args) -> int:
    cfg = _config(args)
    n = cfg.model.n if args.n is None else args.n
    decompose(cfg.system, n)
    g = tau = 0.0
    tun = None
    if args.mode == "tuned":
        if args.f is None:
            raise UsageError("--mode tuned needs the design frequency --f")
        tun = tune(decompose(cfg.system, n), hz_to_rad(args.f), args.family, args.k)
        if tun.degenerate:
            raise DegenerateTuning(f"target {n} at {args.f} Hz")
        g, tau = tun.g, tun.tau
    run = Run(args, "bode")
    run.params = {"n": n, "mode": args.mode, "f_hz": args.f, "family": args.family, "k": args.k}
    if args.at is not None:
        w = hz_to_rad(args.at)
        try:
            val = abs(transfer_at(cfg.system, n, g, tau, w))
        except PoleError as exc:
            raise UsageError(str(exc)) from exc
        ref = abs(passive_transfer(cfg.system, n, w))
        rec = {**_freq_record(args.at), "magnitude_m_per_N": val, "passive_m_per_N": ref,
               "relative": val / ref if ref > 0 else None, "target": n, "mode": args.mode,
               "g": g, "tau": tau}
        if args.format == "csv":
            cols = ["omega_hz", "omega_rad_s", "magnitude_m_per_N", "passive_m_per_N",
                    "relative", "target", "mode"]
            run.emit("bode_point.csv", csv_text(cols, [[rec[c] for c in cols]]), primary=True)
        else:
            run.emit("bode_point.json", json_text(rec), primary=True)
        run.finish()
        return EXIT_OK
    if args.grid is None:
        grid = None
    else:
        lo, hi, count = args.grid
        if not (0 < lo < hi and count >= 2):
            raise UsageError("--grid needs 0 < LO < HI and COUNT >= 2")
        grid = np.logspace(math.log10(lo), math.log10(hi), int(count))
    curve = response_curve(cfg.system, n, g, tau, grid)
    rows = [[f, m, n, curve.mode] for f, m in zip(curve.grid, curve.magnitude)]
    name = f"bode_n{n}_{curve.mode}"
    if args.format == "csv":
        run.emit(name + ".csv", csv_text(["omega_hz", "magnitude_m_per_N", "target", "mode"], rows),
                 primary=True)
    else:
        rec = {"target": n, "mode": curve.mode, "g": g, "tau": tau,
               "omega_hz": curve.grid, "omega_rad_s": hz_to_rad(curve.grid),
               "magnitude_m_per_N": curve.magnitude,
               "local_minima_hz": curve.local_minima()}
        if tun is not None:
            rec["tuning"] = tun.to_dict()
        run.emit(name + ".json", json_text(rec), primary=True)
    run.finish()
    return EXIT_OK


def window_metrics(trace, scenario, window_s: float = WINDOW_S) -> list[dict]:
    """Steady-state amplitudes over the last ``window_s`` of every schedule phase."""
    bounds = sorted({0.0, scenario.duration,
                     *[t for s in scenario.segments for t in (s.t_start, s.t_end)
                       if 0.0 < t < scenario.duration]})
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b <= scenario.force.t_on or b - a < window_s:
            continue
        w0 = b - window_s
        if (b - w0) * scenario.force.omega_hz < 3.0:
            continue
        active = [i for i, s in enumerate(scenario.segments) if s.t_start <= a and b <= s.t_end]
        sid = active[0] if active else -1
        seg = scenario.segments[sid] if sid >= 0 else None
        amps = {("x_a" if c == 0 else f"x_{c}"):
                steady_state_amplitude(trace, c, (w0, b), settle=0.0)
                for c in range(trace.d + 1)}
        out.append({"window": [w0, b], "phase": [a, b], "segment_id": sid,
                    "mode": "tuned" if seg is not None and seg.g != 0.0 else "passive",
                    "label": seg.label if seg is not None else "",
                    "amplitude_m": amps})
    return out


def cmd_simulate(args) -> int:
    cfg = _config(args)
    overrides = {}
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.dt is not None:
        overrides["dt"] = args.dt
    sc = parse_scenario(cfg, overrides)
    trace = simulate(sc)
    d = cfg.system.d
    header = ["t", "x_a", *[f"x_{i}" for i in range(1, d + 1)], "u", "f", "segment_id"]
    rows = (list(r) for r in zip(trace.t, *trace.x.T, trace.u, trace.f, trace.segment_id))
    metrics = {
        "force": {"F": sc.force.F, **_freq_record(sc.force.omega_hz), "t_on": sc.force.t_on,
                  "t_off": sc.force.t_off},
        "duration": sc.duration, "dt": sc.dt, "samples": int(trace.t.size),
        "segments": [segment_record(s, cfg.system) for s in sc.segments],
        "windows": window_metrics(trace, sc),
        "events": [[t, e] for t, e in trace.events],
    }
    run = Run(args, "simulate")
    run.params = {"duration": sc.duration, "dt": sc.dt, "record_every": sc.record_every}
    run.emit("trace.csv", csv_text(header, rows), primary=args.format == "csv")
    run.emit("metrics.json", json_text(metrics), primary=args.format == "json")
    run.finish()
    return EXIT_OK


def _check(name, passed, **info) -> dict:
    return {"check": name, "passed": bool(passed), **info}


def verify_checks(system: SecondOrderSystem, freqs_hz, k_max: int = 1) -> list[dict]:
    """The invariant suite behind ``verify``, as a list of check records."""
    checks = []
    # delay-free spectrum against the dense linearized pencil
    m = system.d + 1
    Z, I = np.zeros((m, m)), np.eye(m)
    ref = la.eig(np.block([[Z, I], [-system.K, -system.C]]),
                 np.block([[I, Z], [Z, system.M]]), right=False)
    rep = spectrum(system, 0.0, 0.0, _wide_region(ref))
    err = _set_distance(np.sort_complex(rep.roots), np.sort_complex(ref))
    checks.append(_check("passive spectrum vs pencil eigenvalues", err <= 1e-9, max_error=err))
    # (R,V)/(V,R) blocks of R(s) vanish
    for n in range(system.p, system.dist + 1):
        R = closed_loop(system, 1.0, 0.1)(0.3 + 2.0j)
        off = max(np.abs(R[:n, n + 1:]).max(initial=0.0), np.abs(R[n + 1:, :n]).max(initial=0.0))
        checks.append(_check(f"block structure n={n}", off == 0.0, max_entry=off))
    for f in freqs_hz:
        w = hz_to_rad(f)
        for n in range(system.p, system.dist + 1):
            rs = decompose(system, n)
            for t in enumerate_tunings(rs, w, k_max, FAMILIES):
                tag = f"n={n} f={f} {t.family} k={t.k}"
                if t.degenerate:
                    checks.append(_check(f"tuning {tag}", True, note="degenerate: zero gain"))
                    continue
                checks.append(_check(f"tuning residual {tag}", t.residual <= 1e-10,
                                     residual=t.residual))
                ratio = abs(transfer_at(system, n, t.g, t.tau, w)) / abs(passive_transfer(system, n, w))
                checks.append(_check(f"zero assignment {tag}", ratio <= 1e-10, ratio=ratio))
                rep = check_proposition1(system, t.g, t.tau, w, n=n)
                checks.append(_check(f"resonant poles are transfer zeros {tag}", rep.passed,
                                     max_z=rep.max_z, roots=int(rep.roots.size),
                                     message=rep.message))
    return checks


def _wide_region(ref) -> Region:
    return Region(re_min=float(ref.real.min()) - 1.0, re_max=float(ref.real.max()) + 1.0,
                  im_max=float(np.abs(ref.imag).max()) + 1.0)


def _set_distance(a, b) -> float:
    if a.size != b.size:
        return math.inf
    return float(max(np.abs(x - b).min() for x in a)) if a.size else 0.0


def cmd_verify(args) -> int:
    cfg = _config(args)
    freqs = args.f
    if not freqs:
        sc = cfg.raw.get("scenario") or {}
        f = (sc.get("force") or {}).get("omega_hz")
        if f is None:
            raise UsageError("verify needs --f or a scenario.force.omega_hz in the config")
        freqs = [float(f)]
    checks = verify_checks(cfg.system, freqs, args.k_max)
    ok = all(c["passed"] for c in checks)
    run = Run(args, "verify")
    run.params = {"f_hz": freqs, "k_max": args.k_max}
    if args.format == "csv":
        text = csv_text(["check", "passed"], [[c["check"], c["passed"]] for c in checks])
        run.emit("verify.csv", text, primary=True)
    else:
        run.emit("verify.json", json_text({"passed": ok, "checks": checks}), primary=True)
    run.finish()
    for c in checks:
        if not c["passed"]:
            print(f"FAIL {c['check']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------- parser


def _global_flags(p, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=default, help="chain/scenario JSON file")
    p.add_argument("--out", default=default, help="directory for output files and manifest")
    p.add_argument("--format", choices=("csv", "json"),
                   default=argparse.SUPPRESS if suppress else "json",
                   help="stdout format when --out is not given")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ncva", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ncva {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("tune", "gain/delay for one target and design frequency")
    p.add_argument("--n", type=int, help="target mass index (default: config n)")
    p.add_argument("--f", type=float, required=True, help="design frequency, Hz")
    p.add_argument("--family", type=parse_family, default=NEGATIVE)
    p.add_argument("--k", type=int, default=0, help="branch index")
    p.add_argument("--k-max", type=int, help="list both families for k = 0..K_MAX instead")
    p.set_defaults(func=cmd_tune)

    p = add("sweep", "admissible design-frequency intervals")
    p.add_argument("--n", type=int, nargs="*", required=True, help="target indices")
    p.add_argument("--k", type=int, nargs="*", default=[0, 1], help="branch indices")
    p.add_argument("--family", type=parse_family, nargs="+", default=[NEGATIVE])
    p.add_argument("--grid", type=float, nargs=3, metavar=("LO", "HI", "STEP"),
                   help="grid in Hz (default 2 12 0.05)")
    p.add_argument("--assign", nargs="*", metavar="N:K",
                   help="negative-family branch per target for the intersection report")
    p.add_argument("--certify", action="store_true",
                   help="certify every point by collocation convergence and root counting")
    p.set_defaults(func=cmd_sweep)

    p = add("bode", "amplitude response |P| of one target")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=("passive", "tuned"), default="passive")
    p.add_argument("--f", type=float, help="design frequency for --mode tuned, Hz")
    p.add_argument("--family", type=parse_family, default=NEGATIVE)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--grid", type=float, nargs=3, metavar=("LO", "HI", "COUNT"),
                   help="log-spaced grid in Hz (default 2 12 1000)")
    p.add_argument("--at", type=float, help="single-frequency query, Hz")
    p.set_defaults(func=cmd_bode)

    p = add("simulate", "time-domain run of the config scenario")
    p.add_argument("--duration", type=float, help="override scenario.duration, s")
    p.add_argument("--dt", type=float, help="override scenario.dt, s")
    p.set_defaults(func=cmd_simulate)

    p = add("verify", "invariant suite on the config")
    p.add_argument("--f", type=float, nargs="*", help="design frequencies, Hz")
    p.add_argument("--k-max", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateTuning as exc:
        print(f"degenerate: zero gain ({exc})", file=sys.stderr)
        return EXIT_DEGENERATE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ModelError, ScenarioError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
