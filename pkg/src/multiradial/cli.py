"""Command-line front end: ``multiradial <subcommand> [options]``.

Every parameter has a default below.  An INI file (``--config``) overrides
the defaults, ``--set section.key=value`` overrides the file, and the
dedicated flags (``--seed``, ``--workers``, ``--out-dir``) override both.
Exit codes: 0 success, 1 runtime error, 2 configuration or input error,
3 acceptance failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import re
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circle_core import TWO_PI, AngleConfiguration
from .path_model import DrivingPath, PathError

ENV_OUT_DIR = "MULTIRADIAL_OUT_DIR"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2, 3

DEFAULTS = {
    "run": {"seed": "0", "workers": "1", "out_dir": ""},
    "simulate": {
        "n": "2", "kappa": "1.0", "theta0": "", "T": "1.0", "dt": "1e-3", "a": "4.0", "rho": "0.0",
        "ensemble": "100", "eps": "", "method": "direct", "max_halvings": "10",
    },
    "energy": {"path": "", "kappa": "0.0", "a": "4.0", "rho": "0.0"},
    "flow": {"n": "2", "theta0": "", "T": "3.0", "step": "1e-3", "a": "4.0", "rho": "0.0"},
    "trace": {"n": "1", "theta0": "", "driver": "", "T": "1.0", "step": "1e-3", "samples": "101", "y0": "1e-4"},
    "hull": {"n": "1", "theta0": "", "driver": "", "T": "0.5", "step": "1e-3", "radial": "96", "angular": "192"},
    "ldp": {
        "event": "sup_ball", "n": "2", "theta0": "", "T": "0.5", "radius": "0.5", "eps": "0.2", "target": "",
        "kappas": "1, 0.5, 0.25, 0.125", "ensemble": "2000", "dt": "1e-3", "a": "4.0", "methods": "direct, weighted",
        "steps": "200", "starts": "4",
    },
    "check": {"ensemble": "20000", "only": ""},
}
FORMATS = {
    "simulate": ("csv", "json"),
    "energy": ("json", "csv"),
    "flow": ("json", "csv"),
    "trace": ("csv", "json", "svg"),
    "hull": ("csv", "json", "svg"),
    "ldp": ("csv", "json"),
    "check": ("json",),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


class Config:
    """Resolved parameters plus the line of every key that came from a file."""

    def __init__(self, path: str | None, overrides: list[str]):
        self.values = {s: dict(kv) for s, kv in DEFAULTS.items()}
        self.origin = {}
        self.source = path
        if path:
            self._read(path)
        for item in overrides:
            m = re.fullmatch(r"\s*([A-Za-z_]+)\.([A-Za-z_0-9]+)\s*=(.*)", item)
            if not m:
                raise ConfigError(f"--set {item!r}: expected section.key=value")
            sec, key, val = m.group(1), m.group(2), m.group(3).strip()
            self._store(sec, key, val, f"--set {item!r}")

    def _read(self, path: str):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=path)
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:1: expected a [section] header, got {exc.line.strip()!r}") from None
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0] if exc.errors else (0, "")
            raise ConfigError(f"{path}:{lineno}:1: cannot parse {line.strip()!r}") from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:1: duplicate section [{exc.section}]") from None
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:1: duplicate key {exc.option!r} in [{exc.section}]") from None
        lines = _key_lines(text)
        for sec in cp.sections():
            for key, val in cp.items(sec):
                where = lines.get((sec, key), (0, 1))
                self._store(sec, key, val, f"{path}:{where[0]}:{where[1]}")

    def _store(self, sec, key, val, where):
        if sec not in self.values:
            raise ConfigError(f"{where}: unknown section [{sec}]")
        if key not in self.values[sec]:
            raise ConfigError(f"{where}: unknown key {key!r} in [{sec}]")
        self.values[sec][key] = val
        self.origin[(sec, key)] = where

    def where(self, sec, key) -> str:
        return self.origin.get((sec, key), f"default {sec}.{key}")

    def raw(self, sec, key) -> str:
        return self.values[sec][key]

    def get(self, sec, key, conv):
        raw = self.values[sec][key]
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.where(sec, key)}: {sec}.{key} = {raw!r}: {exc}") from None

    def snapshot(self, sections) -> dict:
        return {s: dict(self.values[s]) for s in sections}


def _key_lines(text: str) -> dict:
    out, sec = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip()
        elif sec and s and s[0] not in "#;":
            m = re.match(r"([^=:\s]+)\s*[=:]", s)
            if m:
                out[(sec, m.group(1))] = (i, line.index(m.group(1)) + 1)
    return out


_PI = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?$")


def parse_real(s: str) -> float:
    """A float, or a multiple of pi such as ``pi/2``, ``2pi/3``, ``-0.5*pi``."""
    s = s.strip()
    m = _PI.match(s)
    if m:
        c = m.group(1)
        coef = 1.0 if c in ("", "+") else -1.0 if c == "-" else float(c)
        return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def parse_list(s: str) -> list[float]:
    return [parse_real(x) for x in s.split(",") if x.strip()]


def positive(v: float) -> float:
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _int(s):
    return int(s.strip())


def _angles(cfg: Config, sec: str, n: int) -> np.ndarray:
    raw = cfg.raw(sec, "theta0").strip()
    if not raw:
        return TWO_PI * np.arange(n) / n
    th = np.array(cfg.get(sec, "theta0", parse_list))
    if th.size != n:
        raise ConfigError(f"{cfg.where(sec, 'theta0')}: {sec}.theta0 has {th.size} angles but n={n}")
    try:
        AngleConfiguration(th)
    except ValueError as exc:
        raise ConfigError(f"{cfg.where(sec, 'theta0')}: {sec}.theta0 violates cyclic ordering: {exc}") from None
    return th


def _driver(cfg: Config, sec: str) -> DrivingPath:
    src = cfg.raw(sec, "driver").strip()
    if src:
        try:
            return DrivingPath.from_csv(src)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{src}: {exc}") from None
    n = cfg.get(sec, "n", _int)
    T = cfg.get(sec, "T", lambda s: positive(parse_real(s)))
    step = cfg.get(sec, "step", lambda s: positive(parse_real(s)))
    return DrivingPath.constant(_angles(cfg, sec, n), T, step)


# ---------------------------------------------------------------- outputs


class Output:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def write(self, name: str, text: str):
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
        self.files.append(name)

    def adopt(self, names):
        self.files.extend(names)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _num(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _cell(x) -> str:
    v = _num(x)
    return v if isinstance(v, str) else repr(v)


# ---------------------------------------------------------------- subcommands


def build_simulate(cfg: Config, seed: int):
    from .sde_sim import SimulationConfig

    s = "simulate"
    n = cfg.get(s, "n", _int)
    eps_raw = cfg.raw(s, "eps").strip()
    method = cfg.raw(s, "method").strip()
    if method not in ("direct", "weighted"):
        raise ConfigError(f"{cfg.where(s, 'method')}: simulate.method must be direct or weighted")
    try:
        sc = SimulationConfig(
            n=n,
            kappa=cfg.get(s, "kappa", parse_real),
            theta0=tuple(_angles(cfg, s, n)),
            T=cfg.get(s, "T", parse_real),
            dt=cfg.get(s, "dt", parse_real),
            a=cfg.get(s, "a", parse_real),
            rho=cfg.get(s, "rho", parse_real),
            seed=seed,
            ensemble=cfg.get(s, "ensemble", _int),
            eps=cfg.get(s, "eps", parse_real) if eps_raw else None,
            max_halvings=cfg.get(s, "max_halvings", _int),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[simulate]: {exc}") from None
    return sc, method


def run_simulate(cfg, seed, workers, fmt, out: Output):
    from .sde_sim import simulate_dyson, simulate_weighted

    sc, method = build_simulate(cfg, seed)
    if method == "weighted" and (sc.kappa <= 0 or sc.kappa > 2 * sc.a or sc.rho != 0):
        raise ConfigError("[simulate]: weighted method needs 0 < kappa <= 2a and rho = 0")
    yield
    ens = (simulate_dyson if method == "direct" else simulate_weighted)(sc, workers)
    if fmt == "csv":
        out.adopt([f"paths/{f}" for f in ens.write(out.root / "paths")])
    else:
        man = ens.manifest()
        man["times"] = [float(t) for t in ens.times]
        man["paths"] = [[[_num(v) for v in row] for row in member] for member in ens.states]
        man["collision_times"] = [_num(t) for t in ens.collision_times]
        out.write("ensemble.json", _dump(man))


def run_energy(cfg, seed, workers, fmt, out: Output):
    from .energy import energy_report

    s = "energy"
    src = cfg.raw(s, "path").strip()
    if not src:
        raise ConfigError("[energy]: path is required (a CSV driving path)")
    try:
        p = DrivingPath.from_csv(src)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{src}: {exc}") from None
    kappa = cfg.get(s, "kappa", parse_real)
    a = cfg.get(s, "a", lambda v: positive(parse_real(v)))
    rho = cfg.get(s, "rho", parse_real)
    if kappa < 0:
        raise ConfigError(f"{cfg.where(s, 'kappa')}: energy.kappa must be nonnegative")
    yield
    rep = energy_report(p, kappa, a, rho)
    if fmt == "json":
        out.write("energy_report.json", rep.to_json())
    else:
        rows = ["t0,t1,dE,dJ,dPhi"] + [",".join(repr(float(v)) for v in r) for r in rep.per_interval]
        out.write("energy_intervals.csv", "\n".join(rows) + "\n")
        out.write(
            "energy_summary.csv",
            "dirichlet_E,multiradial_J,phi_kappa_a,residual\n"
            + ",".join(_cell(getattr(rep, k)) for k in ("dirichlet_E", "multiradial_J", "phi_functional", "decomposition_residual"))
            + "\n",
        )


def run_flow(cfg, seed, workers, fmt, out: Output):
    from .cm_flow import convergence_report, zero_energy_flow
    from .energy import energy_series

    s = "flow"
    n = cfg.get(s, "n", _int)
    th0 = _angles(cfg, s, n)
    T = cfg.get(s, "T", lambda v: positive(parse_real(v)))
    step = cfg.get(s, "step", lambda v: positive(parse_real(v)))
    a = cfg.get(s, "a", lambda v: positive(parse_real(v)))
    rho = cfg.get(s, "rho", parse_real)
    yield
    p = zero_energy_flow(th0, T, step, a, rho)
    rep = convergence_report(p, energy_series(p, a, rho))
    out.write("flow_path.csv", p.to_csv())
    if fmt == "json":
        out.write("convergence.json", rep.to_json())
    else:
        rows = ["t,d,delta,bound"] + [
            f"{float(t)!r},{float(d)!r},{float(dl)!r},{float(b)!r}"
            for t, d, dl, b in zip(rep.times, rep.d_series, rep.delta_series, rep.bound_series)
        ]
        out.write("convergence.csv", "\n".join(rows) + "\n")
        out.write(
            "convergence_summary.csv",
            f"fitted_rate,rate_reliable,limit_angle\n{rep.fitted_rate!r},{int(rep.rate_reliable)},{rep.limit_angle!r}\n",
        )


def run_trace(cfg, seed, workers, fmt, out: Output):
    from .loewner import render_svg, trace

    s = "trace"
    p = _driver(cfg, s)
    m = cfg.get(s, "samples", _int)
    y0 = cfg.get(s, "y0", lambda v: positive(parse_real(v)))
    if m < 2:
        raise ConfigError(f"{cfg.where(s, 'samples')}: trace.samples must be at least 2")
    yield
    tr = trace(p, np.linspace(0.0, p.T, m), y0)
    out.write("trace.csv", tr.to_csv())
    if fmt == "svg":
        out.write("trace.svg", render_svg(chords=tr.points))
    elif fmt == "json":
        out.write(
            "trace.json",
            _dump(
                {
                    "times": [float(t) for t in tr.times],
                    "chords": [[[float(z.real), float(z.imag)] for z in ch] for ch in tr.points],
                    "flagged": [[bool(f) for f in row] for row in tr.flagged],
                    "y0": y0,
                    "derivative_abs": None if tr.deriv_abs is None else [float(v) for v in tr.deriv_abs],
                    "derivative_bound": tr.deriv_bound,
                }
            ),
        )


def run_hull(cfg, seed, workers, fmt, out: Output):
    from .loewner import loewner_hull, render_svg

    s = "hull"
    p = _driver(cfg, s)
    res = (cfg.get(s, "radial", _int), cfg.get(s, "angular", _int))
    if min(res) < 1:
        raise ConfigError("[hull]: radial and angular resolutions must be positive")
    yield
    h = loewner_hull(p, p.T, res)
    out.write("hull.csv", h.to_csv())
    if fmt == "svg":
        out.write("hull.svg", render_svg(hull=h.points))
    elif fmt == "json":
        out.write(
            "hull.json",
            _dump({"T": h.T, "points": [[float(z.real), float(z.imag), float(t)] for z, t in zip(h.points, h.tau)]}),
        )


def _event(cfg: Config, n: int, th0, T):
    from .cm_flow import zero_energy_flow
    from .ldp_lab import EventSpec

    s = "ldp"
    kind = cfg.raw(s, "event").strip()
    try:
        if kind == "sup_ball":
            return EventSpec.sup_ball(zero_energy_flow(th0, T, 1e-3), cfg.get(s, "radius", parse_real))
        if kind == "endpoint_set":
            tgt = cfg.get(s, "target", parse_list)
            if len(tgt) != n:
                raise ConfigError(f"{cfg.where(s, 'target')}: ldp.target needs {n} angles")
            return EventSpec.endpoint_set(tgt, cfg.get(s, "radius", parse_real))
        if kind == "eps_gap_hit":
            return EventSpec.eps_gap_hit(cfg.get(s, "eps", parse_real), T)
        if kind == "whole":
            return EventSpec.whole()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[ldp]: {exc}") from None
    raise ConfigError(f"{cfg.where(s, 'event')}: ldp.event must be sup_ball, endpoint_set, eps_gap_hit or whole")


def run_ldp(cfg, seed, workers, fmt, out: Output):
    from .ldp_lab import mc_ldp_curve, minimize_rate
    from .sde_sim import SimulationConfig

    s = "ldp"
    n = cfg.get(s, "n", _int)
    th0 = _angles(cfg, s, n)
    T = cfg.get(s, "T", lambda v: positive(parse_real(v)))
    ev = _event(cfg, n, th0, T)
    kappas = cfg.get(s, "kappas", parse_list)
    methods = tuple(m.strip() for m in cfg.raw(s, "methods").split(",") if m.strip())
    if not methods or any(m not in ("direct", "weighted") for m in methods):
        raise ConfigError(f"{cfg.where(s, 'methods')}: ldp.methods must list direct and/or weighted")
    try:
        sc = SimulationConfig(
            n=n, kappa=1.0, theta0=tuple(th0), T=T, dt=cfg.get(s, "dt", parse_real),
            a=cfg.get(s, "a", parse_real), seed=seed, ensemble=cfg.get(s, "ensemble", _int),
        )
    except ValueError as exc:
        raise ConfigError(f"[ldp]: {exc}") from None
    if not kappas or any(k <= 0 for k in kappas) or any(b >= a for a, b in zip(kappas, kappas[1:])):
        raise ConfigError(f"{cfg.where(s, 'kappas')}: ldp.kappas must be positive and strictly decreasing")
    if "weighted" in methods and max(kappas) > 2 * sc.a:
        raise ConfigError("[ldp]: the weighted method needs kappa <= 2a")
    steps = cfg.get(s, "steps", _int)
    starts = cfg.get(s, "starts", _int)
    yield
    rows = mc_ldp_curve(ev, kappas, sc, methods, workers)
    rr = minimize_rate(ev, th0, T, steps, sc.a, 0.0, starts, seed)
    rate = {
        "value": _num(rr.value),
        "feasible": rr.feasible,
        "iterations": rr.iterations,
        "grad_norm": _num(rr.grad_norm),
        "starts": rr.starts,
        "start_values": [_num(v) for v in rr.values],
    }
    table = [
        {"kappa": r.kappa, "estimate": _num(r.estimate), "ci_lo": _num(r.ci_lo), "ci_hi": _num(r.ci_hi), "method": r.method,
         "hits": r.hits, "ensemble": r.ensemble, "one_sided": r.one_sided}
        for r in rows
    ]
    if fmt == "csv":
        lines = ["kappa,estimate,ci_lo,ci_hi,method"] + [
            ",".join([_cell(r.kappa), _cell(r.estimate), _cell(r.ci_lo), _cell(r.ci_hi), r.method]) for r in rows
        ]
        out.write("ldp_curve.csv", "\n".join(lines) + "\n")
        out.write("rate_path.csv", rr.path.to_csv())
        out.write("ldp_summary.json", _dump({"event": ev.kind, "rate": rate, "curve": table}))
    else:
        out.write("ldp.json", _dump({"event": ev.kind, "rate": rate, "curve": table, "rate_path": rr.path.to_csv()}))


def _check_reproducibility(seed: int, workers: int):
    # a small ensemble written twice (one and `workers` threads) must match byte for byte
    from .acceptance import reproducibility
    from .sde_sim import SimulationConfig, simulate_dyson

    sc = SimulationConfig(n=3, kappa=2.0, theta0=(0.0, 2.0, 4.0), T=0.2, dt=1e-3, seed=seed, ensemble=64)
    blobs = []
    for w in (1, max(workers, 2)):
        with tempfile.TemporaryDirectory() as d:
            names = simulate_dyson(sc, w).write(d)
            blobs.append({nm: (Path(d) / nm).read_bytes() for nm in names})
    return reproducibility(*blobs)


def run_check(cfg, seed, workers, fmt, out: Output, timings: dict):
    from .acceptance import RUNTIME_LIMITS, run_all

    s = "check"
    ensemble = cfg.get(s, "ensemble", _int)
    only_raw = cfg.raw(s, "only").strip()
    only = set(cfg.get(s, "only", lambda v: [int(x) for x in v.split(",") if x.strip()])) if only_raw else None
    if only and not only <= set(range(1, 15)):
        raise ConfigError(f"{cfg.where(s, 'only')}: check.only must list criteria 1..14")
    yield

    def timer(k, sec):
        timings[k] = sec

    results = run_all(seed, workers, ensemble, only, timer)
    if not only or 14 in only:
        t0 = time.perf_counter()
        results.append(_check_reproducibility(seed, workers))
        timings[14] = time.perf_counter() - t0
    all_ok = True
    for r in results:
        for name, text in sorted(r.tables.items()):
            out.write(name, text)
        limit = RUNTIME_LIMITS.get(r.number)
        slow = limit is not None and timings.get(r.number, 0.0) > limit
        ok = r.passed and not slow
        all_ok &= ok
        note = f" (runtime {timings[r.number]:.1f} s > {limit:g} s)" if slow else ""
        print(f"criterion {r.number:2d}: {'PASS' if ok else 'FAIL'}  {r.title}{note}")
    out.write("summary.json", _dump({"seed": seed, "all_passed_numeric": all(r.passed for r in results), "criteria": [r.to_dict() for r in results]}))
    print(f"{sum(1 for r in results if r.passed)}/{len(results)} criteria pass numerically; overall {'PASS' if all_ok else 'FAIL'}")
    timings["ok"] = all_ok


RUNNERS = {
    "simulate": run_simulate,
    "energy": run_energy,
    "flow": run_flow,
    "trace": run_trace,
    "hull": run_hull,
    "ldp": run_ldp,
    "check": run_check,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multiradial", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"multiradial {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file with [run] and per-subcommand sections")
        sp.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
        sp.add_argument("--out-dir", help=f"output directory (default: run.out_dir, ${ENV_OUT_DIR}, ./multiradial_out)")
        sp.add_argument("--workers", type=int, help="worker threads for ensemble fan-out")
        sp.add_argument("--format", choices=("csv", "json", "svg"), help=f"output format (default {FORMATS[name][0]})")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config value")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cmd = args.command
    t_start = time.perf_counter()
    try:
        cfg = Config(args.config, args.set)
        seed = args.seed if args.seed is not None else cfg.get("run", "seed", _int)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must lie in [0, 2^64)")
        workers = args.workers if args.workers is not None else cfg.get("run", "workers", _int)
        if workers < 1:
            raise ConfigError("workers must be at least 1")
        fmt = args.format or FORMATS[cmd][0]
        if fmt not in FORMATS[cmd]:
            raise ConfigError(f"format {fmt!r} is not available for {cmd} (choose from {', '.join(FORMATS[cmd])})")
        root = Path(args.out_dir or cfg.raw("run", "out_dir").strip() or os.environ.get(ENV_OUT_DIR) or "multiradial_out")
        out = Output(root)
        timings: dict = {}
        extra = (timings,) if cmd == "check" else ()
        job = RUNNERS[cmd](cfg, seed, workers, fmt, out, *extra)
        next(job)  # validation phase: everything up to the first yield
    except (ConfigError, PathError, ValueError) as exc:
        print(f"multiradial {cmd}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        root.mkdir(parents=True, exist_ok=True)
        for _ in job:
            pass
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"multiradial {cmd}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = {
        "subcommand": cmd,
        "version": __version__,
        "seed": seed,
        "format": fmt,
        "config_file": args.config,
        "config": cfg.snapshot(["run", cmd]),
        "files": sorted(out.files),
    }
    # wall-clock stays out of the JSON so reruns are byte-identical
    (root / "run_manifest.json").write_bytes(_dump(manifest).encode("utf-8"))
    lines = [f"total_seconds {time.perf_counter() - t_start:.3f}"]
    lines += [f"criterion_{k}_seconds {v:.3f}" for k, v in sorted((k, v) for k, v in timings.items() if isinstance(k, int))]
    (root / "timing.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if cmd != "check":
        print(f"wrote {len(out.files) + 1} files to {root}")
    if cmd == "check" and not timings.get("ok", False):
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
