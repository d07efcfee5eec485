"""Direct Euler-Maruyama simulation and the Girsanov-reweighted Brownian ensemble.

Randomness is counter based.  Path ``i`` of seed ``s`` draws its grid
increments from a Philox stream keyed by ``(s, i)``: row ``k`` of the draw
belongs to step ``k``, column ``j`` to coordinate ``j``.  Brownian-bridge
refinements inside step ``k`` use the same key with the counter moved to
word 1 = k + 1, so they never overlap the grid stream.  Any split of the
ensemble across workers therefore reproduces the same numbers.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .circle_core import COLLISION_TOL, AngleConfiguration, cyclic_gaps, drift_array, is_ordered, log_F_array
from .energy import interval_terms, phi_batch
from .path_model import DrivingPath, linear_grid

SEED_MASK = (1 << 64) - 1
CHUNK = 2048


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    kappa: float
    theta0: tuple
    T: float
    dt: float = 1e-3
    a: float = 4.0
    rho: float = 0.0
    seed: int = 0
    ensemble: int = 1000
    eps: float | None = None
    max_halvings: int = 10

    def __post_init__(self):
        th = tuple(float(x) for x in np.atleast_1d(getattr(self.theta0, "angles", self.theta0)))
        object.__setattr__(self, "theta0", th)
        AngleConfiguration(th)
        if len(th) != self.n:
            raise ValueError(f"theta0 has {len(th)} angles but n={self.n}")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.a <= 0:
            raise ValueError("a must be positive")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("T and dt must be positive")
        if self.ensemble < 1:
            raise ValueError("ensemble must be at least 1")
        if not 0 <= self.seed <= SEED_MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def times(self) -> np.ndarray:
        return linear_grid(self.T, self.dt)

    def replace(self, **kw) -> "SimulationConfig":
        d = asdict(self)
        d.update(kw)
        return SimulationConfig(**d)


@dataclass
class StoppedEnsemble:
    """Stacked paths; rows are NaN after a path's collision."""

    config: SimulationConfig
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    collision_times: np.ndarray = field(repr=False)
    eps_hit_times: np.ndarray = field(repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    eps_weights: np.ndarray | None = field(default=None, repr=False)
    method: str = "direct"
    refined_steps: int = 0

    def __len__(self):
        return int(self.states.shape[0])

    @property
    def collided(self) -> np.ndarray:
        return np.isfinite(self.collision_times)

    @property
    def final_states(self) -> np.ndarray:
        return self.states[:, -1, :]

    def path(self, i: int) -> DrivingPath:
        rows = self.states[i]
        ok = ~np.isnan(rows[:, 0])
        tc = self.collision_times[i]
        return DrivingPath(self.times[ok], rows[ok], None if math.isinf(tc) else float(tc))

    def manifest(self) -> dict:
        tc = self.collision_times
        te = self.eps_hit_times
        out = {
            "method": self.method,
            "seed": self.config.seed,
            "config": asdict(self.config),
            "ensemble": len(self),
            "tau_coll": {"count": int(np.isfinite(tc).sum()), "min": _fin_min(tc)},
            "tau_eps": {"count": int(np.isfinite(te).sum()), "min": _fin_min(te)},
            "refined_steps": int(self.refined_steps),
        }
        if self.weights is not None:
            out["weights"] = [float(w) for w in self.weights]
        return out

    def write(self, out_dir, prefix: str = "path") -> list[str]:
        """One CSV per member plus ``manifest.json``; returns written file names."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        width = len(str(len(self) - 1))
        names = []
        for i in range(len(self)):
            name = f"{prefix}_{i:0{width}d}.csv"
            self.path(i).to_csv(out_dir / name)
            names.append(name)
        man = self.manifest()
        man["files"] = names
        (out_dir / "manifest.json").write_bytes((json.dumps(man, indent=2) + "\n").encode("utf-8"))
        return names + ["manifest.json"]


def _fin_min(x):
    f = x[np.isfinite(x)]
    return float(f.min()) if f.size else None


def _key(seed: int, path: int) -> int:
    return (seed & SEED_MASK) | (int(path) << 64)


def grid_normals(seed: int, path: int, steps: int, n: int) -> np.ndarray:
    """Standard normals for (step, coordinate) of one path."""
    return np.random.Generator(np.random.Philox(key=_key(seed, path))).standard_normal((steps, n))


def refinement_rng(seed: int, path: int, step: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_key(seed, path), counter=(step + 1) << 64))


def _needs_split(u, h, a):
    if u.shape[-1] < 2:
        return np.zeros(u.shape[:-1], dtype=bool)
    g = cyclic_gaps(u).min(axis=-1)
    with np.errstate(divide="ignore"):
        return h * (a / 2.0) / np.tan(0.5 * g) * 2.0 > 0.25 * g


def _refine(u, h, dw, cfg, rng, depth):
    """Euler step of length h with increment dw; returns (state, collided)."""
    a, kappa, rho = cfg.a, cfg.kappa, cfg.rho
    if depth < cfg.max_halvings and _needs_split(u, h, a):
        return _split(u, h, dw, cfg, rng, depth)
    new = u + (2.0 * drift_array(u, a) + rho) * h + math.sqrt(kappa) * dw
    if np.all(np.isfinite(new)) and is_ordered(new):
        return new, False
    if depth < cfg.max_halvings:
        return _split(u, h, dw, cfg, rng, depth)
    return u, True


def _split(u, h, dw, cfg, rng, depth):
    # Brownian bridge: W(h/2) | W(h) = dw  ~  N(dw/2, h/4)
    dw1 = 0.5 * dw + 0.5 * math.sqrt(h) * rng.standard_normal(u.shape[-1])
    mid, hit = _refine(u, 0.5 * h, dw1, cfg, rng, depth + 1)
    if hit:
        return mid, True
    return _refine(mid, 0.5 * h, dw - dw1, cfg, rng, depth + 1)


def _dyson_chunk(cfg: SimulationConfig, start: int, stop: int):
    times = cfg.times
    K = times.size - 1
    n, m = cfg.n, stop - start
    sq = np.sqrt(np.diff(times))
    Z = np.stack([grid_normals(cfg.seed, i, K, n) for i in range(start, stop)])
    states = np.full((m, K + 1, n), np.nan)
    U = np.broadcast_to(np.array(cfg.theta0), (m, n)).copy()
    states[:, 0] = U
    alive = np.ones(m, dtype=bool)
    tcoll = np.full(m, np.inf)
    refined = 0
    root_k = math.sqrt(cfg.kappa)
    for k in range(K):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        h = times[k + 1] - times[k]
        u = U[idx]
        dw = sq[k] * Z[idx, k]
        new = u + (2.0 * drift_array(u, cfg.a) + cfg.rho) * h + root_k * dw
        bad = _needs_split(u, h, cfg.a) | ~is_ordered(new) | ~np.all(np.isfinite(new), axis=-1)
        for r in np.flatnonzero(bad):
            refined += 1
            i = idx[r]
            rng = refinement_rng(cfg.seed, start + i, k)
            val, hit = _refine(u[r], h, dw[r], cfg, rng, 0)
            if hit:
                alive[i] = False
                tcoll[i] = times[k]
            else:
                new[r] = val
        ok = alive[idx]
        U[idx[ok]] = new[ok]
        states[idx[ok], k + 1] = new[ok]
    return states, tcoll, refined


def _fan_out(fn, cfg, workers, start=0, stop=None):
    stop = cfg.ensemble if stop is None else min(stop, cfg.ensemble)
    if not 0 <= start < stop:
        raise ValueError("empty path range")
    bounds = [(s, min(s + CHUNK, stop)) for s in range(start, stop, CHUNK)]
    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: fn(cfg, *b), bounds))
    else:
        parts = [fn(cfg, *b) for b in bounds]
    return parts


def eps_hit_times(times, states, eps) -> np.ndarray:
    """First grid time with minimum cyclic gap below eps, per stacked path (inf if none)."""
    states = np.asarray(states, dtype=float)
    if eps is None or states.shape[-1] < 2:
        return np.full(states.shape[0], np.inf)
    with np.errstate(invalid="ignore"):
        g = cyclic_gaps(states).min(axis=-1)
        hit = g < eps
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), np.asarray(times)[first], np.inf)


def simulate_dyson(cfg: SimulationConfig, workers: int = 1, start: int = 0, stop: int | None = None) -> StoppedEnsemble:
    """Euler-Maruyama for dU = (2 phi_a(U) + rho) dt + sqrt(kappa) dW with gap-adaptive halving.

    ``start``/``stop`` select members [start, stop) of the ensemble; a member
    is the same path whichever range it is simulated in.
    """
    parts = _fan_out(_dyson_chunk, cfg, workers, start, stop)
    states = np.concatenate([p[0] for p in parts])
    tcoll = np.concatenate([p[1] for p in parts])
    refined = sum(p[2] for p in parts)
    te = np.minimum(eps_hit_times(cfg.times, states, cfg.eps), tcoll)
    return StoppedEnsemble(cfg, cfg.times, states, tcoll, te, method="direct", refined_steps=refined)


def _brownian_chunk(cfg: SimulationConfig, start: int, stop: int):
    times = cfg.times
    K = times.size - 1
    n, m = cfg.n, stop - start
    sq = np.sqrt(np.diff(times))
    Z = np.stack([grid_normals(cfg.seed, i, K, n) for i in range(start, stop)])
    incr = math.sqrt(cfg.kappa) * sq[None, :, None] * Z
    states = np.concatenate(
        [np.broadcast_to(np.array(cfg.theta0), (m, 1, n)), np.array(cfg.theta0) + np.cumsum(incr, axis=1)], axis=1
    )
    tcoll = np.full(m, np.inf)
    if n > 1:
        g = cyclic_gaps(states)
        bad = np.any(g <= 0, axis=-1) | np.any(2 * np.abs(np.sin(0.5 * g)) < COLLISION_TOL, axis=-1)
        hit = bad.any(axis=1)
        first = np.argmax(bad, axis=1)
        tcoll[hit] = times[first[hit]]
        for i in np.flatnonzero(hit):
            states[i, first[i]:] = np.nan
    # running Phi along each path: boundary term plus cumulative quadrature
    live = np.isinf(tcoll)
    run_phi = np.full((m, K + 1), -np.inf)
    if live.any():
        s = states[live]
        _, _, dphi = interval_terms(times, s, cfg.kappa, cfg.a)
        lf = log_F_array(s)
        run_phi[live] = cfg.a * (lf - lf[:, :1]) + np.concatenate([np.zeros((s.shape[0], 1)), np.cumsum(dphi, axis=1)], axis=1)
    for i in np.flatnonzero(~live):
        kc = int(np.searchsorted(times, tcoll[i]))
        if kc > 1:
            s = states[i, :kc]
            _, _, dphi = interval_terms(times[:kc], s, cfg.kappa, cfg.a)
            lf = log_F_array(s)
            run_phi[i, :kc] = cfg.a * (lf - lf[0]) + np.concatenate([[0.0], np.cumsum(dphi)])
        elif kc == 1:
            run_phi[i, 0] = 0.0
    return states, tcoll, run_phi


def simulate_weighted(cfg: SimulationConfig, workers: int = 1, start: int = 0, stop: int | None = None) -> StoppedEnsemble:
    """Brownian paths theta0 + sqrt(kappa) B carrying the weight exp(Phi^{kappa,a}_T / kappa).

    ``eps_weights`` holds the same density stopped at tau_eps (when it
    occurs by T), which is what the optional-stopping form of the tail
    estimate needs.
    """
    if cfg.kappa <= 0:
        raise ValueError("reweighting needs kappa > 0")
    if cfg.kappa > 2 * cfg.a:
        raise ValueError("reweighted scheme requires kappa <= 2a")
    if cfg.rho != 0:
        raise ValueError("reweighted scheme is implemented for rho = 0")
    parts = _fan_out(_brownian_chunk, cfg, workers, start, stop)
    states = np.concatenate([p[0] for p in parts])
    tcoll = np.concatenate([p[1] for p in parts])
    run_phi = np.concatenate([p[2] for p in parts])
    times = cfg.times
    weights = np.exp(run_phi[:, -1] / cfg.kappa)
    te = np.minimum(eps_hit_times(times, states, cfg.eps), tcoll)
    eps_w = np.zeros(len(te))
    fin = np.isfinite(te)
    if fin.any():
        k = np.searchsorted(times, te[fin])
        eps_w[fin] = np.exp(run_phi[np.flatnonzero(fin), k] / cfg.kappa)
    return StoppedEnsemble(cfg, times, states, tcoll, te, weights, eps_w, method="weighted")


def girsanov_weight(path: DrivingPath, kappa: float, a: float = 4.0) -> float:
    """exp(Phi^{kappa,a}_T / kappa); zero for a collision-terminated path."""
    if kappa <= 0:
        raise ValueError("girsanov weight undefined for kappa = 0")
    if path.terminated_at is not None:
        return 0.0
    if len(path) < 2:
        return 1.0
    return float(np.exp(phi_batch(path.times, path.states, kappa, a) / kappa))


def detect_stop_times(path: DrivingPath, eps: float) -> tuple[float, float]:
    """(tau_coll, tau_eps) on the path's grid; inf when not reached."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    s = path.states
    if path.n < 2:
        tc = math.inf if path.terminated_at is None else float(path.terminated_at)
        return tc, math.inf
    g = cyclic_gaps(s)
    chord = 2 * np.abs(np.sin(0.5 * g)).min(axis=1)
    coll = np.flatnonzero(chord < COLLISION_TOL)
    tc = float(path.times[coll[0]]) if coll.size else math.inf
    if path.terminated_at is not None:
        tc = min(tc, float(path.terminated_at))
    hit = np.flatnonzero(g.min(axis=1) < eps)
    te = float(path.times[hit[0]]) if hit.size else math.inf
    return tc, min(te, tc)
