"""Zero-energy flow (trigonometric Calogero-Moser) and convergence diagnostics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circle_core import COLLISION_TOL, TWO_PI, AngleConfiguration, OrderingError, drift_array, gap_stats, gap_stats_array
from .path_model import DrivingPath, linear_grid

MAX_HALVINGS = 10


def _rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _all_ordered(y) -> bool:
    # is_ordered for every row of y at once, without the per-row broadcasting overhead
    if y.shape[-1] == 1:
        return bool(np.isfinite(y).all())
    g = np.empty_like(y)
    g[..., :-1] = y[..., 1:] - y[..., :-1]
    g[..., -1] = y[..., 0] + TWO_PI - y[..., -1]
    return bool(g.min() > 0) and bool((2.0 * np.abs(np.sin(0.5 * g))).min() >= COLLISION_TOL)


def _safe_step(f, t, x, h):
    # a step that breaks ordering is redone as two half steps, recursively;
    # callers run this under np.errstate(divide="raise", invalid="raise")
    def go(t, x, h, depth):
        try:
            y = _rk4_step(f, t, x, h)
        except FloatingPointError:
            y = None
        if y is not None and _all_ordered(y):
            return y
        if depth >= MAX_HALVINGS:
            raise OrderingError(f"ordering lost near t={t:.6g} after {MAX_HALVINGS} halvings")
        mid = go(t, x, 0.5 * h, depth + 1)
        return go(t + 0.5 * h, mid, 0.5 * h, depth + 1)

    return go(t, x, h, 0)


def _integrate_states(f, x, times) -> np.ndarray:
    # x has shape (..., n); a step that fails for any row is halved for all rows
    out = np.empty((times.size,) + x.shape)
    out[0] = x
    with np.errstate(divide="raise", invalid="raise"):
        for k in range(times.size - 1):
            x = _safe_step(f, times[k], x, times[k + 1] - times[k])
            out[k + 1] = x
    return out


def integrate(f, theta0, T: float, step: float) -> DrivingPath:
    """Fixed-step RK4 of x' = f(t, x) on a uniform grid over [0, T]."""
    times = linear_grid(T, step)
    x = np.array(getattr(theta0, "angles", theta0), dtype=float)
    return DrivingPath(times, _integrate_states(f, x, times))


def zero_energy_flow(theta0, T: float, step: float = 1e-3, a: float = 4.0, rho: float = 0.0) -> DrivingPath:
    """Solve theta' = 2 phi_a(theta) + rho from ``theta0``."""
    if step <= 0 or T <= 0:
        raise ValueError("need positive T and step")
    theta0 = theta0 if isinstance(theta0, AngleConfiguration) else AngleConfiguration(theta0)
    return integrate(lambda t, x: 2.0 * drift_array(x, a) + rho, theta0, T, step)


def zero_energy_flows(starts, T: float, step: float = 1e-3, a: float = 4.0, rho: float = 0.0) -> list[DrivingPath]:
    """Batch of zero-energy flows sharing one time grid.

    Much faster than one call per start for small n.  Rows agree with
    ``zero_energy_flow`` exactly unless some row needs step halving, which is
    then applied to the whole batch.
    """
    if step <= 0 or T <= 0:
        raise ValueError("need positive T and step")
    x = np.stack([AngleConfiguration(s).angles for s in starts]).astype(float)
    times = linear_grid(T, step)
    out = _integrate_states(lambda t, y: 2.0 * drift_array(y, a) + rho, x, times)
    return [DrivingPath(times, out[:, i]) for i in range(x.shape[0])]


@dataclass
class ConvergenceReport:
    times: np.ndarray = field(repr=False)
    d_series: np.ndarray = field(repr=False)
    delta_series: np.ndarray = field(repr=False)
    fitted_rate: float
    rate_reliable: bool
    limit_angle: float
    bound_series: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        def fl(x):
            return None if x is None else [float(v) for v in x]

        return {
            "times": fl(self.times),
            "d_series": fl(self.d_series),
            "delta_series": fl(self.delta_series),
            "fitted_rate": None if math.isnan(self.fitted_rate) else float(self.fitted_rate),
            "rate_reliable": bool(self.rate_reliable),
            "limit_angle": float(self.limit_angle),
            "bound_series": fl(self.bound_series),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def fit_rate(times, d, lo: float = 1e-8, hi_frac: float = 0.1) -> tuple[float, bool]:
    """Least-squares decay rate of log d on the window lo <= d <= d[0]*hi_frac."""
    times = np.asarray(times, dtype=float)
    d = np.asarray(d, dtype=float)
    if d[0] <= 0:
        return math.nan, False
    sel = (d >= lo) & (d <= d[0] * hi_frac)
    # only the first contiguous stretch counts; later re-entries are roundoff noise
    idx = np.flatnonzero(sel)
    if idx.size < 3:
        return math.nan, False
    breaks = np.flatnonzero(np.diff(idx) > 1)
    if breaks.size:
        idx = idx[: breaks[0] + 1]
    if idx.size < 3:
        return math.nan, False
    slope = np.polyfit(times[idx], np.log(d[idx]), 1)[0]
    return float(-slope), True


def convergence_report(p: DrivingPath, energy_series=None) -> ConvergenceReport:
    """Gap statistics along ``p``; ``energy_series`` (J_t per sample) adds the d upper bound."""
    n = p.n
    delta, d = gap_stats_array(p.states)
    rate, ok = fit_rate(p.times, d)
    zeta = float(np.mean(p.states[-1] - TWO_PI * np.arange(n) / n))
    bound = None
    if energy_series is not None:
        J = np.asarray(energy_series, dtype=float)
        if J.shape != p.times.shape:
            raise ValueError("energy_series must have one value per sample")
        h = np.diff(p.times)
        rate_J = np.maximum(np.diff(J), 0.0) / h
        mids = 0.5 * (p.times[1:] + p.times[:-1])
        integral = np.concatenate([[0.0], np.cumsum(np.exp(n * mids) * np.sqrt(rate_J) * h)])
        bound = (n - 1) * np.exp(-n * p.times) * (2.0 * math.sqrt(2.0) * integral + d[0])
    return ConvergenceReport(p.times.copy(), d, delta, rate, ok, zeta, bound)


def gap_bound_check(theta) -> list[tuple[int, float, float]]:
    """For each j attaining the minimum gap: (j, phi^{j+1}-phi^j, pi - n(theta^{j+1}-theta^j)/2)."""
    arr = np.asarray(getattr(theta, "angles", theta), dtype=float)
    n = arr.size
    phi = drift_array(arr, 4.0)
    stats = gap_stats(arr)
    out = []
    for j in stats.argmin:
        nxt = (j + 1) % n
        gap = arr[nxt] - arr[j] if nxt else arr[0] + TWO_PI - arr[j]
        out.append((j, float(phi[nxt] - phi[j]), float(math.pi - n * gap / 2.0)))
    return out


def counterexample_driver(eps: float, T: float, step: float = 1e-3) -> tuple[DrivingPath, np.ndarray]:
    """Two particles from (0, pi) with forcing eps/(t+1) on the first one.

    Returns the path and the lower bound eps(1-e^{-4t})/(4(t+1)) for d.
    """
    if not 0 < eps < math.pi / 2:
        raise ValueError("eps must lie in (0, pi/2)")

    def f(t, x):
        v = 2.0 * drift_array(x, 4.0)
        v[0] -= eps / (t + 1.0)
        return v

    path = integrate(f, np.array([0.0, math.pi]), T, step)
    t = path.times
    return path, eps * (1.0 - np.exp(-4.0 * t)) / (4.0 * (t + 1.0))


def two_particle_gap(g0: float, t):
    """Closed-form gap of the n=2 zero-energy flow: cos(g/2) = cos(g0/2) e^{-2t}."""
    return 2.0 * np.arccos(math.cos(0.5 * g0) * np.exp(-2.0 * np.asarray(t, dtype=float)))
