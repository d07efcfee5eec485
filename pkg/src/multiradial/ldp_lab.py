"""Rate-function minimisation and Monte Carlo estimates of kappa log P."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import beta as beta_dist

from .circle_core import TWO_PI, AngleConfiguration, cyclic_gaps, drift_array, drift_jacobian, gap_stats, is_ordered, log_F_array
from .cm_flow import zero_energy_flow
from .path_model import DrivingPath, linear_grid
from .sde_sim import SimulationConfig, eps_hit_times, simulate_dyson, simulate_weighted

Z95 = 1.959963984540054


class InfeasibleEvent(ValueError):
    """The event cannot be reached by any path from the given start."""


@dataclass(frozen=True)
class EventSpec:
    kind: str
    center: DrivingPath | None = None
    target: tuple | None = None
    radius: float | None = None
    eps: float | None = None
    T: float | None = None

    def __post_init__(self):
        if self.kind not in ("whole", "sup_ball", "endpoint_set", "eps_gap_hit"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind in ("sup_ball", "endpoint_set") and not (self.radius and self.radius > 0):
            raise ValueError("radius must be positive")
        if self.kind == "sup_ball" and self.center is None:
            raise ValueError("sup_ball needs a center path")
        if self.kind == "endpoint_set" and self.target is None:
            raise ValueError("endpoint_set needs a target")
        if self.kind == "eps_gap_hit" and not (self.eps and self.eps > 0 and self.T and self.T > 0):
            raise ValueError("eps_gap_hit needs eps > 0 and T > 0")

    @classmethod
    def whole(cls) -> "EventSpec":
        return cls("whole")

    @classmethod
    def sup_ball(cls, center: DrivingPath, radius: float) -> "EventSpec":
        return cls("sup_ball", center=center, radius=radius)

    @classmethod
    def endpoint_set(cls, target, radius: float) -> "EventSpec":
        t = tuple(float(x) for x in np.atleast_1d(getattr(target, "angles", target)))
        return cls("endpoint_set", target=t, radius=radius)

    @classmethod
    def eps_gap_hit(cls, eps: float, T: float) -> "EventSpec":
        ev = cls("eps_gap_hit", eps=eps, T=T)
        return ev

    def contains(self, times, states) -> np.ndarray:
        """Membership of stacked paths (N, K+1, n) sampled at ``times``; NaN rows never belong."""
        states = np.asarray(states, dtype=float)
        times = np.asarray(times, dtype=float)
        N = states.shape[0]
        dead = np.isnan(states).any(axis=(1, 2))
        if self.kind == "whole":
            return np.ones(N, dtype=bool)
        if self.kind == "sup_ball":
            c = self.center.at(np.minimum(times, self.center.T))
            with np.errstate(invalid="ignore"):
                dist = np.sqrt(((states - c[None]) ** 2).sum(axis=-1)).max(axis=1)
            return ~dead & (dist <= self.radius)
        if self.kind == "endpoint_set":
            d = np.sqrt(((states[:, -1] - np.array(self.target)) ** 2).sum(axis=-1))
            return ~dead & (d <= self.radius)
        te = eps_hit_times(times, states, self.eps)
        return te <= self.T


@dataclass
class RateResult:
    path: DrivingPath
    value: float
    feasible: bool
    iterations: int
    grad_norm: float
    starts: int
    values: list = field(default_factory=list)


def rate_objective(theta0, T: float, steps: int = 200, a: float = 4.0, rho: float = 0.0):
    """Discretised J as a function of the free samples x = (theta_1..theta_K), flattened.

    Returns ``f(x) -> (J, grad)``; the gradient is exact for the midpoint rule.
    """
    th0 = np.asarray(getattr(theta0, "angles", theta0), dtype=float)
    n = th0.size
    h = T / steps

    def f(x):
        X = np.vstack([th0, x.reshape(steps, n)])
        if not np.all(is_ordered(X)):
            return math.inf, np.zeros_like(x)
        mid = 0.5 * (X[1:] + X[:-1])
        r = (X[1:] - X[:-1]) / h - 2.0 * drift_array(mid, a) - rho
        J = 0.5 * h * float((r * r).sum())
        D = drift_jacobian(mid, a)
        Dr = h * np.einsum("kij,kj->ki", D, r)
        g = np.zeros_like(X)
        g[1:] += r - Dr
        g[:-1] += -r - Dr
        return J, g[1:].reshape(-1)

    return f


def _penalty(event: EventSpec, times, th0, x, steps, n):
    X = np.vstack([th0, x.reshape(steps, n)])
    g = np.zeros_like(X)
    P = 0.0
    if event.kind == "sup_ball":
        c = event.center.at(np.minimum(times, event.center.T))
        diff = X - c
        ex = (diff**2).sum(axis=1) - event.radius**2
        on = ex > 0
        P = float((ex[on] ** 2).sum())
        g[on] = 4.0 * ex[on, None] * diff[on]
    elif event.kind == "endpoint_set":
        diff = X[-1] - np.array(event.target)
        ex = float((diff**2).sum()) - event.radius**2
        if ex > 0:
            P = ex * ex
            g[-1] = 4.0 * ex * diff
    elif event.kind == "eps_gap_hit":
        # the start is fixed, so only samples 1..K inside [0, T] can be moved
        upto = np.flatnonzero(times <= event.T + 1e-12)[1:]
        gaps = cyclic_gaps(X[upto])
        k, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        ex = gaps[k, j] - event.eps * (1 - 1e-9)
        if ex > 0:
            P = ex * ex
            nxt = (j + 1) % n
            g[upto[k], nxt] += 2 * ex
            g[upto[k], j] -= 2 * ex
    g[0] = 0.0
    return P, g[1:].reshape(-1)


def _project(event: EventSpec, times, X):
    X = X.copy()
    if event.kind == "sup_ball":
        c = event.center.at(np.minimum(times, event.center.T))
        diff = X - c
        d = np.sqrt((diff**2).sum(axis=1))
        over = d > event.radius
        X[over] = c[over] + diff[over] * (event.radius / d[over])[:, None]
    elif event.kind == "endpoint_set":
        diff = X[-1] - np.array(event.target)
        d = math.sqrt(float((diff**2).sum()))
        if d > event.radius:
            X[-1] = np.array(event.target) + diff * (event.radius / d)
    elif event.kind == "eps_gap_hit":
        upto = np.flatnonzero(times <= event.T + 1e-12)[1:]
        gaps = cyclic_gaps(X[upto])
        k, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        ex = gaps[k, j] - event.eps * (1 - 1e-9)
        if ex > 0:
            n = X.shape[1]
            nxt = (j + 1) % n
            X[upto[k], j] += 0.5 * ex
            X[upto[k], nxt] -= 0.5 * ex
    return X


def _feasible(event, times, X, tol=1e-9):
    if event.kind == "whole":
        return True
    if event.kind == "sup_ball":
        c = event.center.at(np.minimum(times, event.center.T))
        return bool(np.sqrt(((X - c) ** 2).sum(axis=1)).max() <= event.radius * (1 + tol))
    if event.kind == "endpoint_set":
        return bool(np.sqrt(((X[-1] - np.array(event.target)) ** 2).sum()) <= event.radius * (1 + tol))
    upto = times <= event.T + 1e-12
    return bool(cyclic_gaps(X[upto]).min() < event.eps)


def _check_eps(event: EventSpec, n: int):
    if event.kind == "eps_gap_hit" and not event.eps < TWO_PI / n:
        raise ValueError(f"eps must lie in (0, 2pi/n) = (0, {TWO_PI / n:.6g})")


def _lbfgs(fun, x0, maxiter):
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
    return res.x, int(res.nit)


def minimize_rate(
    event: EventSpec,
    theta0,
    T: float,
    steps: int = 200,
    a: float = 4.0,
    rho: float = 0.0,
    starts: int = 4,
    seed: int = 0,
    maxiter: int = 2000,
) -> RateResult:
    """Minimise the discretised J over paths from ``theta0`` that satisfy ``event``.

    Quadratic penalties with weights 1e2 .. 1e8, then a projection onto the
    event; endpoint constraints are re-optimised with the endpoint frozen.
    Start 0 is the zero-energy flow, the others add smooth random bumps.
    """
    th0 = np.asarray(getattr(theta0, "angles", theta0), dtype=float)
    AngleConfiguration(th0)
    n = th0.size
    times = np.linspace(0.0, T, steps + 1)
    h = T / steps
    if event.kind == "sup_ball":
        c0 = event.center.at(0.0)
        if np.sqrt(((th0 - c0) ** 2).sum()) > event.radius:
            raise InfeasibleEvent("start lies outside the sup-ball")
    _check_eps(event, n)
    if event.kind == "eps_gap_hit" and event.T > T + 1e-12:
        raise InfeasibleEvent("event horizon beyond the optimisation horizon")
    J = rate_objective(th0, T, steps, a, rho)
    base = zero_energy_flow(th0, T, h, a, rho).states
    rng = np.random.default_rng(seed)
    results = []
    for s in range(max(starts, 1)):
        X0 = base.copy()
        if s:
            amp = 0.1 * (TWO_PI / n) * rng.uniform(0.2, 1.0)
            for j in range(n):
                k = rng.integers(1, 4)
                X0[:, j] += amp * rng.uniform(-1, 1) * np.sin(math.pi * k * times / T)
            if not np.all(is_ordered(X0)):
                X0 = base.copy()
        x = X0[1:].reshape(-1)
        iters = 0
        if event.kind == "whole":
            x, it = _lbfgs(J, x, maxiter)
            iters += it
        else:
            for mu in (1e2, 1e4, 1e6, 1e8):
                def fun(x, mu=mu):
                    v, g = J(x)
                    if math.isinf(v):
                        return 1e30, g
                    p, gp = _penalty(event, times, th0, x, steps, n)
                    return v + mu * p, g + mu * gp

                x, it = _lbfgs(fun, x, maxiter)
                iters += it
        X = np.vstack([th0, x.reshape(steps, n)])
        X = _project(event, times, X)
        if event.kind == "endpoint_set":
            end = X[-1].copy()

            def fixed(xi):
                v, g = J(np.concatenate([xi, end]))
                return (1e30, np.zeros_like(xi)) if math.isinf(v) else (v, g[:-n])

            xi, it = _lbfgs(fixed, X[1:-1].reshape(-1), maxiter)
            iters += it
            X[1:-1] = xi.reshape(steps - 1, n)
        val, grad = J(X[1:].reshape(-1))
        ok = np.all(is_ordered(X)) and _feasible(event, times, X)
        results.append((val if ok else math.inf, X, iters, float(np.linalg.norm(grad))))
    vals = [r[0] for r in results]
    best = int(np.argmin(vals))
    val, X, iters, gn = results[best]
    feasible = math.isfinite(val)
    path = DrivingPath(times, X) if np.all(is_ordered(X)) else DrivingPath(times, base)
    return RateResult(path, float(val), feasible, iters, gn, len(results), vals)


@dataclass
class CurveRow:
    kappa: float
    estimate: float
    ci_lo: float
    ci_hi: float
    method: str
    p_hat: float
    hits: int
    ensemble: int
    one_sided: bool = False


def _binomial_row(kappa, hits, N, method="direct"):
    lo_p = beta_dist.ppf(0.025, hits, N - hits + 1) if hits > 0 else 0.0
    hi_p = beta_dist.ppf(0.975, hits + 1, N - hits) if hits < N else 1.0
    p = hits / N
    if hits == 0:
        return CurveRow(kappa, -math.inf, -math.inf, kappa * math.log(hi_p), method, 0.0, 0, N, True)
    return CurveRow(kappa, kappa * math.log(p), kappa * math.log(lo_p), kappa * math.log(hi_p), method, p, hits, N)


def _weighted_row(kappa, w, N, method="weighted"):
    hits = int(np.count_nonzero(w))
    if hits == 0:
        return CurveRow(kappa, -math.inf, -math.inf, math.nan, method, 0.0, 0, N, True)
    p = float(w.sum() / N)
    se = float(math.sqrt(max((w**2).sum() / N - p * p, 0.0) / N))
    lo = p - Z95 * se
    return CurveRow(
        kappa,
        kappa * math.log(p),
        kappa * math.log(lo) if lo > 0 else -math.inf,
        kappa * math.log(p + Z95 * se),
        method,
        p,
        hits,
        N,
    )


def _event_mass(event, cfg, workers, weighted, block=8192):
    """Stream the ensemble in blocks; returns (direct hit count) or (per-path weighted indicator)."""
    out = []
    for start in range(0, cfg.ensemble, block):
        stop = min(start + block, cfg.ensemble)
        if weighted:
            ens = simulate_weighted(cfg, workers, start, stop)
            inside = event.contains(ens.times, ens.states)
            w = ens.eps_weights if event.kind == "eps_gap_hit" else ens.weights
            if event.kind == "eps_gap_hit":
                inside = ens.eps_hit_times <= event.T
            out.append(np.where(inside, w, 0.0))
        else:
            ens = simulate_dyson(cfg, workers, start, stop)
            inside = event.contains(ens.times, ens.states)
            out.append(inside.astype(float))
    return np.concatenate(out)


def mc_ldp_curve(event: EventSpec, kappas, cfg: SimulationConfig, methods=("direct", "weighted"), workers: int = 1) -> list[CurveRow]:
    """kappa log P[event] per kappa with 95% intervals, for each requested estimator.

    Direct rows use Clopper-Pearson intervals; weighted rows use the delta
    method.  With no hits a direct row carries only a one-sided upper value.
    """
    kappas = [float(k) for k in kappas]
    if any(k <= 0 for k in kappas):
        raise ValueError("kappas must be positive")
    if any(b >= a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("kappas must be strictly decreasing")
    _check_eps(event, cfg.n)
    rows = []
    for k in kappas:
        if event.kind == "whole":
            # P = 1 under every law; nothing to estimate
            rows.append(CurveRow(k, 0.0, 0.0, 0.0, "exact", 1.0, cfg.ensemble, cfg.ensemble))
            continue
        c = cfg.replace(kappa=k, eps=event.eps if event.kind == "eps_gap_hit" else cfg.eps)
        if event.kind == "eps_gap_hit" and abs(c.T - event.T) > 1e-12:
            c = c.replace(T=event.T)
        if "direct" in methods:
            hits = int(_event_mass(event, c, workers, weighted=False).sum())
            rows.append(_binomial_row(k, hits, c.ensemble))
        if "weighted" in methods:
            w = _event_mass(event, c, workers, weighted=True)
            rows.append(_weighted_row(k, w, c.ensemble))
    return rows


def tail_constant(n: int, a: float, T: float) -> float:
    return math.exp(a * n * (n * n - 1) * T / 24.0)


def tail_bound(theta0, eps: float, kappa: float, a: float, T: float) -> float:
    """C (eps / (2 F(theta0)))^{a/kappa} with C = exp(a n(n^2-1) T / 24)."""
    th = np.asarray(getattr(theta0, "angles", theta0), dtype=float)
    F = math.exp(float(log_F_array(th)))
    return tail_constant(th.size, a, T) * (eps / (2.0 * F)) ** (a / kappa)


@dataclass
class TailRow:
    kappa: float
    eps: float
    bound: float
    p_direct: float
    upper_direct: float
    hits_direct: int
    p_weighted: float
    upper_weighted: float
    hits_weighted: int
    method: str
    upper: float
    passed: bool
    degenerate: bool = False


def tail_bound_check(eps_grid, kappa_grid, cfg: SimulationConfig, workers: int = 1, min_hits: int = 20) -> list[TailRow]:
    """Compare P[tau_eps <= T] with the closed-form bound on a (kappa, eps) grid.

    Both estimators are always computed.  The direct one decides when it has
    at least ``min_hits`` hits; otherwise the weighted one (stopped at
    tau_eps) decides.  A cell passes when the chosen 95% upper limit is at
    most the bound.
    """
    rows = []
    delta0 = gap_stats(cfg.theta0).delta_min
    for k in kappa_grid:
        if k > cfg.a:
            raise ValueError("tail bound requires kappa <= a")
        for e in eps_grid:
            bound = tail_bound(cfg.theta0, e, k, cfg.a, cfg.T)
            if e >= delta0:
                rows.append(TailRow(k, e, bound, 1.0, 1.0, cfg.ensemble, 1.0, 1.0, cfg.ensemble, "degenerate", 1.0, bound >= 1.0, True))
                continue
            ev = EventSpec.eps_gap_hit(e, cfg.T)
            c = cfg.replace(kappa=k, eps=e)
            hd = int(_event_mass(ev, c, workers, weighted=False).sum())
            rd = _binomial_row(k, hd, c.ensemble)
            up_d = math.exp(rd.ci_hi / k)
            w = _event_mass(ev, c, workers, weighted=True)
            rw = _weighted_row(k, w, c.ensemble)
            up_w = math.nan if rw.one_sided else math.exp(rw.ci_hi / k)
            if hd >= min_hits or rw.one_sided:
                method, upper = "direct", up_d
            else:
                method, upper = "weighted", up_w
            rows.append(TailRow(k, e, bound, rd.p_hat, up_d, hd, rw.p_hat, up_w, rw.hits, method, upper, upper <= bound))
    return rows
