"""Multiradial Loewner flow in cylinder coordinates.

A point z of the disk is written z = exp(i u) with Im u > 0; the maps obey

    d/dt h_t(u) = lam_t * sum_j cot((h_t(u) - theta^j_t) / 2).

Forward integration gives swallowing times and hulls.  Backward
integration from theta^j_t + i y gives the inverse map f_t and, through
exp(i f_t), the trace.  Both use classical RK4 with per-member step sizes:
a step never crosses a grid point of the driver (or of the weight), and
near a driving angle the step shrinks like c * dist / speed, which resolves
the square-root singularity at the tip.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import dirichlet_energy
from .path_model import DrivingPath, TimeChange

SWALLOW_CUTOFF = 1e-8
MIN_STEP = 1e-15
MAX_ITER = 10_000_000


@dataclass(frozen=True)
class WeightFunction:
    """Positive weight lam on [0, T]: right-continuous step or piecewise linear."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    kind: str = "step"

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float).reshape(-1)
        if t.size != v.size or t.size == 0 or t[0] != 0.0:
            raise ValueError("weight needs matching samples starting at t=0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("weight breakpoints must increase")
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weight must be finite and strictly positive")
        if self.kind not in ("step", "linear"):
            raise ValueError("kind must be 'step' or 'linear'")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightFunction":
        return cls([0.0], [value], "step")

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def sup_inv(self) -> float:
        return float((1.0 / self.values).max())

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return np.interp(s, self.times, self.values)
        k = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, self.values.size - 1)
        return self.values[k]

    def integral(self, t):
        """int_0^t lam."""
        t = np.asarray(t, dtype=float)
        knots = self.times
        if self.kind == "step":
            seg = np.diff(knots) * self.values[:-1]
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            k = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.size - 1)
            return cum[k] + self.values[k] * (t - knots[k])
        seg = 0.5 * np.diff(knots) * (self.values[1:] + self.values[:-1])
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        k = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.size - 1)
        v0 = self.values[k]
        v1 = np.interp(t, knots, self.values)
        return cum[k] + 0.5 * (v0 + v1) * (t - knots[k])

    def time_change(self, grid) -> TimeChange:
        """sigma(t) = int_0^t lam, sampled on ``grid`` (which should contain the breakpoints)."""
        grid = np.asarray(grid, dtype=float)
        vals = self.integral(grid)
        vals[0] = 0.0
        return TimeChange(grid, vals)


def _cyl_dist(z, theta):
    # distance on the cylinder R/2piZ x R between z (M,) and the angles theta (M, n)
    dz = z[:, None] - theta
    re = np.mod(dz.real + math.pi, 2 * math.pi) - math.pi
    return np.hypot(re, dz.imag).min(axis=1)


class _Field:
    """Vector field lam(s) sum_j cot((z - theta^j(s))/2) for one driver."""

    def __init__(self, path: DrivingPath, lam: WeightFunction | None):
        self.path = path
        self.lam = lam if lam is not None else WeightFunction.constant(1.0)
        self.t = path.times
        self.x = path.states
        self.n = path.n
        grid = path.times
        inside = self.lam.times[(self.lam.times > 0) & (self.lam.times < path.T)]
        if inside.size:
            grid = np.union1d(grid, inside)
        self.grid = grid
        slopes = np.abs(np.diff(path.states, axis=0) / np.diff(path.times)[:, None]).max(axis=1) if len(path) > 1 else np.zeros(1)
        self.slopes = slopes

    def theta(self, s):
        return np.stack([np.interp(s, self.t, self.x[:, j]) for j in range(self.n)], axis=-1)

    def lam_at(self, s, s_mid):
        if self.lam.kind == "step":
            return self.lam(s_mid)
        return self.lam(s)

    def __call__(self, z, s, s_mid):
        th = self.theta(s)
        w = 0.5 * (z[:, None] - th)
        lam = self.lam_at(s, s_mid)
        return lam * (np.cos(w) / np.sin(w)).sum(axis=1), lam, w

    def speed(self, z, s, s_mid):
        th = self.theta(s)
        w = 0.5 * (z[:, None] - th)
        k = np.clip(np.searchsorted(self.t, s_mid, side="right") - 1, 0, self.slopes.size - 1)
        return self.lam_at(s, s_mid) * np.abs(np.cos(w) / np.sin(w)).sum(axis=1) + self.slopes[k], th


@dataclass
class _FlowResult:
    z: np.ndarray
    dz: np.ndarray | None
    s_stop: np.ndarray
    swallowed: np.ndarray
    flagged: np.ndarray
    record: np.ndarray | None


def _integrate(
    fld: _Field,
    z0,
    s0,
    s1,
    deriv: bool = False,
    groups=None,
    c: float = 0.02,
    cutoff: float = SWALLOW_CUTOFF,
    swallow: bool = False,
    record_times=None,
):
    """RK4 of every member from s0[i] to s1[i] (all forward or all backward).

    Members sharing a ``groups`` label take identical steps, which keeps
    finite differences across a group smooth.  With ``swallow`` a member
    stops when it comes within ``cutoff`` of a driving angle or its step
    falls below MIN_STEP; otherwise such an approach only raises ``flagged``.
    """
    z = np.array(z0, dtype=complex).reshape(-1)
    M = z.size
    s = np.broadcast_to(np.asarray(s0, dtype=float), (M,)).copy()
    end = np.broadcast_to(np.asarray(s1, dtype=float), (M,)).copy()
    fwd = bool(np.all(end >= s))
    if not fwd and not np.all(end <= s):
        raise ValueError("mixed integration directions")
    sign = 1.0 if fwd else -1.0
    dz = np.ones(M, dtype=complex) if deriv else None
    grid = fld.grid
    swallowed = np.zeros(M, dtype=bool)
    flagged = np.zeros(M, dtype=bool)
    g = None if groups is None else np.unique(np.asarray(groups), return_inverse=True)[1]
    rec = None
    if record_times is not None:
        record_times = np.asarray(record_times, dtype=float)
        rec = np.full((M, record_times.size), np.nan + 0j)
        hit = np.isclose(record_times[None, :], s[:, None], rtol=0, atol=0)
        rec[hit] = np.broadcast_to(z[:, None], hit.shape)[hit]
    active = s != end
    it = 0
    while active.any():
        it += 1
        if it > MAX_ITER:
            raise RuntimeError("Loewner integration did not finish")
        idx = np.flatnonzero(active)
        zi, si, ei = z[idx], s[idx], end[idx]
        if fwd:
            nb = grid[np.minimum(np.searchsorted(grid, si, side="right"), grid.size - 1)]
            nb = np.where(nb > si, nb, ei)
            bound = np.minimum(nb, ei)
        else:
            nb = grid[np.maximum(np.searchsorted(grid, si, side="left") - 1, 0)]
            nb = np.where(nb < si, nb, ei)
            bound = np.maximum(nb, ei)
        h_rem = np.abs(bound - si)
        speed, th = fld.speed(zi, si, si + sign * 0.5 * h_rem)
        dist = _cyl_dist(zi, th)
        h = np.minimum(h_rem, c * dist / np.maximum(speed, 1e-300))
        if g is not None:
            gi = g[idx]
            hg = np.full(gi.max() + 1, np.inf)
            np.minimum.at(hg, gi, h)
            h = hg[gi]
            hr = np.full(gi.max() + 1, np.inf)
            np.minimum.at(hr, gi, h_rem)
            h = np.minimum(h, hr[gi])
        near = dist < cutoff
        if swallow:
            stop = near | (h < MIN_STEP)
            if stop.any():
                swallowed[idx[stop]] = True
                active[idx[stop]] = False
                keep = ~stop
                idx, zi, si, ei, h, h_rem, bound = idx[keep], zi[keep], si[keep], ei[keep], h[keep], h_rem[keep], bound[keep]
                if idx.size == 0:
                    continue
        else:
            flagged[idx[near]] = True
            h = np.maximum(h, MIN_STEP)
        hs = sign * h
        mid = si + 0.5 * hs
        f1, l1, w1 = fld(zi, si, mid)
        f2, l2, w2 = fld(zi + 0.5 * hs * f1, mid, mid)
        f3, l3, w3 = fld(zi + 0.5 * hs * f2, mid, mid)
        f4, l4, w4 = fld(zi + hs * f3, si + hs, mid)
        znew = zi + hs / 6.0 * (f1 + 2 * f2 + 2 * f3 + f4)
        if deriv:
            di = dz[idx]

            def jac(lam, w):
                return -0.5 * lam * (1.0 / np.sin(w) ** 2).sum(axis=1)

            j1 = jac(l1, w1) * di
            j2 = jac(l2, w2) * (di + 0.5 * hs * j1)
            j3 = jac(l3, w3) * (di + 0.5 * hs * j2)
            j4 = jac(l4, w4) * (di + hs * j3)
            dz[idx] = di + hs / 6.0 * (j1 + 2 * j2 + 2 * j3 + j4)
        land = h >= h_rem
        snew = np.where(land, bound, si + hs)
        z[idx] = znew
        s[idx] = snew
        active[idx] = snew != ei
        if rec is not None:
            k = np.searchsorted(record_times, snew)
            k = np.minimum(k, record_times.size - 1)
            on = record_times[k] == snew
            rec[idx[on], k[on]] = znew[on]
    return _FlowResult(z, dz, s, swallowed, flagged, rec)


def forward_map(p: DrivingPath, t: float, u, lam: WeightFunction | None = None, c: float = 0.02):
    """h_t(u) for cylinder points u (no swallowing test)."""
    fld = _Field(p, lam)
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    return _integrate(fld, u, 0.0, t, c=c).z


def inverse_map(p: DrivingPath, t: float, w, lam: WeightFunction | None = None, c: float = 0.02):
    """f_t(w) = h_t^{-1}(w) by backward integration."""
    fld = _Field(p, lam)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    return _integrate(fld, w, t, 0.0, c=c).z


@dataclass
class BoundaryFlow:
    times: np.ndarray = field(repr=False)
    u0: np.ndarray = field(repr=False)
    trajectories: np.ndarray = field(repr=False)
    swallowed: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)


def forward_boundary_flow(p: DrivingPath, u0_grid, lam: WeightFunction | None = None, c: float = 0.02) -> BoundaryFlow:
    """Flow boundary angles u0 up to p.T; trajectories sampled at the driver's grid."""
    u0 = np.asarray(u0_grid, dtype=float).reshape(-1)
    d0 = np.abs(np.mod(u0[:, None] - p.states[0][None, :] + math.pi, 2 * math.pi) - math.pi).min(axis=1)
    if np.any(d0 <= SWALLOW_CUTOFF):
        raise ValueError("boundary points must differ from the initial driving angles")
    fld = _Field(p, lam)
    res = _integrate(fld, u0.astype(complex), 0.0, p.T, c=c, swallow=True, record_times=p.times)
    traj = res.record.real
    tau = np.where(res.swallowed, res.s_stop, np.inf)
    return BoundaryFlow(p.times.copy(), u0, traj, res.swallowed, tau)


@dataclass
class HullCloud:
    points: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    grid_points: np.ndarray = field(repr=False)
    grid_tau: np.ndarray = field(repr=False)
    T: float = 0.0

    def to_csv(self) -> str:
        rows = ["re,im,tau"]
        for z, t in zip(self.points, self.tau):
            rows.append(f"{float(z.real)!r},{float(z.imag)!r},{float(t)!r}")
        return "\n".join(rows) + "\n"


def polar_grid(resolution=(512, 512)) -> np.ndarray:
    nr, na = resolution
    r = (np.arange(nr) + 0.5) / nr
    ang = 2 * math.pi * np.arange(na) / na
    return (r[:, None] * np.exp(1j * ang)[None, :]).reshape(-1)


def swallowing_times(p: DrivingPath, z, T: float | None = None, lam: WeightFunction | None = None, c: float = 0.05):
    """tau_z for interior points z (inf when not swallowed by T)."""
    T = p.T if T is None else T
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(np.abs(z) >= 1) or np.any(z == 0):
        raise ValueError("points must lie in the punctured open disk")
    u = -1j * np.log(z)
    fld = _Field(p, lam)
    res = _integrate(fld, u, 0.0, T, c=c, swallow=True)
    return np.where(res.swallowed, res.s_stop, np.inf)


def loewner_hull(p: DrivingPath, T: float | None = None, resolution=(512, 512), lam: WeightFunction | None = None, c: float = 0.05) -> HullCloud:
    """Grid points with tau_z <= T plus the n base points exp(i theta_0)."""
    T = p.T if T is None else T
    base = np.exp(1j * p.states[0])
    zs = polar_grid(resolution)
    tau = swallowing_times(p, zs, T, lam, c) if T > 0 else np.full(zs.size, np.inf)
    inside = tau <= T
    pts = np.concatenate([base, zs[inside]])
    taus = np.concatenate([np.zeros(base.size), tau[inside]])
    return HullCloud(pts, taus, zs, tau, T)


def capacity_check(p: DrivingPath, lam: WeightFunction | None = None, t: float | None = None, r: float = 1e-6, m: int = 8):
    """(measured log|g_t(z)/z| averaged over m points of |z| = r, expected n int_0^t lam)."""
    t = p.T if t is None else t
    lam_ = lam if lam is not None else WeightFunction.constant(1.0)
    expected = p.n * float(lam_.integral(t))
    if t == 0:
        return 0.0, expected
    L = -math.log(r)
    u0 = 2 * math.pi * np.arange(m) / m + 1j * L
    ht = forward_map(p, t, u0, lam)
    return float(np.mean(L - ht.imag)), expected


@dataclass
class LoewnerTrace:
    times: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)  # (n_chords, n_times) complex
    y0: float = 1e-4
    flagged: np.ndarray | None = field(default=None, repr=False)
    deriv_abs: np.ndarray | None = field(default=None, repr=False)
    deriv_bound: float | None = None

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def chord(self, j: int) -> np.ndarray:
        return self.points[j]

    def to_csv(self) -> str:
        rows = ["chord,t,re,im"]
        for j in range(self.n):
            for t, z in zip(self.times, self.points[j]):
                rows.append(f"{j + 1},{float(t)!r},{float(z.real)!r},{float(z.imag)!r}")
        return "\n".join(rows) + "\n"


def _backward_points(fld, p, ts, y, c, deriv=False):
    # one member per (chord, time) starting at theta^j_t + i y
    n = p.n
    th = p.at(ts)  # (m, n)
    w = (th + 1j * y).T.reshape(-1)
    s0 = np.tile(ts, n)
    res = _integrate(fld, w, s0, 0.0, deriv=deriv, groups=np.arange(w.size), c=c)
    return res.z.reshape(n, -1), (None if res.dz is None else res.dz.reshape(n, -1)), res.flagged.reshape(n, -1)


def trace(
    p: DrivingPath,
    sample_times,
    y0: float = 1e-4,
    lam: WeightFunction | None = None,
    richardson: bool = True,
    c: float = 0.02,
) -> LoewnerTrace:
    """gamma^j_t ~ exp(i f_t(theta^j_t + i y0)), extrapolated with y0/2 when ``richardson``."""
    ts = np.asarray(sample_times, dtype=float).reshape(-1)
    if np.any(ts < 0) or np.any(ts > p.T + 1e-12):
        raise ValueError("sample times outside the driver's domain")
    fld = _Field(p, lam)
    z1, _, fl1 = _backward_points(fld, p, ts, y0, c)
    g1 = np.exp(1j * z1)
    if richardson:
        z2, _, fl2 = _backward_points(fld, p, ts, 0.5 * y0, c)
        g = 2 * np.exp(1j * z2) - g1
        flagged = fl1 | fl2
    else:
        g, flagged = g1, fl1
    # exact start points; extrapolation can nudge a point just past the circle
    g[:, ts == 0] = np.exp(1j * p.states[0])[:, None]
    mod = np.abs(g)
    g = np.where(mod > 1, g / np.maximum(mod, 1e-300), g)
    out = LoewnerTrace(ts, g, y0, flagged)
    if p.n == 1:
        d = np.array([trace_derivative_bound(p, lam, t, y0)[0] if t > 0 else 1.0 for t in ts])
        out.deriv_abs = d
        out.deriv_bound = derivative_bound(p, lam)
    return out


def derivative_bound(p: DrivingPath, lam: WeightFunction | None = None) -> float:
    """exp(sup(1/lam) E_T / 2)."""
    lam_ = lam if lam is not None else WeightFunction.constant(1.0)
    return math.exp(0.5 * lam_.sup_inv * dirichlet_energy(p))


def backward_derivative(p: DrivingPath, t, y, lam: WeightFunction | None = None, c: float = 0.02, fd: float | None = None):
    # fd is the stencil spacing as a fraction of y; 2*fd must stay below 1
    """f_t(theta_t + i y), f_t' there, and optionally a centred y-difference estimate of f_t'.

    ``t`` and ``y`` broadcast.  The finite-difference members share step
    sequences with the central one so the comparison sees one smooth map.
    """
    if p.n != 1:
        raise ValueError("derivative diagnostics are defined for n = 1")
    t, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
    t, y = t.reshape(-1), y.reshape(-1)
    fld = _Field(p, lam)
    w = p.at(t)[:, 0] + 1j * y
    m = w.size
    if fd is None:
        res = _integrate(fld, w, t, 0.0, deriv=True, groups=np.arange(m), c=c)
        return res.z, res.dz, None
    # fourth-order centred stencil in y with offsets +-dy, +-2dy
    dy = fd * y
    offs = [1, -1, 2, -2]
    ws = np.concatenate([w] + [w + 1j * o * dy for o in offs])
    res = _integrate(fld, ws, np.tile(t, 5), 0.0, deriv=True, groups=np.tile(np.arange(m), 5), c=c)
    f = res.z[:m]
    p1, m1, p2, m2 = (res.z[(k + 1) * m:(k + 2) * m] for k in range(4))
    fd_est = (8.0 * (p1 - m1) - (p2 - m2)) / (12j * dy)
    return f, res.dz[:m], fd_est


def trace_derivative_bound(p: DrivingPath, lam: WeightFunction | None, t: float, y: float) -> tuple[float, float]:
    """(|f_t'(theta_t + i y)|, exp(sup(1/lam) E_T / 2)) for a single driver (n = 1)."""
    _, d, _ = backward_derivative(p, t, y, lam)
    return float(abs(d[0])), derivative_bound(p, lam)


def slit_radius(T: float) -> float:
    """Root in (0, 1] of (1+r)^2 / (4r) = e^T."""
    e = math.exp(T)
    return 2 * e - 1 - 2 * math.sqrt(e * e - e)


def render_svg(chords=None, hull=None, size: int = 512) -> str:
    """Minimal SVG: unit circle, one path per chord, hull points as a single path of dots."""
    half = size / 2
    sc = 0.95 * half

    def xy(z):
        return f"{half + sc * z.real:.6f},{half - sc * z.imag:.6f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<circle cx="{half}" cy="{half}" r="{sc:.6f}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    if chords is not None:
        for j, pts in enumerate(chords):
            pts = np.asarray(pts)
            d = "M " + " L ".join(xy(z) for z in pts)
            out.append(f'<path id="chord{j + 1}" d="{d}" fill="none" stroke="crimson" stroke-width="1.5"/>')
    if hull is not None and len(hull):
        d = " ".join(f"M {xy(z)} h 0.5" for z in np.asarray(hull))
        out.append(f'<path id="hull" d="{d}" fill="none" stroke="steelblue" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
