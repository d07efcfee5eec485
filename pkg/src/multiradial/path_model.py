"""Driving paths on a time grid, interpreted piecewise linearly."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circle_core import TWO_PI, AngleConfiguration, OrderingError, cyclic_gaps, is_ordered


class PathError(ValueError):
    """Malformed path or incompatible path operands."""


@dataclass(frozen=True)
class DrivingPath:
    """Samples ``states[k]`` of an n-particle configuration at ``times[k]``.

    ``terminated_at`` records a collision time; samples stop at or before it.
    """

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    terminated_at: float | None = None

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        s = np.array(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] != t.size:
            raise PathError(f"states shape {s.shape} does not match {t.size} times")
        if t.size == 0 or t[0] != 0.0:
            raise PathError("times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise PathError("times must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise PathError("states must be finite")
        bad = ~is_ordered(s)
        if self.terminated_at is not None and self.terminated_at == t[-1]:
            # the final sample may be the collision itself, but never a crossing
            bad[-1] = s.shape[1] > 1 and bool(np.any(cyclic_gaps(s[-1]) < 0))
        if np.any(bad):
            k = int(np.argmax(bad))
            raise OrderingError(f"state at t={t[k]!r} violates cyclic ordering or collides")
        if self.terminated_at is not None and self.terminated_at < t[-1]:
            raise PathError("samples extend past the termination time")
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def n(self) -> int:
        return int(self.states.shape[1])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return int(self.times.size)

    def state(self, k: int) -> AngleConfiguration:
        return AngleConfiguration(self.states[k])

    def at(self, t) -> np.ndarray:
        """Linear interpolation; ``t`` scalar or 1-d array, result (..., n)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-12) + 1e-15):
            raise PathError("time outside the path's domain")
        out = np.stack([np.interp(t, self.times, self.states[:, j]) for j in range(self.n)], axis=-1)
        return out

    def resample(self, times) -> "DrivingPath":
        times = np.asarray(times, dtype=float)
        return DrivingPath(times, self.at(times), self.terminated_at)

    def truncate(self, T: float) -> "DrivingPath":
        """Restrict to [0, T]; T is added as a sample when it is off-grid."""
        keep = self.times < T
        times = np.append(self.times[keep], T)
        return DrivingPath(times, self.at(times))

    def shifted(self, c) -> "DrivingPath":
        return DrivingPath(self.times, self.states + np.asarray(c, dtype=float), self.terminated_at)

    @classmethod
    def from_function(cls, f, T: float, step: float) -> "DrivingPath":
        k = max(int(round(T / step)), 1)
        times = np.linspace(0.0, T, k + 1)
        return cls(times, np.array([np.atleast_1d(f(t)) for t in times]))

    @classmethod
    def constant(cls, theta0, T: float, step: float) -> "DrivingPath":
        theta0 = np.atleast_1d(np.asarray(getattr(theta0, "angles", theta0), dtype=float))
        k = max(int(round(T / step)), 1)
        times = np.linspace(0.0, T, k + 1)
        return cls(times, np.broadcast_to(theta0, (times.size, theta0.size)))

    # CSV: header t,theta1..thetan, repr floats (shortest round-trip form)
    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(["t"] + [f"theta{j + 1}" for j in range(self.n)]) + "\n")
        for t, row in zip(self.times, self.states):
            buf.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_bytes(text.encode("utf-8"))
        return text

    @classmethod
    def from_csv(cls, src) -> "DrivingPath":
        p = Path(src) if not isinstance(src, io.StringIO) else None
        text = p.read_text(encoding="utf-8") if p is not None else src.getvalue()
        lines = [ln for ln in text.split("\n") if ln.strip()]
        if not lines:
            raise PathError("empty path file")
        head = lines[0].strip().split(",")
        n = len(head) - 1
        if n < 1 or head != ["t"] + [f"theta{j + 1}" for j in range(n)]:
            raise PathError(f"line 1: bad header {lines[0]!r}")
        rows = []
        for i, ln in enumerate(lines[1:], start=2):
            parts = ln.split(",")
            if len(parts) != n + 1:
                raise PathError(f"line {i}: expected {n + 1} fields, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise PathError(f"line {i}: {exc}") from None
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1:])


@dataclass(frozen=True)
class TimeChange:
    """Samples of an increasing map sigma with sigma(0) = 0."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or t.size < 2:
            raise PathError("time change needs matching 1-d samples")
        if t[0] != 0.0 or v[0] != 0.0:
            raise PathError("time change must satisfy sigma(0) = 0")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) <= 0):
            raise PathError("invalid time change: sigma must be strictly increasing on samples")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def rates(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.times)

    @property
    def sup_rate(self) -> float:
        return float(self.rates.max())

    @property
    def sup_inv_rate(self) -> float:
        return float((1.0 / self.rates).max())

    def inverse(self) -> "TimeChange":
        return TimeChange(self.values, self.times)

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    @classmethod
    def from_function(cls, sigma, T: float, step: float) -> "TimeChange":
        k = max(int(round(T / step)), 1)
        t = np.linspace(0.0, T, k + 1)
        v = np.array([sigma(s) for s in t], dtype=float)
        v[0] = 0.0
        return cls(t, v)


def _same_grid(p: DrivingPath, q: DrivingPath):
    if p.n != q.n:
        raise PathError(f"dimension mismatch: n={p.n} vs n={q.n}")
    if p.times.shape != q.times.shape or not np.array_equal(p.times, q.times):
        q = q.resample(p.times)
    return q


def sup_distance(p: DrivingPath, q: DrivingPath) -> float:
    """max_t |p_t - q_t| (Euclidean in R^n); q is resampled onto p's grid if needed."""
    q = _same_grid(p, q)
    return float(np.sqrt(((p.states - q.states) ** 2).sum(axis=1)).max())


def apply_time_change(p: DrivingPath, tc: TimeChange) -> DrivingPath:
    """Path t -> p(sigma(t)) on the time change's own grid."""
    if tc.values[-1] > p.T * (1 + 1e-12):
        raise PathError("time change leaves the path's domain")
    vals = np.minimum(tc.values, p.T)
    return DrivingPath(tc.times, p.at(vals))


def embed_circle(p) -> np.ndarray:
    """exp(i theta) for a path or a plain array of angles."""
    arr = p.states if isinstance(p, DrivingPath) else np.asarray(p, dtype=float)
    return np.exp(1j * arr)


def principal_angles(z) -> np.ndarray:
    """Inverse of ``embed_circle`` with angles in [0, 2pi)."""
    return np.mod(np.angle(z), TWO_PI)


def numeric_derivative(p: DrivingPath) -> tuple[np.ndarray, np.ndarray]:
    """(interval midpoints, difference quotients) of shape (K,), (K, n)."""
    if len(p) < 2:
        raise PathError("need at least two samples")
    h = np.diff(p.times)
    return 0.5 * (p.times[1:] + p.times[:-1]), np.diff(p.states, axis=0) / h[:, None]


def dirichlet_bounds_under_time_change(E: float, tc: TimeChange) -> tuple[float, float]:
    """Interval [E inf sigma', E sup sigma'] containing the energy of the changed path."""
    r = tc.rates
    return E * float(r.min()), E * float(r.max())


def linear_grid(T: float, step: float) -> np.ndarray:
    k = max(int(math.ceil(T / step - 1e-9)), 1)
    return np.linspace(0.0, T, k + 1)
