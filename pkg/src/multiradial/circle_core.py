"""Static interaction functions on the ordered torus.

Angles live on lifts: a configuration is an increasing array with
``theta[-1] < theta[0] + 2*pi``.  Nothing here reduces angles mod 2*pi.

The array helpers (``drift_array``, ``psi_array`` ...) accept stacked
configurations of shape ``(..., n)`` and are what the simulators call in
their inner loops.  The scalar-style operations wrap them for a single
:class:`AngleConfiguration`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
COLLISION_TOL = 1e-12


class SingularConfigurationError(ValueError):
    """Raised when two angles coincide on the circle."""


class OrderingError(ValueError):
    """Raised when angles are not cyclically ordered."""


def cyclic_gaps(theta):
    """Consecutive gaps theta[j+1]-theta[j], closing with theta[0]+2pi-theta[-1]."""
    theta = np.asarray(theta, dtype=float)
    wrap = theta[..., :1] + TWO_PI - theta[..., -1:]
    return np.concatenate([np.diff(theta, axis=-1), wrap], axis=-1)


def chordal_gaps(theta):
    """Chordal distances |e^{i a} - e^{i b}| between cyclic neighbours."""
    return 2.0 * np.abs(np.sin(0.5 * cyclic_gaps(theta)))


def is_ordered(theta) -> np.ndarray:
    """True where every cyclic gap is positive and no chord is below tolerance."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] == 1:
        return np.ones(theta.shape[:-1], dtype=bool)
    g = cyclic_gaps(theta)
    ok = np.all(g > 0, axis=-1) & np.all(2.0 * np.abs(np.sin(0.5 * g)) >= COLLISION_TOL, axis=-1)
    return ok


@dataclass(frozen=True)
class AngleConfiguration:
    """A point of the ordered torus; ``angles`` is a read-only float array."""

    angles: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.angles, dtype=float).reshape(-1)
        if a.size == 0:
            raise ValueError("need at least one angle")
        if not np.all(np.isfinite(a)):
            raise ValueError("angles must be finite")
        if a.size > 1:
            g = cyclic_gaps(a)
            if np.any(g <= 0):
                raise OrderingError(f"angles not cyclically ordered: gaps {g.tolist()}")
            if np.any(2.0 * np.abs(np.sin(0.5 * g)) < COLLISION_TOL):
                raise SingularConfigurationError("collision: chordal gap below 1e-12")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @property
    def n(self) -> int:
        return int(self.angles.size)

    @classmethod
    def equally_spaced(cls, n: int, offset: float = 0.0) -> "AngleConfiguration":
        return cls(offset + TWO_PI * np.arange(n) / n)

    def rotate(self, c: float) -> "AngleConfiguration":
        return AngleConfiguration(self.angles + c)

    def __repr__(self):
        return f"AngleConfiguration({np.array2string(self.angles, precision=6)})"


def _as_array(theta) -> np.ndarray:
    if isinstance(theta, AngleConfiguration):
        return theta.angles
    return np.asarray(theta, dtype=float)


def _check_regular(theta: np.ndarray):
    if theta.shape[-1] > 1 and np.any(chordal_gaps(theta) < COLLISION_TOL):
        raise SingularConfigurationError("collision: chordal gap below 1e-12")


def _pair_half_diffs(theta):
    # (..., n, n) array of (theta_j - theta_k)/2; diagonal filled later
    return 0.5 * (theta[..., :, None] - theta[..., None, :])


def drift_array(theta, a: float = 4.0) -> np.ndarray:
    """phi_a^j = (a/4) sum_{k != j} cot((theta_j - theta_k)/2), vectorised over leading axes."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    if n == 1:
        return np.zeros_like(theta)
    x = _pair_half_diffs(theta)
    idx = np.arange(n)
    x[..., idx, idx] = 0.5 * math.pi  # cot(pi/2) = 0 on the diagonal
    c = np.cos(x) / np.sin(x)
    c[..., idx, idx] = 0.0
    return 0.25 * a * c.sum(axis=-1)


def psi_array(theta) -> np.ndarray:
    """psi^j = sum_{k != j} csc^2((theta_j - theta_k)/2)."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    if n == 1:
        return np.zeros_like(theta)
    x = _pair_half_diffs(theta)
    idx = np.arange(n)
    x[..., idx, idx] = 0.5 * math.pi
    s = 1.0 / np.sin(x) ** 2
    s[..., idx, idx] = 0.0
    return s.sum(axis=-1)


def drift_jacobian(theta, a: float = 4.0) -> np.ndarray:
    """Symmetric matrix d phi_a^j / d theta^l of shape (..., n, n)."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    if n == 1:
        return np.zeros(theta.shape + (1,))
    x = _pair_half_diffs(theta)
    idx = np.arange(n)
    x[..., idx, idx] = 0.5 * math.pi
    s = 0.5 / np.sin(x) ** 2
    s[..., idx, idx] = 0.0
    jac = s.copy()
    jac[..., idx, idx] = -s.sum(axis=-1)
    return 0.25 * a * jac


def log_F_array(theta) -> np.ndarray:
    """log prod_{j<k} |sin((theta_k - theta_j)/2)|; -inf at collisions."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    if n == 1:
        return np.zeros(theta.shape[:-1])
    j, k = np.triu_indices(n, 1)
    s = np.abs(np.sin(0.5 * (theta[..., k] - theta[..., j])))
    with np.errstate(divide="ignore"):
        return np.log(s).sum(axis=-1)


def interaction_drift(theta, j: int, a: float = 4.0) -> float:
    """Angular drift phi_a^j for 0-based index ``j``; a=4 gives the raw phi^j."""
    if a <= 0:
        raise ValueError("a must be positive")
    arr = _as_array(theta)
    if not 0 <= j < arr.shape[-1]:
        raise IndexError(f"index {j} out of range for n={arr.shape[-1]}")
    _check_regular(arr)
    return float(drift_array(arr, a)[j])


def repulsion_psi(theta) -> tuple[np.ndarray, float]:
    """Per-index psi^j and their total."""
    arr = _as_array(theta)
    _check_regular(arr)
    pj = psi_array(arr)
    return pj, float(pj.sum())


def vandermonde_F(theta, alpha: float = 1.0) -> float:
    """F(theta)**alpha; inf when F = 0 and alpha < 0."""
    lf = float(log_F_array(_as_array(theta)))
    if lf == -math.inf:
        if alpha > 0:
            return 0.0
        return 1.0 if alpha == 0 else math.inf
    return math.exp(alpha * lf)


def log_potential_G(theta, a: float = 4.0) -> float:
    """G_a = -a log F; returns inf at collisions."""
    if a <= 0:
        raise ValueError("a must be positive")
    arr = _as_array(theta)
    if arr.shape[-1] > 1 and np.any(chordal_gaps(arr) < COLLISION_TOL):
        return math.inf
    return float(-a * log_F_array(arr))


@dataclass(frozen=True)
class GapStats:
    delta_min: float
    y: float
    Y: float
    d: float
    argmin: tuple[int, ...]


def gap_stats(theta, tie_tol: float = 1e-12) -> GapStats:
    """Minimum gap, deficits y and Y, d = max(y, Y), and all argmin indices.

    ``argmin`` holds every j whose gap theta[j+1]-theta[j] is within
    ``tie_tol`` of the minimum.
    """
    arr = _as_array(theta)
    n = arr.shape[-1]
    g = cyclic_gaps(arr)
    delta = float(g.min())
    y = max(TWO_PI / n - delta, 0.0)
    Y = max(float(g.max()) - TWO_PI / n, 0.0)
    ties = tuple(int(i) for i in np.flatnonzero(g <= delta + tie_tol))
    return GapStats(delta, y, Y, max(y, Y), ties)


def gap_stats_array(theta) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (Delta, d) over leading axes."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    g = cyclic_gaps(theta)
    delta = g.min(axis=-1)
    y = np.maximum(TWO_PI / n - delta, 0.0)
    Y = np.maximum(g.max(axis=-1) - TWO_PI / n, 0.0)
    return delta, np.maximum(y, Y)
