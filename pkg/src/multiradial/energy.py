"""Dirichlet energy, multiradial energy and the interaction functional Phi.

Every functional uses the same midpoint rule on the piecewise-linear
interpolant: velocities are difference quotients and drifts are evaluated
at the interval midpoint state.  The boundary part of Phi uses the exact
endpoint states.  Collisions give ``math.inf`` rather than an exception.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circle_core import drift_array, log_F_array, psi_array
from .path_model import DrivingPath

INF = math.inf


def _pieces(times, states, a):
    h = np.diff(times)
    v = np.diff(states, axis=-2) / h[:, None]
    mid = 0.5 * (states[..., 1:, :] + states[..., :-1, :])
    return h, v, mid, drift_array(mid, a)


def interval_terms(times, states, kappa: float = 0.0, a: float = 4.0, rho: float = 0.0):
    """Per-interval contributions (dE, dJ, dPhi_integral), each of shape (..., K).

    ``states`` may carry leading batch axes: (..., K+1, n).
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    h, v, mid, phi_a = _pieces(times, states, a)
    dE = 0.5 * h * (v**2).sum(axis=-1)
    dJ = 0.5 * h * ((v - 2.0 * phi_a - rho) ** 2).sum(axis=-1)
    psi_a = 0.25 * a * psi_array(mid).sum(axis=-1)
    dPhi = 0.5 * h * (kappa * psi_a - 4.0 * (phi_a**2).sum(axis=-1))
    return dE, dJ, dPhi


def phi_batch(times, states, kappa: float, a: float = 4.0) -> np.ndarray:
    """Phi^{kappa,a} over [0, times[-1]] for stacked collision-free paths (..., K+1, n)."""
    states = np.asarray(states, dtype=float)
    _, _, dPhi = interval_terms(times, states, kappa, a)
    lf = log_F_array(states[..., [0, -1], :])
    return a * (lf[..., 1] - lf[..., 0]) + dPhi.sum(axis=-1)


def phi_identity_batch(times, states, kappa: float, a: float = 4.0) -> np.ndarray:
    """Same functional through the rearranged form with the explicit constant term."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    n = states.shape[-1]
    h, _, _, phi_a = _pieces(times, states, a)
    lf = log_F_array(states[..., [0, -1], :])
    T = times[-1] - times[0]
    integral = (h * (phi_a**2).sum(axis=-1)).sum(axis=-1)
    return (
        a * (lf[..., 1] - lf[..., 0])
        + a * kappa * n * (n * n - 1) / 24.0 * T
        + 2.0 * (kappa - a) / a * integral
    )


def _collided(p: DrivingPath) -> bool:
    return p.terminated_at is not None


def dirichlet_energy(p: DrivingPath) -> float:
    """Half the sum over coordinates of the integrated squared velocity."""
    if len(p) < 2:
        return 0.0
    h = np.diff(p.times)
    v = np.diff(p.states, axis=0) / h[:, None]
    return float((0.5 * h * (v**2).sum(axis=1)).sum())


def multiradial_energy(p: DrivingPath, a: float = 4.0, rho: float = 0.0) -> float:
    """J^{a,rho}_T of the interpolant; inf for collision-terminated paths."""
    if a <= 0:
        raise ValueError("a must be positive")
    if _collided(p):
        return INF
    if len(p) < 2:
        return 0.0
    _, dJ, _ = interval_terms(p.times, p.states, 0.0, a, rho)
    return float(dJ.sum())


def phi_functional(p: DrivingPath, kappa: float, a: float = 4.0, form: str = "definition") -> float:
    """Phi^{kappa,a}_T; ``form='identity'`` evaluates the rearranged expression."""
    if kappa < 0 or a <= 0:
        raise ValueError("need kappa >= 0 and a > 0")
    if _collided(p):
        return INF
    if len(p) < 2:
        return 0.0
    if form == "definition":
        return float(phi_batch(p.times, p.states, kappa, a))
    if form == "identity":
        return float(phi_identity_batch(p.times, p.states, kappa, a))
    raise ValueError(f"unknown form {form!r}")


def decomposition_check(p: DrivingPath, a: float = 4.0) -> float:
    """J^a - (E - Phi^{0,a}); zero up to quadrature error for smooth paths."""
    J = multiradial_energy(p, a, 0.0)
    if math.isinf(J):
        return math.nan
    return J - (dirichlet_energy(p) - phi_functional(p, 0.0, a))


def energy_series(p: DrivingPath, a: float = 4.0, rho: float = 0.0) -> np.ndarray:
    """Running J_t at every sample time (starts at 0)."""
    if len(p) < 2:
        return np.zeros(1)
    _, dJ, _ = interval_terms(p.times, p.states, 0.0, a, rho)
    return np.concatenate([[0.0], np.cumsum(dJ)])


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


@dataclass
class EnergyReport:
    dirichlet_E: float
    multiradial_J: float
    phi_functional: float
    decomposition_residual: float
    params: dict
    per_interval: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dirichlet_E": _json_float(self.dirichlet_E),
            "multiradial_J": _json_float(self.multiradial_J),
            "phi_kappa_a": _json_float(self.phi_functional),
            "residual": _json_float(self.decomposition_residual),
            "params": self.params,
            "per_interval": [[_json_float(v) for v in row] for row in self.per_interval],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def energy_report(p: DrivingPath, kappa: float = 0.0, a: float = 4.0, rho: float = 0.0) -> EnergyReport:
    """All functionals for one path; per_interval rows are [t0, t1, dE, dJ, dPhi]."""
    params = {"kappa": kappa, "a": a, "rho": rho, "T": p.T, "n": p.n}
    E = dirichlet_energy(p)
    if _collided(p):
        return EnergyReport(E, INF, INF, math.nan, params, [])
    J = multiradial_energy(p, a, rho)
    Phi = phi_functional(p, kappa, a)
    res = decomposition_check(p, a)
    rows = []
    if len(p) >= 2:
        dE, dJ, dPhi = interval_terms(p.times, p.states, kappa, a, rho)
        rows = [
            [float(p.times[k]), float(p.times[k + 1]), float(dE[k]), float(dJ[k]), float(dPhi[k])]
            for k in range(dE.size)
        ]
    return EnergyReport(E, J, Phi, res, params, rows)
