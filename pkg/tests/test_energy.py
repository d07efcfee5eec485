import math

import numpy as np
import pytest

from multiradial.circle_core import log_potential_G
from multiradial.cm_flow import zero_energy_flow
from multiradial.energy import (
    decomposition_check,
    dirichlet_energy,
    energy_report,
    energy_series,
    multiradial_energy,
    phi_functional,
)
from multiradial.path_model import DrivingPath


def trig_path(n=3, T=1.0, step=1e-3, seed=5):
    rng = np.random.default_rng(seed)
    base = 2 * math.pi * np.arange(n) / n
    amp = rng.uniform(-0.2, 0.2, (n, 3))
    fr = rng.uniform(0.5, 3.0, (n, 3))
    return DrivingPath.from_function(lambda t: base + (amp * np.sin(fr * t)).sum(axis=1), T, step)


def test_dirichlet_examples():
    assert dirichlet_energy(DrivingPath.constant([0.0, 1.0], 2.0, 0.1)) == 0.0
    assert dirichlet_energy(DrivingPath.from_function(lambda t: t, 3.0, 0.01)) == pytest.approx(1.5, rel=1e-12)
    T = 2.0
    p = DrivingPath.from_function(lambda t: math.log1p(t), T, 1e-4)
    assert dirichlet_energy(p) == pytest.approx(0.5 * (1 - 1 / (1 + T)), rel=1e-7)


def test_zero_energy_flow_has_small_J():
    p = zero_energy_flow([0.0, 0.5, 2.0], 1.0, 1e-3)
    assert multiradial_energy(p) <= 1e-6


def test_equally_spaced_copies():
    n = 3
    one = DrivingPath.from_function(lambda t: 0.4 * np.sin(2 * t), 1.0, 1e-3)
    copies = DrivingPath(one.times, one.states + 2 * math.pi * np.arange(n) / n)
    assert multiradial_energy(copies) == pytest.approx(n * dirichlet_energy(one), rel=1e-10)


def test_counterexample_energy():
    from multiradial.cm_flow import counterexample_driver

    eps, T = 0.1, 5.0
    p, _ = counterexample_driver(eps, T, 1e-3)
    assert multiradial_energy(p) == pytest.approx(0.5 * eps**2 * (1 - 1 / (1 + T)), abs=1e-8)


def test_phi_constant_equally_spaced():
    for n in (2, 3, 4):
        p = DrivingPath.constant(2 * math.pi * np.arange(n) / n, 1.5, 0.01)
        for kappa in (0.0, 0.5, 2.0):
            expect = kappa * 1.5 * 4 * n * (n * n - 1) / 24
            assert phi_functional(p, kappa) == pytest.approx(expect, rel=1e-12, abs=1e-12)
            assert phi_functional(p, kappa, form="identity") == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_phi0_upper_bound_and_monotone():
    p = trig_path()
    G0 = log_potential_G(p.states[0])
    vals = [phi_functional(p, k) for k in (2.0, 1.0, 0.5, 0.1, 0.0)]
    assert vals[-1] <= G0
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_decomposition_and_refinement():
    p = trig_path()
    J = multiradial_energy(p)
    assert abs(decomposition_check(p)) <= 1e-6 * (1 + J)
    r = [abs(decomposition_check(p.resample(p.times[::k]))) for k in (4, 2, 1)]
    # midpoint rule: residual falls by about four per halving
    assert r[0] / r[1] > 3.5 and r[1] / r[2] > 3.5
    assert decomposition_check(DrivingPath.constant([0.0, 2.0, 4.0], 1.0, 0.1)) == pytest.approx(0.0, abs=1e-14)


def test_single_particle():
    p = DrivingPath.from_function(lambda t: np.sin(t), 1.0, 1e-3)
    assert phi_functional(p, 0.0) == 0.0
    assert multiradial_energy(p) == dirichlet_energy(p)


def test_collided_path_is_infinite():
    p = DrivingPath([0.0, 1.0], [[0.0, 1.0], [0.5, 0.5]], terminated_at=1.0)
    assert multiradial_energy(p) == math.inf
    assert phi_functional(p, 1.0) == math.inf
    rep = energy_report(p)
    assert rep.to_dict()["multiradial_J"] == "inf"


def test_spiral_rho():
    rho = 0.7
    p = zero_energy_flow([0.0, 1.0, 3.0], 0.5, 1e-3, rho=rho)
    assert multiradial_energy(p, rho=rho) <= 1e-6
    assert multiradial_energy(p) > 0.1


def test_report_and_series():
    p = trig_path(step=1e-2)
    rep = energy_report(p, kappa=0.5)
    d = rep.to_dict()
    assert set(d) == {"dirichlet_E", "multiradial_J", "phi_kappa_a", "residual", "params", "per_interval"}
    rows = np.array(d["per_interval"])
    assert rows.shape == (len(p) - 1, 5)
    assert rows[:, 3].sum() == pytest.approx(d["multiradial_J"], rel=1e-12)
    s = energy_series(p)
    assert s[0] == 0 and s[-1] == pytest.approx(d["multiradial_J"], rel=1e-12)
    assert rep.to_json() == energy_report(p, kappa=0.5).to_json()
    zero = energy_report(DrivingPath.constant([0.0, math.pi], 1.0, 0.1))
    assert zero.dirichlet_E == 0.0 and abs(zero.multiradial_J) < 1e-25 and abs(zero.decomposition_residual) < 1e-25
