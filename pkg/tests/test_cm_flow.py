import math

import numpy as np
import pytest

from multiradial.circle_core import gap_stats_array
from multiradial.cm_flow import (
    convergence_report,
    counterexample_driver,
    fit_rate,
    gap_bound_check,
    two_particle_gap,
    zero_energy_flow,
    zero_energy_flows,
)
from multiradial.energy import energy_series
from multiradial.path_model import DrivingPath

PI = math.pi


def closed_gap(g0, t):
    return 2 * np.arccos(math.cos(g0 / 2) * np.exp(-2 * t))


def test_equally_spaced_is_fixed():
    p = zero_energy_flow(2 * PI * np.arange(4) / 4, 1.0, 1e-2)
    assert np.abs(p.states - p.states[0]).max() < 1e-14


def test_two_particle_closed_form():
    p = zero_energy_flow([0.0, PI / 2], 2.0, 1e-3)
    g = p.states[:, 1] - p.states[:, 0]
    np.testing.assert_allclose(g, closed_gap(PI / 2, p.times), atol=1e-10)
    assert g[1000] == pytest.approx(2.9499063263725898, abs=1e-10)
    _, d = gap_stats_array(p.states)
    assert d[-1] == pytest.approx(0.025902949, abs=1e-8)
    np.testing.assert_allclose(two_particle_gap(PI / 2, p.times), closed_gap(PI / 2, p.times))


def test_rotation_rho():
    rho = 1.0
    p = zero_energy_flow([0.0, 1.0], 1.0, 1e-3, rho=rho)
    q = zero_energy_flow([0.0, 1.0], 1.0, 1e-3)
    np.testing.assert_allclose(p.states[:, 1] - p.states[:, 0], q.states[:, 1] - q.states[:, 0], atol=1e-12)
    np.testing.assert_allclose(p.states.mean(axis=1) - q.states.mean(axis=1), rho * p.times, atol=1e-12)


def test_fitted_rate_n2():
    p = zero_energy_flow([0.0, PI / 2], 3.0, 1e-3)
    rep = convergence_report(p)
    assert rep.rate_reliable
    assert abs(rep.fitted_rate - 2) / 2 <= 0.05


def test_linearised_rate_for_three_points():
    # the slowest mode of the linearisation decays at 2(n-1)
    p = zero_energy_flow([0.0, 2 * PI / 3 - 0.2, 4 * PI / 3 + 0.1], 6.0, 1e-2)
    rep = convergence_report(p)
    assert rep.fitted_rate == pytest.approx(4.0, rel=0.01)


def test_convergence_report_constant():
    p = DrivingPath.constant([0.3, 0.3 + PI], 1.0, 0.1)
    rep = convergence_report(p, np.zeros(len(p)))
    assert np.all(rep.d_series == 0) and np.all(rep.bound_series == 0)
    assert rep.limit_angle == pytest.approx(0.3)
    assert not rep.rate_reliable
    assert '"fitted_rate": null' in rep.to_json()


def test_bound_dominates_d_for_zero_energy(rng):
    for n in (2, 3, 4):
        th = 2 * PI * np.arange(n) / n + rng.uniform(-0.2, 0.2, n)
        p = zero_energy_flow(th, 2.0, 1e-3)
        rep = convergence_report(p, energy_series(p))
        assert np.all(rep.d_series <= rep.bound_series + 1e-9)


def test_min_gap_monotone(rng):
    for n in (2, 3, 5, 7):
        th = np.sort(rng.uniform(0, 2 * PI, n))
        p = zero_energy_flow(th, 1.0, 1e-3)
        delta, _ = gap_stats_array(p.states)
        assert np.diff(delta).min() >= -1e-10


def test_gap_bound_check_examples(rng):
    out = gap_bound_check(2 * PI * np.arange(4) / 4)
    assert len(out) == 4
    for _, lhs, rhs in out:
        assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12
    (j, lhs, rhs), = gap_bound_check([0.0, PI / 2])
    assert j == 0 and lhs == pytest.approx(2.0) and rhs == pytest.approx(PI / 2)
    for n in range(2, 7):
        for _ in range(200):
            for _, lhs, rhs in gap_bound_check(np.sort(rng.uniform(0, 2 * PI, n))):
                assert lhs >= rhs - 1e-9 and rhs >= -1e-12


def test_counterexample():
    p, lower = counterexample_driver(0.1, 10.0, 1e-3)
    _, d = gap_stats_array(p.states)
    assert np.all(d >= lower)
    p0, _ = counterexample_driver(1e-300, 1.0, 1e-2)
    assert np.abs(p0.states - p0.states[0]).max() < 1e-12
    with pytest.raises(ValueError):
        counterexample_driver(2.0, 1.0)


def test_fit_rate_synthetic():
    t = np.linspace(0, 5, 501)
    rate, ok = fit_rate(t, 0.3 * np.exp(-3.3 * t))
    assert ok and rate == pytest.approx(3.3, rel=1e-10)
    r, ok = fit_rate(t, np.zeros_like(t))
    assert not ok and math.isnan(r)


def test_batched_flows_match_single_flows():
    starts = [[0.0, 0.7, 2.5], [0.0, 2.0, 4.3], [1.0, 2.0, 3.0]]
    for s, p in zip(starts, zero_energy_flows(starts, 1.0, 1e-3, a=3.0, rho=0.2)):
        q = zero_energy_flow(s, 1.0, 1e-3, a=3.0, rho=0.2)
        np.testing.assert_array_equal(p.times, q.times)
        np.testing.assert_array_equal(p.states, q.states)
