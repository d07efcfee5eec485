import math

import numpy as np
import pytest

from multiradial.loewner import (
    WeightFunction,
    backward_derivative,
    capacity_check,
    derivative_bound,
    forward_boundary_flow,
    forward_map,
    inverse_map,
    loewner_hull,
    render_svg,
    slit_radius,
    swallowing_times,
    trace,
    trace_derivative_bound,
)
from multiradial.path_model import DrivingPath, apply_time_change

PI = math.pi


def wiggle(n=1, T=1.0, step=1e-3, amp=0.3):
    base = 2 * PI * np.arange(n) / n
    return DrivingPath.from_function(lambda t: base + amp * np.sin(2 * t + np.arange(n)), T, step)


def slit(T=1.0):
    return DrivingPath.constant([0.0], T, 1e-3)


def test_slit_radius_oracle():
    for T in (0.1, 0.5, 1.0, 2.0):
        r = slit_radius(T)
        assert (1 + r) ** 2 / (4 * r) == pytest.approx(math.exp(T), rel=1e-12)
    assert slit_radius(1.0) == pytest.approx(0.11416882512791471, rel=1e-12)


def test_weight_function():
    lam = WeightFunction([0.0, 0.5], [1.0, 2.0])
    assert lam(0.25) == 1.0 and lam(0.5) == 2.0
    assert lam.integral(1.0) == pytest.approx(1.5)
    assert lam.sup == 2.0 and lam.sup_inv == 1.0
    lin = WeightFunction([0.0, 1.0], [1.0, 3.0], "linear")
    assert lin.integral(1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        WeightFunction([0.0], [0.0])
    with pytest.raises(ValueError):
        WeightFunction([0.0, 0.0], [1.0, 1.0])


def test_boundary_flow_fixed_point_and_repulsion():
    bf = forward_boundary_flow(slit(0.5), [PI, 1.0, 5.0])
    np.testing.assert_allclose(bf.trajectories[0], PI, atol=1e-12)
    d1 = np.abs(bf.trajectories[1] - PI)
    d2 = np.abs(bf.trajectories[2] - PI)
    assert np.all(np.diff(d1) < 0) and np.all(np.diff(d2) < 0)
    assert not bf.swallowed.any()
    with pytest.raises(ValueError):
        forward_boundary_flow(slit(0.5), [0.0])


def test_finite_energy_does_not_swallow_boundary():
    p = wiggle(n=3, T=0.5)
    u0 = np.linspace(0.05, 2 * PI - 0.05, 60)
    u0 = u0[np.abs(np.mod(u0[:, None] - p.states[0] + PI, 2 * PI) - PI).min(axis=1) > 0.02]
    bf = forward_boundary_flow(p, u0)
    assert not bf.swallowed.any()


def test_hull_examples():
    h0 = loewner_hull(slit(0.5), T=0.0, resolution=(8, 8))
    np.testing.assert_allclose(h0.points, [1.0])
    h = loewner_hull(slit(0.5), resolution=(40, 64))
    r = slit_radius(0.5)
    inner = h.points[1:]
    assert np.all(np.abs(inner.imag) < 1e-12) and np.all(inner.real > 0)
    # swallowed grid points on the ray are exactly those beyond the tip
    grid_ray = (np.arange(40) + 0.5) / 40
    assert sorted(inner.real.round(12)) == sorted(grid_ray[grid_ray > r].round(12))
    csv = h.to_csv()
    assert csv.splitlines()[0] == "re,im,tau"


def test_pizza_hull_is_three_segments():
    p = DrivingPath.constant(2 * PI * np.arange(3) / 3, 0.2, 1e-3)
    h = loewner_hull(p, resolution=(30, 96))
    ang = np.angle(h.points[:, None] * np.exp(-1j * p.states[0])[None, :])
    assert np.abs(ang).min(axis=1).max() < 1e-12
    assert len(h.points) > 3


def test_swallowing_time_on_slit():
    # the point at radius r(t) is swallowed exactly at t
    t = 0.4
    tau = swallowing_times(slit(1.0), np.array([slit_radius(t) + 0j]))
    assert tau[0] == pytest.approx(t, abs=1e-3)
    with pytest.raises(ValueError):
        swallowing_times(slit(1.0), np.array([1.5 + 0j]))


def test_trace_examples():
    tr = trace(slit(1.0), [0.0, 0.5, 1.0])
    assert tr.points[0, 0] == 1.0
    assert abs(tr.points[0, 2] - slit_radius(1.0)) <= 1e-3
    assert abs(tr.points[0, 1] - slit_radius(0.5)) <= 1e-3
    mods = np.abs(trace(slit(2.0), np.linspace(0.2, 2.0, 10)).points[0])
    assert np.all(np.diff(mods) < 0)
    csv = tr.to_csv()
    assert csv.splitlines()[0] == "chord,t,re,im" and csv.splitlines()[1].startswith("1,0.0,1.0,")


def test_pizza_trace():
    p = DrivingPath.constant(2 * PI * np.arange(3) / 3 + 0.2, 0.2, 1e-3)
    tr = trace(p, np.linspace(0.02, 0.2, 10))
    ang = np.angle(tr.points * np.exp(-1j * p.states[0])[:, None])
    assert np.abs(ang).max() <= 1e-6
    np.testing.assert_allclose(np.abs(tr.points[:, -1]), slit_radius(9 * 0.2) ** (1 / 3), atol=1e-3)


def test_capacity_examples():
    meas, exp = capacity_check(wiggle(n=2), t=1.0)
    assert exp == 2.0 and abs(meas - exp) <= 1e-6
    lam = WeightFunction.constant(2.0)
    meas, exp = capacity_check(wiggle(n=1, T=0.5), lam, 0.5)
    assert exp == pytest.approx(1.0) and abs(meas - exp) <= 1e-6
    assert capacity_check(wiggle(), t=0.0) == (0.0, 0.0)


def test_inverse_consistency():
    p = wiggle(n=2, T=0.6)
    v = np.array([0.5 + 0.3j, 2.0 + 0.05j, 4.0 + 1.0j])
    f = inverse_map(p, 0.6, v)
    assert np.all(f.imag > 0)
    back = forward_map(p, 0.6, f)
    assert np.abs(back - v).max() <= 1e-6


def test_rotation_equivariance():
    p = wiggle(n=2, T=0.4)
    c = 0.7
    a = trace(p, [0.2, 0.4]).points
    b = trace(p.shifted([c, c]), [0.2, 0.4]).points
    np.testing.assert_allclose(b, a * np.exp(1j * c), atol=1e-9)


def test_time_change_covariance():
    p = wiggle(n=1, T=1.0, step=1e-3)
    lam = WeightFunction([0.0, 0.5], [1.0, 2.0])
    sigma = lam.time_change(p.times)
    q = apply_time_change(p, sigma.inverse())
    ts = np.array([0.3, 0.7, 1.0])
    a = trace(p, ts, lam=lam).points
    b = trace(q, sigma(ts)).points
    assert np.abs(a - b).max() <= 1e-5


def test_simple_curves_for_finite_energy():
    p = wiggle(n=3, T=0.3, amp=0.2)
    tr = trace(p, np.linspace(0.03, 0.3, 10))
    pts = tr.points
    for j in range(3):
        for k in range(j + 1, 3):
            assert np.abs(pts[j][:, None] - pts[k][None, :]).min() > 1e-3
        d = np.abs(pts[j][:, None] - pts[j][None, :])
        assert d[~np.eye(10, dtype=bool)].min() > 0


def test_derivative_bound_examples():
    assert derivative_bound(slit(1.0)) == 1.0
    for t in (0.25, 1.0):
        for y in (1e-2, 1e-4):
            val, bound = trace_derivative_bound(slit(1.0), None, t, y)
            assert val <= 1.0
    p = DrivingPath.from_function(lambda t: 0.5 * t, 1.0, 1e-3)
    assert derivative_bound(p) == pytest.approx(math.exp(0.0625), rel=1e-12)
    for t in (0.1, 0.5, 1.0):
        for y in (1e-2, 1e-3, 1e-4):
            val, bound = trace_derivative_bound(p, None, t, y)
            assert val <= bound
    lam = WeightFunction.constant(0.5)
    assert derivative_bound(p, lam) == pytest.approx(math.exp(0.125), rel=1e-12)


def test_variational_vs_finite_difference():
    p = DrivingPath.from_function(lambda t: 0.4 * np.sin(3 * t) + 0.2 * t, 1.0, 1e-3)
    t, y = np.meshgrid([0.2, 0.6, 1.0], [1e-2, 1e-3, 1e-4], indexing="ij")
    _, d, fd = backward_derivative(p, t.ravel(), y.ravel(), fd=0.25)
    assert (np.abs(fd - d) / np.abs(d)).max() <= 1e-5
    with pytest.raises(ValueError):
        backward_derivative(wiggle(n=2), 0.5, 1e-3)


def test_svg_is_minimal():
    tr = trace(slit(0.5), [0.0, 0.25, 0.5])
    svg = render_svg(chords=tr.points, hull=np.array([0.5 + 0j]))
    assert svg.startswith("<svg") and svg.count("<path") == 2 and "<circle" in svg
    assert render_svg(chords=tr.points) == render_svg(chords=tr.points)
