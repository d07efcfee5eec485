import io
import math

import numpy as np
import pytest

from multiradial.circle_core import OrderingError
from multiradial.energy import dirichlet_energy
from multiradial.path_model import (
    DrivingPath,
    PathError,
    TimeChange,
    apply_time_change,
    dirichlet_bounds_under_time_change,
    embed_circle,
    linear_grid,
    numeric_derivative,
    principal_angles,
    sup_distance,
)


def line(n=1, T=1.0, step=0.01, c=1.0):
    return DrivingPath.from_function(lambda t: c * t + np.arange(n) * 2 * math.pi / n, T, step)


def test_validation():
    with pytest.raises(PathError):
        DrivingPath([0.0, 0.5, 0.5], [[0.0], [1.0], [2.0]])
    with pytest.raises(PathError):
        DrivingPath([0.1, 0.5], [[0.0], [1.0]])
    with pytest.raises(PathError):
        DrivingPath([0.0, 0.5], [[0.0], [1.0], [2.0]])
    with pytest.raises(OrderingError):
        DrivingPath([0.0, 1.0], [[0.0, 1.0], [1.0, 0.5]])
    with pytest.raises(PathError):
        DrivingPath([0.0, 1.0], [[0.0], [math.inf]])


def test_terminated_path_may_end_in_collision():
    p = DrivingPath([0.0, 1.0], [[0.0, 1.0], [0.5, 0.5]], terminated_at=1.0)
    assert p.terminated_at == 1.0
    with pytest.raises(OrderingError):
        DrivingPath([0.0, 1.0], [[0.0, 1.0], [0.6, 0.5]], terminated_at=1.0)
    with pytest.raises(PathError):
        DrivingPath([0.0, 1.0], [[0.0, 1.0], [0.1, 0.9]], terminated_at=0.5)


def test_sup_distance_examples():
    p = DrivingPath.from_function(lambda t: [np.sin(t), 2 + t], 1.0, 0.1)
    assert sup_distance(p, p) == 0.0
    assert sup_distance(p, p.shifted([0.3, 0.3])) == pytest.approx(0.3 * math.sqrt(2), rel=1e-14)
    s = p.states.copy()
    s[4, 1] += -0.25
    assert sup_distance(p, DrivingPath(p.times, s)) == pytest.approx(0.25, rel=1e-12)
    q = DrivingPath.from_function(lambda t: [np.sin(t), 2 + t], 1.0, 0.05)
    assert sup_distance(p, q) < 1e-12
    with pytest.raises(PathError):
        sup_distance(p, line())


def test_time_change_identity_and_doubling():
    p = line()
    tc = TimeChange(p.times, p.times)
    q = apply_time_change(p, tc)
    np.testing.assert_allclose(q.states, p.states)
    tc2 = TimeChange.from_function(lambda t: 2 * t, 0.5, 0.01)
    q = apply_time_change(p, tc2)
    assert q.T == pytest.approx(0.5)
    np.testing.assert_allclose(q.states[:, 0], 2 * q.times, atol=1e-14)
    assert dirichlet_energy(p) == pytest.approx(0.5, rel=1e-12)
    assert dirichlet_energy(q) == pytest.approx(1.0, rel=1e-12)


def test_time_change_energy_bounds():
    p = DrivingPath.from_function(lambda t: np.sin(3 * t), 1.0, 1e-3)
    tc = TimeChange.from_function(lambda t: t + 0.1 * t * t, 1 / 1.1 * 0.999, 1e-3)
    # sigma maps [0, S] into [0, 1]; energy of the changed path lies in the chain-rule window
    sigma_T = tc.values[-1]
    E_restricted = dirichlet_energy(p.truncate(sigma_T))
    lo, hi = dirichlet_bounds_under_time_change(E_restricted, tc)
    E_hat = dirichlet_energy(apply_time_change(p, tc))
    assert lo * (1 - 1e-3) <= E_hat <= hi * (1 + 1e-3)


def test_time_change_validation():
    with pytest.raises(PathError, match="invalid time change"):
        TimeChange([0.0, 1.0, 2.0], [0.0, 1.0, 0.5])
    with pytest.raises(PathError):
        TimeChange([0.0, 1.0], [0.1, 1.0])
    with pytest.raises(PathError):
        apply_time_change(line(), TimeChange([0.0, 1.0], [0.0, 2.0]))
    tc = TimeChange([0.0, 1.0, 2.0], [0.0, 2.0, 2.5])
    assert tc.sup_rate == 2.0 and tc.sup_inv_rate == 2.0
    np.testing.assert_allclose(tc.inverse()(tc(np.array([0.3, 1.7]))), [0.3, 1.7])


def test_embed_circle():
    z = embed_circle(np.array([0.0, math.pi, math.pi / 2]))
    np.testing.assert_allclose(z, [1, -1, 1j], atol=1e-15)
    np.testing.assert_allclose(principal_angles(embed_circle(np.array([7.0]))), [7.0 - 2 * math.pi])


def test_numeric_derivative():
    p = DrivingPath.constant([0.0, 2.0], 1.0, 0.1)
    _, v = numeric_derivative(p)
    assert np.all(v == 0)
    _, v = numeric_derivative(line(c=0.7))
    np.testing.assert_allclose(v, 0.7, rtol=1e-12)
    p = DrivingPath.from_function(lambda t: t * t, 1.0, 0.01)
    m, v = numeric_derivative(p)
    np.testing.assert_allclose(v[:, 0], 2 * m, rtol=1e-10)


def test_csv_round_trip(tmp_path):
    p = DrivingPath.from_function(lambda t: [np.cos(t) / 3, 2 + t * t], 0.7, 0.013)
    f = tmp_path / "p.csv"
    text = p.to_csv(f)
    assert text.splitlines()[0] == "t,theta1,theta2"
    q = DrivingPath.from_csv(f)
    assert np.array_equal(q.times, p.times) and np.array_equal(q.states, p.states)
    assert f.read_bytes() == p.to_csv().encode()


def test_csv_errors(tmp_path):
    with pytest.raises(PathError, match="line 1"):
        DrivingPath.from_csv(io.StringIO("time,x\n0,1\n"))
    with pytest.raises(PathError, match="line 3"):
        DrivingPath.from_csv(io.StringIO("t,theta1\n0,1\n0.1,abc\n"))
    with pytest.raises(PathError, match="line 2"):
        DrivingPath.from_csv(io.StringIO("t,theta1\n0,1,2\n"))


def test_grid_and_truncate():
    g = linear_grid(1.0, 0.3)
    assert g[-1] == 1.0 and np.all(np.diff(g) <= 0.3 + 1e-15)
    p = line(T=1.0, step=0.1).truncate(0.55)
    assert p.T == 0.55 and p.states[-1, 0] == pytest.approx(0.55)
    with pytest.raises(PathError):
        line().at(1.5)
