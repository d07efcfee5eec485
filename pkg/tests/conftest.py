import math

import numpy as np
import pytest


def brute_phi(theta, a=4.0):
    """Double-loop reference for the cotangent drift."""
    n = len(theta)
    out = []
    for j in range(n):
        s = 0.0
        for k in range(n):
            if k != j:
                s += 1.0 / math.tan(0.5 * (theta[j] - theta[k]))
        out.append(0.25 * a * s)
    return np.array(out)


def brute_psi(theta):
    n = len(theta)
    return np.array([sum(1.0 / math.sin(0.5 * (theta[j] - theta[k])) ** 2 for k in range(n) if k != j) for j in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_config(rng, n):
    return np.sort(rng.uniform(0, 2 * math.pi, n))


# criterion number -> bool, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ACCEPTANCE[k] else 'FAIL'}")
