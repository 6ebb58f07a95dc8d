import math

import pytest
from scipy.integrate import quad

from robustphase.model import PhysicalParams

ACCEPTANCE_LINES = []


@pytest.fixture
def beam():
    return PhysicalParams()


def are_root(lam, kappa, c):
    """Positive root of 2(-lam)P + kappa - c^2 P^2 = 0 by the quadratic formula."""
    return (-lam + math.sqrt(lam * lam + kappa * c * c)) / (c * c)


def spectral_smoother_mse(coeffs, ksq=0.0):
    """Steady-state MSE of the non-causal smoother designed at nominal coefficients
    (with penalty ksq) when the data come from the true coefficients.

    Frequency-domain route: the interior smoother is the LTI filter
    H(w) = c kappa / (w^2 + a^2 + kappa (c^2 - ksq)), so the error spectrum is
    |1 - H c_true|^2 S_phi_true + |H|^2 with S_phi_true = kappa / (w^2 + a_true^2).
    """
    kappa, a, c = coeffs.kappa, coeffs.a_nom, coeffs.c_nom
    scale = math.sqrt(a * a + kappa * c * c)

    def integrand(x):
        w = x * scale
        H = c * kappa / (w * w + a * a + kappa * (c * c - ksq))
        s_phi = kappa / (w * w + coeffs.a_true ** 2)
        return scale * ((1.0 - H * coeffs.c_true) ** 2 * s_phi + H * H) / math.pi

    return quad(integrand, 0, 1, limit=500)[0] + quad(integrand, 1, math.inf, limit=500)[0]


def report(criterion, passed, detail):
    line = f"[acceptance {criterion:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
