import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aclab.grid import make_grid
from aclab.kernel import KernelPoint, axis_heat, gaussian_integral, kernel_mass, rho, rho_field

from conftest import CIRCLE_ENTROPY, circle_measure, line_measure, zero_measure


def test_kernel_point_requires_future_scale():
    with pytest.raises(ValueError):
        KernelPoint((0.0, 0.0), 0.1, t=0.1)
    assert KernelPoint((0.0,), 0.5, 0.2).tau == pytest.approx(0.3)


def test_rho_at_center():
    g = make_grid(2, [4.0, 4.0], [16, 16], "neumann")
    s = 0.3
    val = rho(KernelPoint((1.0, 2.0), s), np.array([1.0, 2.0]), g)
    assert val == pytest.approx((4 * math.pi * s) ** -0.5, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(tau=st.floats(0.005, 0.5), y0=st.floats(0, 2), y1=st.floats(0, 2))
def test_normalization_on_torus(tau, y0, y1):
    g = make_grid(2, [2.0, 2.0], [128, 128], "periodic")
    kp = KernelPoint((y0, y1), tau)
    assert kernel_mass(kp, g) == pytest.approx(math.sqrt(4 * math.pi * tau), rel=1e-8)


def test_wrapped_matches_free_kernel():
    L = 2.0
    d = np.linspace(-L / 16, L / 16, 41)
    # At tau = (L/12)^2 and |d| <= L/16 the nearest images weigh below e^-31.
    tau = (L / 12) ** 2
    np.testing.assert_allclose(axis_heat(d, tau, L), axis_heat(d, tau), rtol=1e-12)
    # At tau = (L/8)^2 they are about 2 e^-16 at d = 0.
    tau = (L / 8) ** 2
    rel = axis_heat(0.0, tau, L) / axis_heat(0.0, tau) - 1
    assert rel == pytest.approx(2 * math.exp(-16), rel=1e-6)


def test_rho_field_matches_pointwise():
    g = make_grid(2, [1.0, 1.5], [12, 18], ["neumann", "periodic"])
    kp = KernelPoint((0.3, 1.4), 0.07, 0.01)
    pts = np.stack(g.mesh(), axis=-1)
    np.testing.assert_allclose(rho_field(kp, g), rho(kp, pts, g), rtol=1e-13)


def test_gaussian_integral_zero(line_grid):
    assert gaussian_integral(zero_measure(line_grid), KernelPoint((1.0, 1.0), 0.2)) == 0.0


@pytest.mark.parametrize("s", [0.05, 0.1, 0.5])
def test_line_has_unit_density(line_grid, s):
    # Scales well above eps^2; at sqrt(s) ~ eps the diffuse profile lowers the value.
    mu = line_measure(line_grid, 0.04)
    assert gaussian_integral(mu, KernelPoint((2.0, 0.7), s)) == pytest.approx(1.0, rel=0.01)


def test_circle_closed_form(circle_grid):
    mu = circle_measure(circle_grid, 1.0, 0.02)
    val = gaussian_integral(mu, KernelPoint(tuple(circle_grid.center()), 0.5))
    assert val == pytest.approx(CIRCLE_ENTROPY, rel=0.02)
