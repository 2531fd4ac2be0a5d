import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aclab.grid import (GridError, ScalarField, ball_sum, field_from_bytes, field_to_bytes,
                        from_function, grad_product, grad_sq, integrate, laplacian, make_grid)


def test_make_grid_spacing():
    g = make_grid(1, [10.0], [100], "periodic")
    assert g.spacing == pytest.approx((0.1,))
    g2 = make_grid(2, [2 * math.pi] * 2, [256, 256], "periodic")
    assert g2.spacing[0] == pytest.approx(0.02454369, rel=1e-6)
    assert g2.size == 256 * 256


def test_make_grid_rejects_few_cells():
    with pytest.raises(GridError):
        make_grid(2, [4.0, 4.0], [7, 64], "periodic")


@pytest.mark.parametrize("bad", [dict(extents=[-1.0]), dict(topology="klein"), dict(cells=[8, 8])])
def test_make_grid_validation(bad):
    kw = dict(dim=1, extents=[1.0], cells=[8], topology="neumann") | bad
    with pytest.raises(GridError):
        make_grid(**kw)


def test_cell_centers():
    g = make_grid(1, [1.0], [10], "neumann")
    assert g.axis_centers(0)[0] == pytest.approx(0.05)
    assert g.axis_centers(0)[-1] == pytest.approx(0.95)


def test_field_rejects_nonfinite():
    g = make_grid(1, [1.0], [8], "neumann")
    with pytest.raises(GridError):
        ScalarField(g, [0.0] * 7 + [np.nan])
    with pytest.raises(GridError):
        ScalarField(g, np.zeros(9))


@pytest.mark.parametrize("topo", ["periodic", "neumann"])
def test_constant_field_has_zero_derivatives(topo):
    g = make_grid(2, [1.0, 2.0], [16, 24], topo)
    u = ScalarField(g, np.full(g.shape, 3.5))
    assert np.all(laplacian(u).values == 0)
    assert np.all(grad_sq(u).values == 0)


def test_laplacian_fourier_eigenvalue():
    N, L, k = 64, 2 * math.pi, 3
    g = make_grid(1, [L], [N], "periodic")
    h = g.spacing[0]
    u = from_function(g, lambda x: np.sin(k * x))
    lam = -(2 / h**2) * (1 - math.cos(k * h))
    np.testing.assert_allclose(laplacian(u).values, lam * u.values, atol=1e-10)


def test_laplacian_quadratic_interior():
    g = make_grid(1, [1.0], [64], "neumann")
    lap = laplacian(from_function(g, lambda x: x**2)).values
    np.testing.assert_allclose(lap[1:-1], 2.0, rtol=1e-9)
    # x^2 has zero slope at x=0 but not at x=1, so only the right wall row deviates.
    assert abs(lap[-1] - 2.0) > 0.1


def test_grad_sq_linear_interior():
    g = make_grid(1, [1.0], [32], "neumann")
    gs = grad_sq(from_function(g, lambda x: x)).values
    np.testing.assert_allclose(gs[1:-1], 1.0, rtol=1e-12)


def _sup_errors(op, exact, ns):
    errs = []
    for n in ns:
        g = make_grid(1, [2 * math.pi], [n], "periodic")
        x = g.axis_centers(0)
        errs.append(np.max(np.abs(op(from_function(g, np.sin)).values - exact(x))))
    return np.array(errs)


@pytest.mark.parametrize("op,exact", [
    (laplacian, lambda x: -np.sin(x)),
    (grad_sq, lambda x: np.cos(x) ** 2),
    (grad_product, lambda x: np.cos(x) ** 2),
])
def test_stencil_order(op, exact):
    ns = [32, 64, 128, 256]
    errs = _sup_errors(op, exact, ns)
    orders = np.log(errs[:-1] / errs[1:]) / math.log(2)
    assert orders.min() >= 1.9


def test_integrate_examples():
    g = make_grid(1, [3.0], [30], "neumann")
    assert integrate(ScalarField(g, np.ones(30))) == pytest.approx(3.0, rel=1e-14)
    gp = make_grid(1, [2 * math.pi], [1000], "periodic")
    assert abs(integrate(from_function(gp, np.sin))) < 1e-12 * 1000
    ge = make_grid(1, [16.0], [4096], "neumann")
    val = integrate(from_function(ge, lambda x: np.exp(-(x - 8.0) ** 2)))
    assert abs(val - math.sqrt(math.pi)) < 1e-8


def _edge_sum(u, v, g):
    # sum over cell faces of (D+ u)(D+ v), Neumann walls contribute nothing.
    total = 0.0
    for a, h in enumerate(g.spacing):
        du = np.roll(u, -1, axis=a) - u
        dv = np.roll(v, -1, axis=a) - v
        if not g.periodic[a]:
            idx = [slice(None)] * g.dim
            idx[a] = slice(0, -1)
            du, dv = du[tuple(idx)], dv[tuple(idx)]
        total += np.sum(du * dv) / h**2
    return total * g.cell_volume


_fields = arrays(np.float64, (12, 10), elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(u=_fields, v=_fields, topo=st.sampled_from(["neumann", "periodic"]))
def test_summation_by_parts(u, v, topo):
    g = make_grid(2, [1.2, 1.0], [12, 10], topo)
    U, V = ScalarField(g, u), ScalarField(g, v)
    lhs = integrate(ScalarField(g, u * laplacian(V).values))
    rhs = integrate(ScalarField(g, v * laplacian(U).values))
    scale = 1 + np.sum(np.abs(u)) * np.sum(np.abs(v))
    assert abs(lhs - rhs) <= 1e-9 * scale
    assert abs(lhs + _edge_sum(u, v, g)) <= 1e-9 * scale


@settings(max_examples=30, deadline=None)
@given(u=_fields, v=_fields, a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_laplacian_linearity(u, v, a, b):
    g = make_grid(2, [1.0, 1.0], [12, 10], "neumann")
    lhs = laplacian(ScalarField(g, a * u + b * v)).values
    rhs = a * laplacian(ScalarField(g, u)).values + b * laplacian(ScalarField(g, v)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-6 * (1 + np.abs(rhs).max()))


def test_ball_sum_disk_area():
    L = 4.0
    g = make_grid(2, [L, L], [256, 256], "periodic")
    one = ScalarField(g, np.ones(g.shape))
    R = L / 4
    val = ball_sum(one, (0.3, 0.1), R)  # wraps around the corner
    h = g.spacing[0]
    assert abs(val - math.pi * R**2) <= 4 * h * R


def test_ball_sum_edge_cases():
    g = make_grid(2, [1.0, 1.0], [10, 10], "neumann")
    vals = np.arange(100, dtype=float).reshape(10, 10)
    w = ScalarField(g, vals)
    c = (g.axis_centers(0)[3], g.axis_centers(1)[7])
    assert ball_sum(w, c, 0.04) == pytest.approx(vals[3, 7] * g.cell_volume)
    assert ball_sum(w, c, 10.0) == pytest.approx(integrate(w))
    with pytest.raises(GridError):
        ball_sum(w, c, 0.0)


def test_serialization_roundtrip():
    g = make_grid(2, [1.0, 2.5], [8, 12], ["neumann", "periodic"])
    u = ScalarField(g, np.random.default_rng(0).normal(size=g.shape))
    back = field_from_bytes(field_to_bytes(u))
    assert back.grid == g
    assert np.array_equal(back.values, u.values)
    with pytest.raises(GridError):
        field_from_bytes(field_to_bytes(u)[:-8])
