import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from krflow.errors import DomainError, InputError
from krflow.grid import (
    PeriodicGrid,
    complex_hessian,
    field_from_spec,
    integrate,
    metric_from_potential,
    read_field,
    scalar_curvature,
    trace_ratio,
    write_field,
)

fields16 = arrays(np.float64, (16, 16), elements=st.floats(-1, 1, allow_nan=False))


def hessian_error(n, fn, exact):
    grid = PeriodicGrid(n)
    x, y = grid.coords()
    return np.abs(complex_hessian(grid, fn(x, y)) - exact(x, y)).max()


def test_grid_minimum_resolution():
    with pytest.raises(InputError):
        PeriodicGrid(4)
    assert PeriodicGrid(8).h == 0.125


def test_hessian_of_zero():
    grid = PeriodicGrid(16)
    assert np.all(complex_hessian(grid, np.zeros(grid.shape)) == 0)


def test_hessian_of_constant_is_exactly_zero():
    grid = PeriodicGrid(32)
    assert np.all(complex_hessian(grid, np.full(grid.shape, 0.37)) == 0)


@pytest.mark.parametrize("fn,exact", [
    (lambda x, y: np.cos(2 * np.pi * x), lambda x, y: -np.pi ** 2 * np.cos(2 * np.pi * x)),
    (lambda x, y: np.sin(2 * np.pi * y), lambda x, y: -np.pi ** 2 * np.sin(2 * np.pi * y)),
    (lambda x, y: np.cos(2 * np.pi * (x + 2 * y)), lambda x, y: -5 * np.pi ** 2 * np.cos(2 * np.pi * (x + 2 * y))),
])
def test_hessian_second_order(fn, exact):
    errors = [hessian_error(n, fn, exact) for n in (16, 32, 64, 128)]
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert errors[-1] < 1e-3 * np.abs(exact(*PeriodicGrid(128).coords())).max()
    for r in ratios:
        assert 3.2 <= r <= 4.8


def test_metric_from_potential_flags():
    grid = PeriodicGrid(32)
    x, _ = grid.coords()
    bg = np.ones(grid.shape)
    density, ok = metric_from_potential(bg, np.zeros(grid.shape))
    assert ok and np.array_equal(density, bg)

    # ¼Δ(a cos 2πx) = -a π² cos 2πx, so a = 2/π² drives the minimum to about -1
    density, ok = metric_from_potential(bg, 2 / np.pi ** 2 * np.cos(2 * np.pi * x))
    assert not ok and density.min() < 0

    density, ok = metric_from_potential(bg, 0.01 * np.cos(2 * np.pi * x))
    assert ok
    assert density.min() >= 1 - 0.01 * np.pi ** 2 - 1e-12
    assert density.max() <= 1 + 0.01 * np.pi ** 2 + 1e-12


def test_scalar_curvature_flat():
    grid = PeriodicGrid(16)
    assert np.all(scalar_curvature(grid, np.full(grid.shape, 2.5)) == 0)


def test_scalar_curvature_analytic():
    eps = 0.1
    errors = []
    for n in (32, 64, 128):
        grid = PeriodicGrid(n)
        x, _ = grid.coords()
        u = eps * np.cos(2 * np.pi * x)
        exact = -np.exp(-u) * (-eps * np.pi ** 2 * np.cos(2 * np.pi * x))
        errors.append(np.abs(scalar_curvature(grid, np.exp(u)) - exact).max())
    assert errors[-1] < 1e-3
    assert 3.2 <= errors[0] / errors[1] <= 4.8
    assert 3.2 <= errors[1] / errors[2] <= 4.8


def test_scalar_curvature_needs_positive_density():
    grid = PeriodicGrid(8)
    g = np.ones(grid.shape)
    g[3, 4] = 0.0
    with pytest.raises(DomainError, match=r"\(3, 4\)"):
        scalar_curvature(grid, g)


def test_scalar_curvature_scale():
    grid = PeriodicGrid(32)
    x, y = grid.coords()
    g = np.exp(0.2 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
    assert np.array_equal(scalar_curvature(grid, 2 * g), scalar_curvature(grid, g) / 2)


def test_trace_ratio_examples():
    a, b = np.full((8, 8), 2.0), np.full((8, 8), 3.0)
    assert np.all(trace_ratio(a, a) == 1)
    assert np.all(trace_ratio(a, b) == 1.5)
    assert np.allclose(trace_ratio(a, b) * trace_ratio(b, a), 1, rtol=1e-15)
    assert np.all(trace_ratio((a, a), (b, a)) == 2.5)
    with pytest.raises(DomainError):
        trace_ratio(np.zeros((8, 8)), b)


def test_integrate_examples():
    grid = PeriodicGrid(16)
    x, _ = grid.coords()
    assert integrate(grid, np.ones(grid.shape)) == 1
    assert abs(integrate(grid, np.cos(2 * np.pi * x))) < 1e-15
    assert abs(integrate(grid, 1 + 0.5 * np.cos(2 * np.pi * x)) - 1) < 1e-15


@given(fields16)
@settings(max_examples=50, deadline=None)
def test_discrete_divergence_theorem(phi):
    grid = PeriodicGrid(16)
    assert abs(integrate(grid, complex_hessian(grid, phi))) < 1e-11


@given(fields16)
@settings(max_examples=50, deadline=None)
def test_gauss_bonnet(u):
    grid = PeriodicGrid(16)
    g = np.exp(u)
    assert abs(integrate(grid, scalar_curvature(grid, g) * g)) < 1e-11


@given(fields16, st.floats(0.1, 10))
@settings(max_examples=30, deadline=None)
def test_curvature_scaling_property(u, lam):
    grid = PeriodicGrid(16)
    g = np.exp(u)
    assert np.allclose(scalar_curvature(grid, lam * g), scalar_curvature(grid, g) / lam,
                       rtol=1e-12, atol=1e-9)


def test_field_spec_modes():
    grid = PeriodicGrid(16)
    x, y = grid.coords()
    f = field_from_spec(grid, {"const": 1, "modes": [{"amp": 0.3, "fn": "cos", "kx": 1, "ky": 0}]})
    assert np.allclose(f, 1 + 0.3 * np.cos(2 * np.pi * x))
    f = field_from_spec(grid, {"modes": [{"amp": 1, "fn": "sin", "kx": 1}], "transform": "square"})
    assert np.allclose(f, np.sin(2 * np.pi * x) ** 2)
    assert np.all(field_from_spec(grid, 2) == 2)
    with pytest.raises(InputError):
        field_from_spec(grid, {"modes": [], "colour": 1})
    with pytest.raises(InputError):
        field_from_spec(grid, {"modes": [{"amp": 1, "fn": "tan"}]})


def test_snapshot_round_trip(tmp_path):
    grid = PeriodicGrid(8)
    x, y = grid.coords()
    values = np.sin(2 * np.pi * x) / 3 + y
    path = tmp_path / "phi.csv"
    write_field(path, values, "phi")
    back, header = read_field(path)
    assert header == {"N": 8, "kind": "phi"}
    assert np.array_equal(back, values)
    assert np.array_equal(field_from_spec(grid, {"file": str(path)}), values)


def test_snapshot_shape_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text('{"N": 8, "kind": "phi"}\n1,2\n')
    with pytest.raises(InputError):
        read_field(path)
