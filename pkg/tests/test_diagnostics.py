import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krflow.diagnostics import (
    CSV_COLUMNS,
    EstimateSuite,
    Recorder,
    decay_fit,
    dissipation,
    estimate_suite,
    mabuchi_energy,
    ricci_density,
    ricci_potential,
    solve_periodic_poisson,
    third_order,
    write_csv,
)
from krflow.errors import ClassError, DomainError, FitError
from krflow.flow import BackgroundFamily, FlowProblem, FlowState, initial_state, run
from krflow.grid import PeriodicGrid, complex_hessian, integrate


def bumpy(n, eps=0.1):
    x, y = PeriodicGrid(n).coords()
    return np.exp(eps * np.cos(2 * np.pi * x))


def test_ricci_potential_flat():
    grid = PeriodicGrid(16)
    assert np.abs(ricci_potential(grid, np.full(grid.shape, 2.0))).max() < 1e-14


def test_ricci_potential_residual_and_normalization():
    grid = PeriodicGrid(32)
    w = bumpy(32)
    h0 = ricci_potential(grid, w)
    assert np.abs(complex_hessian(grid, h0) - ricci_density(grid, w)).max() < 1e-9
    assert abs(integrate(grid, np.exp(h0) * w) - integrate(grid, w)) < 1e-10


def test_ricci_potential_closed_form():
    # Ric(e^u) = -∂∂̄u, so h0 = -u up to the normalizing constant
    grid = PeriodicGrid(32)
    x, y = grid.coords()
    u = 0.1 * np.cos(2 * np.pi * x) + 0.05 * np.sin(2 * np.pi * (x + y))
    h0 = ricci_potential(grid, np.exp(u))
    diff = h0 + u
    assert np.ptp(diff) < 1e-9


def test_ricci_potential_ignores_constant_log_shift():
    grid = PeriodicGrid(32)
    w = bumpy(32)
    a = ricci_potential(grid, w)
    b = ricci_potential(grid, math.e * w)
    assert np.ptp(a - b) < 1e-10


def test_poisson_rejects_nonzero_mean():
    grid = PeriodicGrid(16)
    with pytest.raises(ClassError):
        solve_periodic_poisson(grid, np.ones(grid.shape))


def test_mabuchi_examples():
    grid = PeriodicGrid(32)
    w = bumpy(32)
    h0 = ricci_potential(grid, w)
    assert mabuchi_energy(grid, w, np.zeros(grid.shape), h0) == 0
    assert mabuchi_energy(grid, w, np.full(grid.shape, 3.0), h0) == 0


def test_mabuchi_needs_positive_metric():
    grid = PeriodicGrid(16)
    x, _ = grid.coords()
    one = np.ones(grid.shape)
    with pytest.raises(DomainError):
        mabuchi_energy(grid, one, np.cos(2 * np.pi * x), np.zeros(grid.shape))


@given(st.floats(-50, 50))
@settings(max_examples=25, deadline=None)
def test_mabuchi_constant_invariance(c):
    grid = PeriodicGrid(16)
    x, y = grid.coords()
    w = bumpy(16)
    phi = 0.01 * np.sin(2 * np.pi * y)
    h0 = ricci_potential(grid, w)
    assert mabuchi_energy(grid, w, phi + c, h0) == pytest.approx(mabuchi_energy(grid, w, phi, h0), abs=1e-13)


def test_dissipation_is_the_discrete_mabuchi_slope():
    # the derivative of Mab along the flow velocity is minus the dissipation
    grid = PeriodicGrid(16)
    x, y = grid.coords()
    one = np.ones(grid.shape)
    h0 = np.zeros(grid.shape)
    phi = 0.02 * np.cos(2 * np.pi * x) + 0.01 * np.sin(2 * np.pi * (x - y))
    g = one + complex_hessian(grid, phi)
    v = np.log(g)   # the flow velocity for flat data with ν=0
    d = 1e-6
    slope = (mabuchi_energy(grid, one, phi + d * v, h0) - mabuchi_energy(grid, one, phi - d * v, h0)) / (2 * d)
    assert slope == pytest.approx(-dissipation(grid, v), rel=1e-6)


def test_third_order_examples():
    grid = PeriodicGrid(32)
    bg = bumpy(32, 0.3)
    assert np.all(third_order(grid, bg, bg) == 0)
    assert np.abs(third_order(grid, 2.5 * bg, bg)).max() < 1e-25


def test_third_order_analytic():
    errors = []
    for n in (32, 64, 128):
        grid = PeriodicGrid(n)
        x, y = grid.coords()
        bg = 1 + 0.2 * np.sin(2 * np.pi * y)
        g = np.exp(0.1 * np.cos(2 * np.pi * x)) * bg
        exact = 0.25 * (0.2 * np.pi * np.sin(2 * np.pi * x)) ** 2 / g
        errors.append(np.abs(third_order(grid, g, bg) - exact).max())
    assert errors[-1] < 1e-4
    assert 3.2 <= errors[0] / errors[1] <= 4.8


def test_third_order_needs_positive_metrics():
    grid = PeriodicGrid(8)
    with pytest.raises(DomainError):
        third_order(grid, np.zeros(grid.shape), np.ones(grid.shape))


def test_decay_fit_examples():
    t = np.linspace(0, 10, 21)
    assert decay_fit(zip(t, np.exp(-t))) == pytest.approx(-1.0, abs=1e-9)
    assert decay_fit(zip(t, np.full_like(t, 3.0))) == pytest.approx(0.0, abs=1e-9)
    # the log-slope of 5t e^{-t} is 1/t - 1, which lies in [-0.95, -14/15] on the trailing half
    t = np.linspace(10, 20, 41)
    assert -0.95 <= decay_fit(zip(t, 5 * t * np.exp(-t))) <= 1 / 15 - 1


def test_decay_fit_errors():
    t = np.linspace(0, 1, 10)
    with pytest.raises(FitError):
        decay_fit(zip(t[:5], np.ones(5)))
    vals = np.ones(10)
    vals[7] = 0.0
    with pytest.raises(FitError):
        decay_fit(zip(t, vals))


def exponential_problem(n=16):
    grid = PeriodicGrid(n)
    x, _ = grid.coords()
    one = np.ones(grid.shape)
    s = np.sin(np.pi * x) ** 2
    fam = BackgroundFamily.exponential(one, s)
    return FlowProblem(grid, fam, one, 1, np.zeros(grid.shape), degeneracy_profile=s, dt_cap_c=1.0)


def test_tsuji_check_holds_then_flags_corruption():
    p = exponential_problem()
    res = run(p, 0.5, 0.1, record=False, keep_states=True)
    suite = EstimateSuite(p, res.states[0])
    for s in res.states:
        assert suite(s)["tsuji"].holds
    last = res.states[-1]
    bad = FlowState(last.t, last.phi, np.full_like(last.phi, 10.0))
    check = estimate_suite(p, bad, res.states)["tsuji"]
    assert not check.holds
    assert check.worst_margin < 0
    assert check.location[0] == last.t


def test_degenerate_bound_reports_constant():
    p = exponential_problem()
    res = run(p, 0.5, 0.1, record=False, keep_states=True)
    report = estimate_suite(p, res.final, res.states)
    c = report["degenerate_lower"]
    assert c.holds
    assert math.isfinite(c.detail["C_eps"])
    capped = EstimateSuite(p, res.states[0], c_eps_cap=c.detail["C_eps"] - 1.0)
    assert not capped(res.final)["degenerate_lower"].holds


def test_flat_run_checks_and_record():
    grid = PeriodicGrid(16)
    one = np.ones(grid.shape)
    p = FlowProblem(grid, BackgroundFamily.static(one), one, 0, one)
    rec = Recorder(p)(initial_state(p))
    names = rec.estimates.names
    assert names == ["scalar_lower", "volume_upper", "trace_log"]
    assert rec.estimates.all_hold()
    assert rec.R_min == rec.R_max == 0
    assert rec.volume == 1
    assert rec.mabuchi == 0


def test_curvature_checks_need_unforced_data():
    # a static background with nu=1 is not a normalized Kähler-Ricci flow
    grid = PeriodicGrid(16)
    one = np.ones(grid.shape)
    p = FlowProblem(grid, BackgroundFamily.static(one), one, 1, one)
    rec = Recorder(p)(initial_state(p))
    assert rec.estimates.names == ["trace_log"]
    assert rec.estimates.all_hold()


def test_q_monotone_applies_to_linear_family():
    grid = PeriodicGrid(16)
    x, _ = grid.coords()
    one = np.ones(grid.shape)
    p = FlowProblem(grid, BackgroundFamily.linear(one, 0.5 * one, 2.0), one, 0,
                    0.01 * np.cos(2 * np.pi * x), dt_cap_c=1.0)
    res = run(p, 0.5, 0.1)
    for r in res.records:
        assert r.estimates["q_monotone"].worst_margin >= 0


def test_csv_layout():
    grid = PeriodicGrid(8)
    one = np.ones(grid.shape)
    p = FlowProblem(grid, BackgroundFamily.static(one), one, 1, one, dt_cap_c=3.2)
    res = run(p, 0.2, 0.1)
    rows = list(csv.reader(io.StringIO(write_csv(res.records))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 4
    for row in rows[1:]:
        for value in row[:-1]:
            assert math.isfinite(float(value))
        for flag in row[-1].split(";"):
            name, rest = flag.split("=")
            bit, margin = rest.split(":")
            assert bit in ("0", "1")
            float(margin)
