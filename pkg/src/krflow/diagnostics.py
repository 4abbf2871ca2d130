"""Monitored functionals and maximum-principle checks along a flow."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ClassError, DomainError, FitError
from .flow import FlowProblem, FlowState, background_at
from .grid import (
    PeriodicGrid,
    complex_hessian,
    forward_gradient_sq,
    gradient_sq,
    integrate,
    metric_from_potential,
    scalar_curvature,
    trace_ratio,
)

TOLERANCE = 1e-6
POISSON_RESIDUAL = 1e-10

CSV_COLUMNS = (
    "t", "dt", "phi_min", "phi_max", "phidot_min", "phidot_max", "R_min", "R_max",
    "volume", "mabuchi", "tr_bg_omega_max", "tr_omega_bg_max", "third_order_max", "flags",
)


# Poisson problem -----------------------------------------------------------

def solve_periodic_poisson(grid: PeriodicGrid, source) -> np.ndarray:
    """Mean-zero u with complex_hessian(u) = source, by conjugate gradients."""
    source = grid.check(source, "source")
    scale = max(1.0, float(np.abs(source).max()))
    mean = float(source.mean())
    if abs(mean) > 1e-12 * scale:
        raise ClassError(f"source has mean {mean:.3e}; only mean-zero sources are solvable on the torus")
    n = grid.N

    def apply(v):
        u = v.reshape(grid.shape)
        out = -complex_hessian(grid, u)
        # the constant mode is the kernel; pin it so the operator is definite
        return (out + u.mean()).ravel()

    op = LinearOperator((n * n, n * n), matvec=apply, dtype=float)
    b = -(source - mean).ravel()
    u, info = cg(op, b, rtol=0.0, atol=0.1 * POISSON_RESIDUAL, maxiter=20 * n * n)
    u = u.reshape(grid.shape)
    u -= u.mean()
    residual = float(np.abs(complex_hessian(grid, u) - (source - mean)).max())
    if residual >= POISSON_RESIDUAL * scale:
        raise ClassError(f"Poisson solve stalled at residual {residual:.3e}")
    return u


def ricci_density(grid: PeriodicGrid, omega0) -> np.ndarray:
    """Ricci form of a metric as a density, -∂∂̄ log ω₀."""
    omega0 = grid.check(omega0, "omega0")
    if not np.all(omega0 > 0):
        raise DomainError("metric is not positive")
    return -complex_hessian(grid, np.log(omega0))


def ricci_potential(grid: PeriodicGrid, omega0) -> np.ndarray:
    """h₀ with ∂∂̄h₀ = Ric(ω₀) and ∫e^{h₀}ω₀ = ∫ω₀."""
    omega0 = grid.check(omega0, "omega0")
    h0 = solve_periodic_poisson(grid, ricci_density(grid, omega0))
    shift = math.log(integrate(grid, omega0) / integrate(grid, np.exp(h0) * omega0))
    return h0 + shift


def mabuchi_energy(grid: PeriodicGrid, omega0, phi, h0) -> float:
    """∫ log(ω_φ/ω₀) ω_φ - ∫ h₀ (ω_φ - ω₀) in one complex dimension."""
    omega0 = grid.check(omega0, "omega0")
    density, ok = metric_from_potential(omega0, phi, grid)
    if not ok:
        raise DomainError("ω_φ is not positive")
    return integrate(grid, np.log(density / omega0) * density) - integrate(grid, h0 * (density - omega0))


def dissipation(grid: PeriodicGrid, phidot) -> float:
    """∫|∂φ̇|² with forward differences, the exact discrete Mabuchi slope."""
    return integrate(grid, forward_gradient_sq(grid, phidot))


def third_order(grid: PeriodicGrid, g, bg) -> np.ndarray:
    """|∇̂g|²_g, which in one complex dimension is |∂ log(g/bg)|² / g."""
    g = grid.check(g, "metric")
    bg = grid.check(bg, "background")
    if not (np.all(g > 0) and np.all(bg > 0)):
        raise DomainError("third_order needs two positive metrics")
    return gradient_sq(grid, np.log(g / bg)) / g


def decay_fit(series) -> float:
    """Least-squares slope of log(value) against t over the trailing half."""
    data = np.asarray(list(series), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 8:
        raise FitError("decay_fit needs at least 8 (t, value) samples")
    if not np.all(data[:, 1] > 0):
        raise FitError("decay_fit needs strictly positive values")
    tail = data[len(data) // 2:]
    slope, _ = np.polyfit(tail[:, 0], np.log(tail[:, 1]), 1)
    return float(slope)


def forcing(problem: FlowProblem, t: float) -> np.ndarray:
    """χ_t + νω̂_t + Ric(Ω) as a density.

    This is the part of dω/dt not explained by -Ric(ω) - νω; it vanishes when
    the supplied data come from a genuine Kähler-Ricci flow.
    """
    bg, chi = background_at(problem.family, t)
    return chi + problem.nu * bg - complex_hessian(problem.grid, problem.log_omega)


def ricci_consistent(problem: FlowProblem, t: float = 0.0) -> bool:
    f = forcing(problem, t)
    bg, _ = background_at(problem.family, t)
    return bool(np.abs(f).max() <= 1e-12 * max(1.0, float(np.abs(bg).max())))


# Estimate suite ------------------------------------------------------------

@dataclass(frozen=True)
class EstimateCheck:
    name: str
    holds: bool
    worst_margin: float
    location: tuple
    detail: dict = field(default_factory=dict)


@dataclass
class EstimateReport:
    checks: list = field(default_factory=list)

    def __getitem__(self, name) -> EstimateCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name):
        return any(c.name == name for c in self.checks)

    @property
    def names(self):
        return [c.name for c in self.checks]

    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)

    def flags(self) -> str:
        return ";".join(f"{c.name}={int(c.holds)}:{c.worst_margin:.9e}" for c in self.checks)


class EstimateSuite:
    """Estimate checks with constants fixed from the initial data.

    ``epsilon`` and ``c_eps_cap`` configure the degenerate lower bound; the
    constant C_ε is measured, and only compared against a cap when one is
    given.
    """

    def __init__(self, problem: FlowProblem, initial: FlowState | None = None,
                 tolerance: float = TOLERANCE, epsilon: float = 0.1, s_floor: float = 1e-3,
                 c_eps_cap: float | None = None):
        from .flow import initial_state

        self.problem = problem
        self.tolerance = tolerance
        self.epsilon = epsilon
        self.s_floor = s_floor
        self.c_eps_cap = c_eps_cap
        init = initial if initial is not None else initial_state(problem)
        grid = problem.grid
        g0 = init.metric(problem)
        self.density0 = g0
        self.omega0 = problem.family.omega0
        self.c0 = -float(scalar_curvature(grid, g0).min()) - problem.nu
        self.genuine = ricci_consistent(problem, 0.0) and ricci_consistent(problem, 1.0)
        self.q0 = None
        if problem.family.kind == "linear":
            self.q0 = float(self._q(init).min())
        self.r_hat = scalar_curvature(grid, self.omega0)
        self.c_hat = float((-self.r_hat).max())
        self.c_eps_max = -math.inf

    def _q(self, state):
        tp = self.problem.family.t_prime
        return (tp - state.t) * state.phidot + state.phi + state.t

    def __call__(self, state: FlowState, g=None) -> EstimateReport:
        p = self.problem
        grid = p.grid
        tol = self.tolerance
        if g is None:
            g = state.metric(p)
        t = state.t
        checks = []

        def add(name, margin_field, detail=None):
            margin_field = np.asarray(margin_field, dtype=float)
            where = int(np.argmin(margin_field))
            worst = float(margin_field.flat[where]) + 0.0  # no negative zero in reports
            loc = (t,) + tuple(int(i) for i in np.unravel_index(where, margin_field.shape)) \
                if margin_field.ndim else (t,)
            checks.append(EstimateCheck(name, worst >= -tol, worst, loc, detail or {}))

        # the curvature bounds describe genuine Kähler-Ricci flows only
        if self.genuine:
            r = scalar_curvature(grid, g)
            bound = -p.nu - self.c0 * math.exp(-p.nu * t)
            add("scalar_lower", r - bound, {"C0": self.c0})
            if p.nu == 0:
                add("volume_upper", math.exp(self.c0 * t) * self.density0 - g, {"C0": self.c0})

        if p.family.kind == "linear":
            add("q_monotone", self._q(state) - self.q0, {"Q0": self.q0})

        if p.family.kind == "exponential" and p.volume_rescale == 0:
            add("tsuji", -((math.exp(t) - 1.0) * state.phidot - state.phi - t))

        # (∂_t - Δ_ω) log tr_{ω₀} ω against Ĉ tr_ω ω₀ - ν + F/ω
        _, chi = background_at(p.family, t)
        gdot = chi + complex_hessian(grid, state.phidot)
        lap_log = complex_hessian(grid, np.log(g / self.omega0)) / g
        lhs = gdot / g - lap_log
        rhs_ = self.c_hat * trace_ratio(g, self.omega0) - p.nu + forcing(p, t) / g
        scale = 1.0 + np.abs(gdot / g) + np.abs(lap_log)
        # rounding in log g is amplified by the stencil and by 1/g
        slack = 16 * np.finfo(float).eps * (1.0 + np.abs(np.log(g / self.omega0))) / (grid.h ** 2 * g)
        add("trace_log", (rhs_ - lhs + slack) / scale, {"C_hat": self.c_hat})

        if p.degeneracy_profile is not None:
            s = p.degeneracy_profile
            mask = s > self.s_floor
            c_eps = float(np.max(self.epsilon * np.log(s[mask]) - state.phi[mask]))
            self.c_eps_max = max(self.c_eps_max, c_eps)
            cap = self.c_eps_cap if self.c_eps_cap is not None else math.inf
            margin = cap - c_eps if math.isfinite(cap) else 0.0
            checks.append(EstimateCheck("degenerate_lower", margin >= -tol, margin, (t,),
                                        {"C_eps": c_eps, "epsilon": self.epsilon}))
        return EstimateReport(checks)


def estimate_suite(problem: FlowProblem, state: FlowState, history=None) -> EstimateReport:
    """Evaluate the estimate checks on ``state``.

    ``history`` is either an :class:`EstimateSuite` or a sequence of earlier
    states whose first entry is the initial state.
    """
    if isinstance(history, EstimateSuite):
        suite = history
    else:
        initial = history[0] if history else None
        suite = EstimateSuite(problem, initial)
    return suite(state)


# Records -------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    dt: float
    phi_min: float
    phi_max: float
    phidot_min: float
    phidot_max: float
    R_min: float
    R_max: float
    volume: float
    mabuchi: float
    tr_bg_omega_max: float
    tr_omega_bg_max: float
    third_order_max: float
    estimates: EstimateReport
    phidot_sup: float = 0.0
    dissipation: float = 0.0
    density_min: float = 0.0
    density_max: float = 0.0

    @property
    def flags(self) -> str:
        return self.estimates.flags()

    def row(self) -> list:
        values = [getattr(self, c) for c in CSV_COLUMNS[:-1]]
        return [repr(float(v)) for v in values] + [self.flags]


class Recorder:
    """Builds one :class:`DiagnosticsRecord` per sampled state."""

    def __init__(self, problem: FlowProblem, suite: EstimateSuite | None = None, **suite_kw):
        self.problem = problem
        self.suite = suite
        self.suite_kw = suite_kw
        self._h0_cache = None

    def _h0(self, bg):
        if self.problem.family.kind == "static":
            if self._h0_cache is None:
                self._h0_cache = ricci_potential(self.problem.grid, bg)
            return self._h0_cache
        return ricci_potential(self.problem.grid, bg)

    def __call__(self, state: FlowState) -> DiagnosticsRecord:
        p = self.problem
        grid = p.grid
        if self.suite is None:
            self.suite = EstimateSuite(p, state, **self.suite_kw)
        bg, _ = background_at(p.family, state.t)
        g, _ = metric_from_potential(bg, state.phi, grid)
        r = scalar_curvature(grid, g)
        report = self.suite(state, g)
        return DiagnosticsRecord(
            t=state.t,
            dt=state.dt_last,
            phi_min=float(state.phi.min()),
            phi_max=float(state.phi.max()),
            phidot_min=float(state.phidot.min()),
            phidot_max=float(state.phidot.max()),
            R_min=float(r.min()),
            R_max=float(r.max()),
            volume=integrate(grid, g),
            mabuchi=mabuchi_energy(grid, bg, state.phi, self._h0(bg)),
            tr_bg_omega_max=float(trace_ratio(bg, g).max()),
            tr_omega_bg_max=float(trace_ratio(g, p.family.omega0).max()),
            third_order_max=float(third_order(grid, g, bg).max()),
            estimates=report,
            phidot_sup=float(np.abs(state.phidot).max()),
            dissipation=dissipation(grid, state.phidot),
            density_min=float(g.min()),
            density_max=float(g.max()),
        )


def write_csv(records: Sequence[DiagnosticsRecord], path=None) -> str:
    """Trajectory CSV in the fixed column order; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
