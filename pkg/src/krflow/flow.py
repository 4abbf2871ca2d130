"""Parabolic complex Monge-Ampère flow on a periodic grid.

The potential obeys

    dφ/dt = log((ω̂_t + ∂∂̄φ) / Ω) - ν φ + k t

where ω̂_t comes from a :class:`BackgroundFamily` and ``k`` is the optional
``volume_rescale`` (zero except for collapsing product factors).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import InputError, PositivityError, RangeError, SingularityReached, ValidationError
from .grid import PeriodicGrid, metric_from_potential

POSITIVITY_FLOOR = 1e-12
DT_FLOOR = 1e-15
DEFAULT_DT_CAP_C = 0.2

_KIND_CODES = {"static": _kernels.STATIC, "linear": _kernels.LINEAR, "exponential": _kernels.EXPONENTIAL}


@dataclass(frozen=True, eq=False)
class BackgroundFamily:
    """Reference forms ω̂_t.

    ``kind`` is ``static`` (ω̂_t = omega0), ``linear`` (interpolate omega0 to
    ``eta`` over [0, t_prime]) or ``exponential`` (relax omega0 to
    ``omega_inf`` at rate one).
    """

    kind: str
    omega0: np.ndarray
    eta: np.ndarray | None = None
    t_prime: float | None = None
    omega_inf: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise InputError(f"unknown background family {self.kind!r}")
        omega0 = np.asarray(self.omega0, dtype=float)
        if not np.all(omega0 > 0):
            raise ValidationError("omega0 must be strictly positive")
        object.__setattr__(self, "omega0", omega0)
        if self.kind == "linear":
            if self.eta is None or self.t_prime is None or not self.t_prime > 0:
                raise ValidationError("linear family needs eta and a positive t_prime")
            eta = np.asarray(self.eta, dtype=float)
            if np.any(eta < 0):
                raise ValidationError("eta must be non-negative")
            object.__setattr__(self, "eta", eta)
        if self.kind == "exponential":
            if self.omega_inf is None:
                raise ValidationError("exponential family needs omega_inf")
            inf = np.asarray(self.omega_inf, dtype=float)
            if np.any(inf < 0):
                raise ValidationError("omega_inf must be non-negative")
            object.__setattr__(self, "omega_inf", inf)

    @classmethod
    def static(cls, omega):
        return cls("static", omega)

    @classmethod
    def linear(cls, omega0, eta, t_prime):
        return cls("linear", omega0, eta=eta, t_prime=float(t_prime))

    @classmethod
    def exponential(cls, omega0, omega_inf):
        return cls("exponential", omega0, omega_inf=omega_inf)

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    def blend_arrays(self):
        """(A, B, t_prime) with ω̂_t = p(t) A + q(t) B."""
        if self.kind == "linear":
            return self.omega0, self.eta, self.t_prime
        if self.kind == "exponential":
            return self.omega0, self.omega_inf, 1.0
        return self.omega0, np.zeros_like(self.omega0), 1.0


def background_at(family: BackgroundFamily, t: float):
    """(ω̂_t, χ_t) with χ_t the exact time derivative of ω̂_t."""
    if not t >= 0:
        raise InputError(f"time must be non-negative, got {t}")
    if family.kind == "static":
        return family.omega0, np.zeros_like(family.omega0)
    if family.kind == "linear":
        if t > family.t_prime:
            raise RangeError(f"linear family is defined on [0, {family.t_prime}], got t = {t}")
        a, b, tp = family.blend_arrays()
        p, q = _kernels.blend(family.code, float(t), tp)
        return p * a + q * b, (family.eta - family.omega0) / family.t_prime
    e = math.exp(-t)
    return e * family.omega0 + (1.0 - e) * family.omega_inf, -e * (family.omega0 - family.omega_inf)


@dataclass(frozen=True, eq=False)
class FlowProblem:
    grid: PeriodicGrid
    family: BackgroundFamily
    omega: np.ndarray
    nu: int
    phi0: np.ndarray
    degeneracy_profile: np.ndarray | None = None
    volume_rescale: float = 0.0
    dt_cap_c: float = DEFAULT_DT_CAP_C
    model: bool = False
    name: str = ""

    def __post_init__(self):
        g = self.grid
        if self.nu not in (0, 1):
            raise ValidationError(f"nu must be 0 or 1, got {self.nu}")
        omega = g.check(self.omega, "Omega")
        if not np.all(omega > 0):
            raise ValidationError("Omega must be strictly positive")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "phi0", g.check(self.phi0, "phi0"))
        g.check(self.family.omega0, "omega0")
        if self.degeneracy_profile is not None:
            s = g.check(self.degeneracy_profile, "degeneracy_profile")
            if np.any(s < 0):
                raise ValidationError("degeneracy_profile must be non-negative")
            object.__setattr__(self, "degeneracy_profile", s)
        if not self.dt_cap_c > 0:
            raise ValidationError("dt_cap_c must be positive")
        density, ok = metric_from_potential(self.family.omega0, self.phi0, g)
        if not ok:
            raise ValidationError(f"initial metric is not positive (min density {density.min():.3e})")
        object.__setattr__(self, "_log_omega", np.log(omega))

    @property
    def log_omega(self) -> np.ndarray:
        return self._log_omega

    @property
    def dt_cap(self) -> float:
        return self.dt_cap_c * self.grid.h ** 2


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    phi: np.ndarray
    phidot: np.ndarray
    dt_last: float = 0.0
    failed: bool = False

    def metric(self, problem: FlowProblem):
        bg, _ = background_at(problem.family, self.t)
        density, _ = metric_from_potential(bg, self.phi, problem.grid)
        return density


class _Workspace:
    def __init__(self, n):
        self.k = [np.empty((n, n)) for _ in range(4)]
        self.tmp = np.empty((n, n))
        self.new = np.empty((n, n))


def _rhs_raw(problem: FlowProblem, phi, t):
    a, b, tp = problem.family.blend_arrays()
    out = np.empty_like(phi)
    lo, where = _kernels.rhs_into(
        phi, float(t), problem.family.code, tp, a, b, 0.25 / problem.grid.h ** 2,
        problem.log_omega, float(problem.nu), float(problem.volume_rescale), POSITIVITY_FLOOR, out,
    )
    return out, lo, where


def rhs(problem: FlowProblem, state: FlowState) -> np.ndarray:
    """log(density of ω̂_t + ∂∂̄φ over Ω) - νφ (+ k t)."""
    phi = np.ascontiguousarray(state.phi, dtype=float)
    out, lo, where = _rhs_raw(problem, phi, state.t)
    if lo <= POSITIVITY_FLOOR:
        idx = tuple(int(i) for i in np.unravel_index(where, phi.shape))
        raise PositivityError(f"metric density {lo:.3e} at {idx} is below the positivity floor",
                              index=idx, value=lo)
    return out


def initial_state(problem: FlowProblem) -> FlowState:
    phi = problem.phi0.copy()
    return FlowState(0.0, phi, rhs(problem, FlowState(0.0, phi, phi)))


def step(problem: FlowProblem, state: FlowState, dt: float) -> FlowState:
    """One RK4 step of size dt, halved until every stage stays positive."""
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    n = problem.grid.N
    ws = _Workspace(n)
    a, b, tp = problem.family.blend_arrays()
    phi = np.ascontiguousarray(state.phi, dtype=float)
    while True:
        if dt < DT_FLOOR:
            raise SingularityReached(f"step size fell below {DT_FLOOR:g} at t = {state.t}", state=state)
        lo = _kernels.rk4_step(
            phi, float(state.t), dt, problem.family.code, tp, a, b, 0.25 / problem.grid.h ** 2,
            problem.log_omega, float(problem.nu), float(problem.volume_rescale), POSITIVITY_FLOOR,
            ws.k[0], ws.k[1], ws.k[2], ws.k[3], ws.tmp, ws.new,
        )
        if lo > POSITIVITY_FLOOR:
            break
        dt *= 0.5
    new = FlowState(state.t + dt, ws.new.copy(), ws.k[0].copy(), dt)
    return replace(new, phidot=rhs(problem, new))


@dataclass
class RunResult:
    records: list
    final: FlowState
    status: str = "ok"
    message: str = ""
    states: list = field(default_factory=list)
    monitor_output: dict = field(default_factory=dict)
    steps: int = 0


def sample_schedule(t_end: float, sample_every: float) -> list:
    """Sample times k*sample_every up to t_end, always ending exactly at t_end."""
    if not t_end >= 0:
        raise InputError(f"t_end must be non-negative, got {t_end}")
    if t_end == 0:
        return [0.0]
    if not sample_every > 0:
        raise InputError("sample_every must be positive")
    count = int(math.floor(t_end / sample_every + 1e-9))
    times = [k * sample_every for k in range(count + 1)]
    if t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times.append(float(t_end))
    else:
        times[-1] = float(t_end)
    return times


def run(problem: FlowProblem, t_end: float, sample_every: float,
        monitors: Sequence[Callable] = (), sample_times: Sequence[float] | None = None,
        record: bool = True, keep_states: bool = False,
        stop: Callable | None = None, recorder: Callable | None = None) -> RunResult:
    """Integrate to t_end, recording diagnostics at every sample time.

    ``monitors`` are called as ``monitor(problem, state)`` at each sample and
    their return values collected per monitor name.  ``stop(problem, state)``
    returning true ends the run early with status ``stopped``.  ``recorder``
    replaces the default diagnostics recorder.  On a singularity the
    partial result is attached to the raised :class:`SingularityReached`.
    """
    from .diagnostics import Recorder

    times = list(sample_times) if sample_times is not None else sample_schedule(t_end, sample_every)
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] != 0.0:
        raise InputError("sample times must start at 0 and increase strictly")
    if record and recorder is None:
        recorder = Recorder(problem)
    if not record:
        recorder = None
    result = RunResult(records=[], final=None)
    names = [getattr(m, "__name__", f"monitor{i}") for i, m in enumerate(monitors)]
    for name in names:
        result.monitor_output[name] = []

    def observe(state):
        result.final = state
        if recorder is not None:
            result.records.append(recorder(state))
        if keep_states:
            result.states.append(state)
        for name, monitor in zip(names, monitors):
            result.monitor_output[name].append(monitor(problem, state))

    state = initial_state(problem)
    observe(state)
    n = problem.grid.N
    ws = _Workspace(n)
    a, b, tp = problem.family.blend_arrays()
    phi = state.phi.copy()
    t = 0.0
    wmin = float(state.metric(problem).min())
    for target in times[1:]:
        status, t, dt_last, wmin, steps = _kernels.advance(
            phi, t, float(target), problem.dt_cap, wmin, problem.family.code, tp, a, b,
            0.25 / problem.grid.h ** 2, problem.log_omega, float(problem.nu),
            float(problem.volume_rescale), POSITIVITY_FLOOR, DT_FLOOR,
            ws.k[0], ws.k[1], ws.k[2], ws.k[3], ws.tmp, ws.new,
        )
        result.steps += steps
        snap = phi.copy()
        if status != 0:
            try:
                last = FlowState(t, snap, rhs(problem, FlowState(t, snap, snap)), dt_last, failed=True)
                observe(last)
            except PositivityError:
                last = FlowState(t, snap, np.full_like(snap, np.nan), dt_last, failed=True)
                result.final = last
            result.status = "singular"
            result.message = f"step size fell below {DT_FLOOR:g} at t = {t!r}"
            raise SingularityReached(result.message, state=last, result=result)
        state = FlowState(t, snap, rhs(problem, FlowState(t, snap, snap)), dt_last)
        observe(state)
        if stop is not None and stop(problem, state):
            result.status = "stopped"
            break
    return result
