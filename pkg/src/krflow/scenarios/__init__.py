"""Bundled scenarios and the code that turns their configs into runs.

Each scenario is a JSON file next to this module.  ``engine`` selects the
runner: ``flow`` for a single grid flow, ``product`` for the split product of
an elliptic curve and a model curve, ``classflow`` for the exact class engine.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .. import lattice
from ..classflow import class_path, classify_singularity, mmp_run
from ..diagnostics import Recorder, decay_fit, write_csv
from ..errors import InputError, SingularityReached
from ..flow import BackgroundFamily, FlowProblem, FlowState, run, sample_schedule
from ..grid import PeriodicGrid, field_from_spec, write_field

REGISTRY = (
    "homogeneous_ode",
    "torus_c1_zero",
    "model_negative_c1",
    "tsuji_degenerate_model",
    "product_elliptic",
    "linear_degeneration",
    "blowup_p2_classflow",
    "fano_p2_classflow",
    "two_point_blowup_mmp",
)

GEOMETRY_PRESETS = {
    "p2": lattice.projective_plane,
    "blowup_p2": lattice.blowup_p2,
    "two_point_blowup_p2": lattice.two_point_blowup_p2,
    "k_trivial": lattice.k_trivial_rank_one,
}

OVERRIDE_KEYS = ("N", "t_end", "sample_every", "dt_cap_c", "tolerance")


def load_scenario(name: str) -> dict:
    if name not in REGISTRY:
        raise InputError(f"unknown scenario {name!r}; available: {', '.join(REGISTRY)}")
    text = resources.files(__package__).joinpath(f"{name}.json").read_text()
    return json.loads(text)


def geometry_from_spec(spec) -> lattice.SurfaceGeometry:
    """A preset name, a path to a geometry file, or an inline geometry dict."""
    if isinstance(spec, dict):
        return lattice.SurfaceGeometry.from_json(spec)
    if spec in GEOMETRY_PRESETS:
        return GEOMETRY_PRESETS[spec]()
    path = Path(spec)
    if not path.exists():
        raise InputError(f"geometry {spec!r} is neither a preset ({', '.join(GEOMETRY_PRESETS)}) nor a file")
    return lattice.load_geometry(path)


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Copy of cfg with N, t_end, sample_every, dt_cap_c and tolerance replaced."""
    cfg = copy.deepcopy(cfg)
    for key, value in (overrides or {}).items():
        if key == "tolerance":
            cfg.setdefault("estimates", {})["tolerance"] = value
        elif cfg.get("engine") == "product" and key in ("N", "dt_cap_c"):
            cfg["E"][key] = value
            cfg["S"][key] = value
        else:
            cfg[key] = value
    return cfg


def build_problem(cfg: dict, name: str = "") -> FlowProblem:
    grid = PeriodicGrid(int(cfg["N"]))
    fam = cfg["family"]
    kind = fam.get("kind")
    if kind == "static":
        family = BackgroundFamily.static(field_from_spec(grid, fam["omega"]))
    elif kind == "linear":
        family = BackgroundFamily.linear(field_from_spec(grid, fam["omega0"]),
                                         field_from_spec(grid, fam["eta"]), fam["t_prime"])
    elif kind == "exponential":
        family = BackgroundFamily.exponential(field_from_spec(grid, fam["omega0"]),
                                              field_from_spec(grid, fam["omega_inf"]))
    else:
        raise InputError(f"unknown family kind {kind!r}")
    profile = cfg.get("degeneracy_profile")
    return FlowProblem(
        grid=grid,
        family=family,
        omega=field_from_spec(grid, cfg.get("omega_density", 1.0)),
        nu=int(cfg["nu"]),
        phi0=field_from_spec(grid, cfg.get("phi0", 0.0)),
        degeneracy_profile=None if profile is None else field_from_spec(grid, profile),
        volume_rescale=float(cfg.get("volume_rescale", 0.0)),
        dt_cap_c=float(cfg.get("dt_cap_c", 0.2)),
        model=bool(cfg.get("model", False)),
        name=name or cfg.get("name", ""),
    )


@dataclass
class Outcome:
    """What a scenario produced: status, written files and a JSON summary."""

    name: str
    status: str
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 2 if self.status == "singular" else 0


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _record_summary(records) -> dict:
    last = records[-1]
    return {
        "t_final": last.t,
        "phidot_sup_final": last.phidot_sup,
        "density_min_final": last.density_min,
        "density_max_final": last.density_max,
        "estimates_hold": all(r.estimates.all_hold() for r in records),
    }


def _suite_kw(cfg):
    est = dict(cfg.get("estimates", {}))
    return {k: est[k] for k in ("tolerance", "epsilon", "s_floor", "c_eps_cap") if k in est}


def run_flow(cfg: dict, out_dir: Path | None, name: str) -> Outcome:
    problem = build_problem(cfg, name)
    t_end = float(cfg["t_end"])
    status, message = "ok", ""
    recorder_kw = _suite_kw(cfg)
    try:
        result = _run_with_recorder(problem, t_end, float(cfg.get("sample_every", t_end or 1.0)), recorder_kw)
    except SingularityReached as exc:
        result = exc.result
        status, message = "singular", str(exc)
    outcome = Outcome(name, status, records={"trajectory": result.records})
    summary = {
        "scenario": name,
        "model": problem.model,
        "status": status,
        "message": message,
        "steps": result.steps,
        **_record_summary(result.records),
    }
    outcome.summary = summary
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        outcome.files["trajectory"] = out_dir / "trajectory.csv"
        write_csv(result.records, outcome.files["trajectory"])
        outcome.files["phi_final"] = out_dir / "phi_final.csv"
        write_field(outcome.files["phi_final"], result.final.phi, "phi")
        outcome.files["report"] = out_dir / "report.json"
        _dump(outcome.files["report"], summary)
    return outcome


def _run_with_recorder(problem, t_end, sample_every, suite_kw, **kw):
    return run(problem, t_end, sample_every, recorder=Recorder(problem, **suite_kw), **kw)


def _e_factor(cfg_e: dict, times, name: str):
    """Collapsing elliptic factor through the exact log-time substitution.

    With ψ the unnormalized flow from the same data, φ(t) = e^{-t} ψ(e^t - 1)
    solves the normalized equation with background e^{-t}ω₀ and volume
    rescaling one.  ψ is frozen once its time derivative is below
    ``stationary_tol``.
    """
    grid = PeriodicGrid(int(cfg_e["N"]))
    omega0 = field_from_spec(grid, cfg_e.get("omega0", 1.0))
    omega = field_from_spec(grid, cfg_e.get("omega_density", 1.0))
    phi0 = field_from_spec(grid, cfg_e.get("phi0", 0.0))
    c = float(cfg_e.get("dt_cap_c", 0.2))
    psi_problem = FlowProblem(grid, BackgroundFamily.static(omega0), omega, 0, phi0, dt_cap_c=c,
                              name=f"{name}:psi")
    e_problem = FlowProblem(grid, BackgroundFamily.exponential(omega0, np.zeros_like(omega0)), omega, 1,
                            phi0, volume_rescale=1.0, dt_cap_c=c, name=f"{name}:E")
    tol = float(cfg_e.get("stationary_tol", 1e-13))
    s_times = [math.expm1(t) for t in times]

    def stationary(p, state):
        return float(np.abs(state.phidot).max()) < tol

    psi = run(psi_problem, s_times[-1], 1.0, sample_times=s_times, record=False, keep_states=True,
              stop=stationary)
    states = list(psi.states)
    frozen = states[-1]
    while len(states) < len(s_times):
        states.append(FlowState(s_times[len(states)], frozen.phi, frozen.phidot, 0.0))
    mapped = []
    for t, st in zip(times, states):
        decay = math.exp(-t)
        phi = decay * st.phi
        mapped.append(FlowState(t, phi, st.phidot - phi, st.dt_last * decay))
    recorder = Recorder(e_problem)
    records = [recorder(st) for st in mapped]
    return e_problem, mapped, records, psi.status


def run_product(cfg: dict, out_dir: Path | None, name: str) -> Outcome:
    t_end = float(cfg["t_end"])
    sample_every = float(cfg["sample_every"])
    times = sample_schedule(t_end, sample_every)
    cfg_e = dict(cfg["E"])
    if "N" in cfg:
        cfg_e["N"] = cfg["N"]
    e_problem, e_states, e_records, psi_status = _e_factor(cfg_e, times, name)

    # direct integration of the collapsing factor over a short window
    t_direct = min(float(cfg_e.get("direct_check_t_end", 2.0)), t_end)
    direct_times = [t for t in times if t <= t_direct + 1e-12]
    direct = run(e_problem, direct_times[-1], sample_every, sample_times=direct_times,
                 keep_states=True)
    direct_gap = max(float(np.abs(d.phi - m.phi).max()) for d, m in zip(direct.states, e_states))

    cfg_s = {"name": f"{name}:S", "t_end": t_end, "sample_every": sample_every, **cfg["S"]}
    s_problem = build_problem(cfg_s, f"{name}:S")
    s_result = _run_with_recorder(s_problem, t_end, sample_every, _suite_kw(cfg_s))

    flat = e_problem.family.omega0
    envelope = [float(np.abs(st.phi).max()) / ((1.0 + st.t) * math.exp(-st.t)) for st in e_states]
    flattening = [float(np.abs(math.exp(st.t) * st.metric(e_problem) - flat).max()) for st in e_states]
    summary = {
        "scenario": name,
        "model": True,
        "status": "ok",
        "E": {
            "psi_status": psi_status,
            "fitted_C": max(envelope),
            "flattening_final": flattening[-1],
            "direct_check_t_end": direct_times[-1],
            "direct_check_max_gap": direct_gap,
            **_record_summary(e_records),
        },
        "S": {"steps": s_result.steps, **_record_summary(s_result.records)},
    }
    outcome = Outcome(name, "ok", summary=summary,
                      records={"E": e_records, "E_direct": direct.records, "S": s_result.records})
    outcome.summary["E"]["flattening"] = flattening
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for key, fname in (("E", "E_trajectory.csv"), ("E_direct", "E_direct_trajectory.csv"),
                           ("S", "S_trajectory.csv")):
            outcome.files[key] = out_dir / fname
            write_csv(outcome.records[key], outcome.files[key])
        outcome.files["report"] = out_dir / "report.json"
        _dump(outcome.files["report"], summary)
    return outcome


def _preset_class(geom, preset):
    if "beta_gamma" in preset:
        return lattice.blowup_class(*preset["beta_gamma"])
    return lattice.RationalClass(preset["class"])


def run_classflow(cfg: dict, out_dir: Path | None, name: str) -> Outcome:
    geom = geometry_from_spec(cfg["geometry"])
    entries = []
    for preset in cfg["presets"]:
        omega0 = _preset_class(geom, preset)
        report = classify_singularity(geom, class_path(geom, omega0))
        trace = mmp_run(geom, omega0)
        entries.append({
            "label": preset.get("label", ""),
            "class": omega0.to_json(),
            "classification": report.to_json(),
            "volume_vanishing_order": report.vanishing_order(),
            "mmp": trace.to_json(),
        })
    summary = {"scenario": name, "geometry": geom.to_json(), "presets": entries}
    outcome = Outcome(name, "ok", summary=summary)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        outcome.files["report"] = out_dir / "report.json"
        _dump(outcome.files["report"], summary)
    return outcome


RUNNERS = {"flow": run_flow, "product": run_product, "classflow": run_classflow}


def run_config(cfg: dict, out_dir: Path | None = None, name: str | None = None) -> Outcome:
    engine = cfg.get("engine", "flow")
    if engine not in RUNNERS:
        raise InputError(f"unknown engine {engine!r}")
    return RUNNERS[engine](cfg, None if out_dir is None else Path(out_dir), name or cfg.get("name", "custom"))


def run_scenario(name: str, out_dir=None, overrides: dict | None = None) -> Outcome:
    cfg = apply_overrides(load_scenario(name), overrides or {})
    return run_config(cfg, out_dir, name)
