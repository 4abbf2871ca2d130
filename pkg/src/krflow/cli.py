"""Command line entry point: ``krflow run|mmp|classify|scenario``.

Exit status is 0 on success, 2 when a flow stops at a singularity (partial
output is still written) and 1 for any input or configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import scenarios
from .classflow import class_path, classify_singularity, mmp_run
from .errors import ConfigError, KrflowError
from .lattice import RationalClass

MODES = ("run", "mmp", "classify", "scenario")
N_RANGE = (8, 512)
DEFAULT_OUT = "krflow_out"
FLOW_KEYS = ("N", "nu", "family", "t_end")


@dataclass
class RunConfig:
    mode: str
    names: list = field(default_factory=list)
    custom: dict | None = None
    geometry: object = None
    class_coords: list | None = None
    out: str | None = None
    overrides: dict = field(default_factory=dict)
    jobs: int = 1

    def out_dir(self) -> Path:
        return Path(self.out or os.environ.get("KRFLOW_OUT") or DEFAULT_OUT)


def _check_overrides(overrides, errors):
    if not isinstance(overrides, dict):
        errors.append("overrides must be an object")
        return {}
    for key, value in overrides.items():
        if key not in scenarios.OVERRIDE_KEYS:
            errors.append(f"unknown override {key!r}; allowed: {', '.join(scenarios.OVERRIDE_KEYS)}")
        elif key == "N":
            if isinstance(value, bool) or not isinstance(value, int) or not N_RANGE[0] <= value <= N_RANGE[1]:
                errors.append(f"override N={value!r} out of range [{N_RANGE[0]}, {N_RANGE[1]}]")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"override {key} must be a number, got {value!r}")
        elif key == "t_end" and value < 0:
            errors.append(f"override t_end={value} must be non-negative")
        elif key != "t_end" and value <= 0:
            errors.append(f"override {key}={value} must be positive")
    return overrides


def _parse_class(value, errors):
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").strip("[]").split(",") if v]
    if not isinstance(value, list) or not value:
        errors.append(f"class must be a list of rationals, got {value!r}")
        return None
    try:
        return list(RationalClass(value).coords)
    except KrflowError as exc:
        errors.append(f"class: {exc}")
        return None


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config, reporting every problem at once."""
    errors = []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    mode = data.get("mode")
    if mode is None:
        errors.append("missing required key 'mode'")
    elif mode not in MODES:
        errors.append(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    cfg = RunConfig(mode=mode)
    cfg.overrides = _check_overrides(data.get("overrides", {}), errors)
    cfg.out = data.get("out")
    jobs = data.get("jobs", 1)
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        errors.append(f"jobs must be a positive integer, got {jobs!r}")
    else:
        cfg.jobs = jobs

    if mode == "scenario" or (mode == "run" and "custom" not in data):
        names = data.get("name", data.get("scenario"))
        if names is None:
            errors.append("missing required key 'name' (scenario name)")
            names = []
        if isinstance(names, str):
            names = [names]
        for name in names:
            if name not in scenarios.REGISTRY:
                errors.append(f"unknown scenario {name!r}; available: {', '.join(scenarios.REGISTRY)}")
        cfg.names = list(names)
    elif mode == "run":
        custom = data["custom"]
        if not isinstance(custom, dict):
            errors.append("custom must be an object")
        else:
            for key in FLOW_KEYS:
                if key not in custom:
                    errors.append(f"custom config is missing required key {key!r}")
            n = custom.get("N")
            if n is not None and (not isinstance(n, int) or not N_RANGE[0] <= n <= N_RANGE[1]):
                errors.append(f"N={n!r} out of range [{N_RANGE[0]}, {N_RANGE[1]}]")
            if custom.get("nu") not in (None, 0, 1):
                errors.append(f"nu must be 0 or 1, got {custom.get('nu')!r}")
            custom = {"engine": "flow", **custom}
            cfg.custom = custom
    elif mode in ("mmp", "classify"):
        for key in ("geometry", "class"):
            if key not in data:
                errors.append(f"missing required key {key!r}")
        if "geometry" in data:
            try:
                cfg.geometry = scenarios.geometry_from_spec(data["geometry"])
            except (KrflowError, OSError, ValueError, KeyError) as exc:
                errors.append(f"geometry: {exc}")
        if "class" in data:
            cfg.class_coords = _parse_class(data["class"], errors)
        if cfg.geometry is not None and cfg.class_coords is not None \
                and len(cfg.class_coords) != cfg.geometry.rank:
            errors.append(f"class has {len(cfg.class_coords)} coordinates, geometry rank is {cfg.geometry.rank}")
    if errors:
        raise ConfigError(errors)
    return cfg


def _scenario_job(args):
    name, out, overrides = args
    outcome = scenarios.run_scenario(name, out, overrides)
    return name, outcome.status, sorted(str(p) for p in outcome.files.values())


def execute(config: RunConfig):
    """Run the configured engine; returns (exit status, written files)."""
    out = config.out_dir()
    try:
        if config.mode in ("scenario", "run") and config.custom is None:
            jobs = [(name, out / name, config.overrides) for name in config.names]
            if config.jobs > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                    results = list(pool.map(_scenario_job, jobs))
            else:
                results = [_scenario_job(job) for job in jobs]
            files = [f for _, _, fs in results for f in fs]
            for name, status, _ in results:
                print(f"{name}: {status}")
            return (2 if any(s == "singular" for _, s, _ in results) else 0), files
        if config.mode == "run":
            cfg = scenarios.apply_overrides(config.custom, config.overrides)
            outcome = scenarios.run_config(cfg, out, cfg.get("name", "custom"))
            print(f"{outcome.name}: {outcome.status}")
            return outcome.exit_code, sorted(str(p) for p in outcome.files.values())
        out.mkdir(parents=True, exist_ok=True)
        geom = config.geometry
        omega0 = RationalClass(config.class_coords)
        if config.mode == "mmp":
            report = mmp_run(geom, omega0).to_json()
            path = out / "mmp.json"
        else:
            report = classify_singularity(geom, class_path(geom, omega0)).to_json()
            path = out / "classify.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(json.dumps(report, sort_keys=True))
        return 0, [str(path)]
    except KrflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, []


def _override_pair(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        if mode == "scenario":
            p.add_argument("names", nargs="*", help="scenario names (default: all with --all)")
            p.add_argument("--all", action="store_true", help="run every bundled scenario")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--geometry", help="geometry JSON file or preset name")
        p.add_argument("--class", dest="class_", help="class coordinates, e.g. 4,-1")
        p.add_argument("--out", help="output directory (default $KRFLOW_OUT or ./krflow_out)")
        p.add_argument("--jobs", type=int, help="parallel workers for independent scenarios")
        p.add_argument("--override", action="append", type=_override_pair, default=[],
                       metavar="KEY=VALUE", help="override N, t_end, sample_every, dt_cap_c or tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return 1
        if not isinstance(data, dict):
            print("error: config must be a JSON object", file=sys.stderr)
            return 1
        if "mode" not in data and ("custom" in data or {"N", "family"} <= set(data)):
            data = {"custom": data} if "custom" not in data else data
    data["mode"] = args.mode
    if args.mode == "scenario":
        if args.all:
            data["name"] = list(scenarios.REGISTRY)
        elif args.names:
            data["name"] = args.names
    if args.geometry:
        data["geometry"] = args.geometry
    if args.class_:
        data["class"] = args.class_
    if args.out:
        data["out"] = args.out
    if args.jobs is not None:
        data["jobs"] = args.jobs
    if args.override:
        data["overrides"] = {**data.get("overrides", {}), **dict(args.override)}
    try:
        config = parse_config(json.dumps(data))
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    status, _ = execute(config)
    return status


if __name__ == "__main__":
    sys.exit(main())
