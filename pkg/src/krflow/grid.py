"""Periodic-grid geometry in one complex dimension.

Fields are ``(N, N)`` float arrays on the unit torus, axis 0 along x and
axis 1 along y.  A metric is stored as its density with respect to the flat
form, normalized so that ``integrate`` of a density is the volume.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, InputError

MIN_RESOLUTION = 8


@dataclass(frozen=True)
class PeriodicGrid:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < MIN_RESOLUTION:
            raise InputError(f"grid resolution must be an integer >= {MIN_RESOLUTION}, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple:
        return (self.N, self.N)

    def coords(self):
        """Meshgrid (x, y) of cell corners, ``indexing='ij'``."""
        s = np.arange(self.N) / self.N
        return np.meshgrid(s, s, indexing="ij")

    def check(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise InputError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    @classmethod
    def of(cls, f) -> "PeriodicGrid":
        f = np.asarray(f)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise InputError(f"expected a square 2-d field, got shape {f.shape}")
        return cls(f.shape[0])


def laplacian(f: np.ndarray, h: float) -> np.ndarray:
    """Periodic 5-point Laplacian.

    Neighbours are summed in pairs so constant fields map to exactly zero.
    """
    f = np.asarray(f, dtype=float)
    xs = np.roll(f, 1, axis=0) + np.roll(f, -1, axis=0)
    ys = np.roll(f, 1, axis=1) + np.roll(f, -1, axis=1)
    return ((xs + ys) - 4.0 * f) / (h * h)


def complex_hessian(grid: PeriodicGrid, phi) -> np.ndarray:
    """Discrete ∂∂̄φ density, a quarter of the Laplacian."""
    phi = grid.check(phi, "phi")
    return 0.25 * laplacian(phi, grid.h)


def metric_from_potential(bg, phi, grid: PeriodicGrid | None = None):
    """Density of bg + ∂∂̄φ and whether it is strictly positive."""
    grid = grid or PeriodicGrid.of(bg)
    density = grid.check(bg, "bg") + complex_hessian(grid, phi)
    return density, bool(density.min() > 0.0)


def _require_positive(g, name):
    if not np.all(g > 0.0):
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(g)), np.shape(g)))
        raise DomainError(f"{name} is not positive (min {np.min(g):.3e} at {idx})")


def scalar_curvature(grid: PeriodicGrid, g) -> np.ndarray:
    """R = -∂∂̄ log g / g; identically zero for constant densities.

    The log is taken of g / max g, which leaves the result unchanged in exact
    arithmetic and makes R(2g) = R(g)/2 hold bit for bit.
    """
    g = grid.check(g, "metric")
    _require_positive(g, "metric")
    return -complex_hessian(grid, np.log(g / g.max())) / g


def trace_ratio(a, b):
    """tr_a b.  Tuples of factor densities give the split-product trace."""
    if isinstance(a, (tuple, list)):
        if not isinstance(b, (tuple, list)) or len(a) != len(b):
            raise InputError("split-product traces need matching factor tuples")
        return sum(trace_ratio(fa, fb) for fa, fb in zip(a, b))
    a = np.asarray(a, dtype=float)
    _require_positive(a, "reference metric")
    return np.asarray(b, dtype=float) / a


def integrate(grid: PeriodicGrid, f) -> float:
    f = grid.check(f)
    return float(f.sum() * grid.h * grid.h)


def gradient_sq(grid: PeriodicGrid, f) -> np.ndarray:
    """|∂_z f|² = ¼|∇f|² with centered differences."""
    f = grid.check(f)
    fx = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * grid.h)
    fy = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2 * grid.h)
    return 0.25 * (fx * fx + fy * fy)


def forward_gradient_sq(grid: PeriodicGrid, f) -> np.ndarray:
    """¼(|D⁺_x f|² + |D⁺_y f|²); sums by parts exactly against the 5-point stencil."""
    f = grid.check(f)
    dx = (np.roll(f, -1, axis=0) - f) / grid.h
    dy = (np.roll(f, -1, axis=1) - f) / grid.h
    return 0.25 * (dx * dx + dy * dy)


# Field specifications ------------------------------------------------------

_MODE_FUNCS = {"sin": np.sin, "cos": np.cos}


def field_from_spec(grid: PeriodicGrid, spec) -> np.ndarray:
    """Evaluate a field description on the grid.

    A spec is a number (constant field), ``{"file": path}`` for a snapshot,
    or ``{"const": c, "modes": [{"amp", "fn", "kx", "ky"}, ...], "transform": t}``
    giving ``c + Σ amp·fn(2π(kx·x + ky·y))`` optionally passed through
    ``exp`` or squared (``"square"``).
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.full(grid.shape, float(spec))
    if not isinstance(spec, dict):
        raise InputError(f"unrecognized field spec {spec!r}")
    if "file" in spec:
        values, header = read_field(spec["file"])
        return grid.check(values, f"field from {spec['file']}")
    unknown = set(spec) - {"const", "modes", "transform", "scale"}
    if unknown:
        raise InputError(f"unknown field spec keys: {sorted(unknown)}")
    x, y = grid.coords()
    out = np.full(grid.shape, float(spec.get("const", 0.0)))
    for mode in spec.get("modes", []):
        fn = _MODE_FUNCS.get(mode.get("fn", "cos"))
        if fn is None:
            raise InputError(f"mode function must be sin or cos, got {mode.get('fn')!r}")
        arg = 2 * np.pi * (int(mode.get("kx", 0)) * x + int(mode.get("ky", 0)) * y)
        out += float(mode["amp"]) * fn(arg)
    transform = spec.get("transform", "none")
    if transform == "exp":
        out = np.exp(out)
    elif transform == "square":
        out = out * out
    elif transform != "none":
        raise InputError(f"unknown transform {transform!r}")
    return out * float(spec.get("scale", 1.0))


# Snapshots -----------------------------------------------------------------

def write_field(path, values, kind: str) -> None:
    """JSON header line then one CSV row per x-index, floats in repr form."""
    values = np.asarray(values, dtype=float)
    lines = [json.dumps({"N": int(values.shape[0]), "kind": kind}, sort_keys=True)]
    lines.extend(",".join(repr(float(v)) for v in row) for row in values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path):
    text = Path(path).read_text().splitlines()
    if not text:
        raise InputError(f"{path}: empty snapshot")
    try:
        header = json.loads(text[0])
        n = int(header["N"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: bad snapshot header") from exc
    rows = [[float(v) for v in line.split(",")] for line in text[1:] if line.strip()]
    values = np.array(rows, dtype=float)
    if values.shape != (n, n):
        raise InputError(f"{path}: expected {n}x{n} values, found shape {values.shape}")
    return values, header
