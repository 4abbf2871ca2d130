"""Class-level Kähler-Ricci flow on surfaces: existence time, singularity type, MMP.

Along the unnormalized flow the Kähler class moves on the line
``omega0 + t*K``.  Everything below is decided with exact rationals; the one
place irrationality can enter is the quadratic constraint ``class(t)^2 > 0``,
whose root is then returned as a certified interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ClassificationError, DomainError, InputError
from .lattice import (
    RationalClass,
    SurfaceGeometry,
    _as_class,
    blow_down,
    format_fraction,
    is_kahler,
    is_minus_one_curve,
    pair,
    to_fraction,
)

INTERVAL_WIDTH = Fraction(1, 2 ** 64)


@dataclass(frozen=True)
class ClassPath:
    omega0: RationalClass
    c1: RationalClass
    nu: int = 0


def class_path(geom: SurfaceGeometry, omega0, nu: int = 0) -> ClassPath:
    """Build the path starting at ``omega0``; the start must be Kähler."""
    if nu not in (0, 1):
        raise InputError(f"nu must be 0 or 1, got {nu!r}")
    omega0 = _as_class(omega0, geom.rank)
    if not is_kahler(geom, omega0):
        raise DomainError(f"initial class {omega0!r} is not Kähler on {geom.name or 'the geometry'}")
    return ClassPath(omega0=omega0, c1=-geom.canonical_class, nu=nu)


def class_at(path: ClassPath, t):
    """Class at time t.

    For nu=0 and rational t the result is an exact :class:`RationalClass`;
    float times and the normalized path give a float numpy vector.
    """
    if isinstance(t, float):
        if not math.isfinite(t) or t < 0:
            raise InputError(f"time must be finite and non-negative, got {t}")
        w = np.array([float(a) for a in path.omega0])
        k = -np.array([float(a) for a in path.c1])
        if path.nu == 0:
            return w + t * k
        return math.exp(-t) * w + (1.0 - math.exp(-t)) * k
    t = to_fraction(t)
    if t < 0:
        raise InputError(f"time must be non-negative, got {t}")
    if path.nu == 0:
        return path.omega0 - t * path.c1
    return class_at(path, float(t))


@dataclass(frozen=True)
class ExactTime:
    """Infinite, an exact rational, or a certified interval ``[lo, hi]``."""

    kind: str
    lo: Fraction | None = None
    hi: Fraction | None = None

    @classmethod
    def infinite(cls):
        return cls("Infinite")

    @classmethod
    def rational(cls, value):
        v = to_fraction(value)
        return cls("Rational", v, v)

    @classmethod
    def interval(cls, lo, hi):
        return cls("Interval", to_fraction(lo), to_fraction(hi))

    @property
    def value(self):
        if self.kind == "Rational":
            return self.lo
        if self.kind == "Interval":
            return (self.lo, self.hi)
        return None

    def is_finite(self) -> bool:
        return self.kind != "Infinite"

    def __add__(self, other: "ExactTime") -> "ExactTime":
        if not self.is_finite() or not other.is_finite():
            return ExactTime.infinite()
        if self.kind == "Rational" and other.kind == "Rational":
            return ExactTime.rational(self.lo + other.lo)
        return ExactTime.interval(self.lo + other.lo, self.hi + other.hi)

    def __float__(self):
        if self.kind == "Infinite":
            return math.inf
        return float((self.lo + self.hi) / 2)

    def to_json(self) -> dict:
        if self.kind == "Infinite":
            return {"kind": "Infinite", "value": None}
        if self.kind == "Rational":
            return {"kind": "Rational", "value": format_fraction(self.lo)}
        return {"kind": "Interval", "value": [format_fraction(self.lo), format_fraction(self.hi)]}


def volume_polynomial(geom: SurfaceGeometry, path: ClassPath) -> tuple:
    """Coefficients (c0, c1, c2) of (omega0 + t K)^2."""
    if path.nu != 0:
        raise InputError("volume_polynomial is defined on the unnormalized path")
    w, k = path.omega0, -path.c1
    return pair(geom, w, w), 2 * pair(geom, w, k), pair(geom, k, k)


def _eval_poly(coeffs, t: Fraction) -> Fraction:
    c0, c1, c2 = coeffs
    return c0 + t * (c1 + t * c2)


def _rational_sqrt(q: Fraction):
    """Exact square root of a non-negative rational, or None."""
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _quadratic_bound(coeffs) -> ExactTime:
    """First positive root of c0 + c1 t + c2 t^2 given c0 > 0."""
    c0, c1, c2 = coeffs
    if c2 == 0:
        return ExactTime.rational(-c0 / c1) if c1 < 0 else ExactTime.infinite()
    disc = c1 * c1 - 4 * c0 * c2
    if disc < 0 or (c2 > 0 and c1 >= 0):
        return ExactTime.infinite()
    # with c0 > 0 the first positive root is (-c1 - sqrt(disc)) / (2 c2)
    root = _rational_sqrt(disc)
    if root is not None:
        return ExactTime.rational((-c1 - root) / (2 * c2))
    lo = Fraction(0)
    if c2 > 0:
        # the vertex lies between the two positive roots
        hi = -c1 / (2 * c2)
    else:
        hi = Fraction(1)
        while _eval_poly(coeffs, hi) > 0:
            lo, hi = hi, 2 * hi
    while hi - lo >= INTERVAL_WIDTH:
        mid = (lo + hi) / 2
        if _eval_poly(coeffs, mid) > 0:
            lo = mid
        else:
            hi = mid
    return ExactTime.interval(lo, hi)


def _linear_bounds(geom: SurfaceGeometry, path: ClassPath):
    k = -path.c1
    targets = [(label, c) for label, c in geom.curves] + [("<reference>", geom.reference_kahler)]
    for label, c in targets:
        a = pair(geom, path.omega0, c)
        b = pair(geom, k, c)
        if b < 0:
            yield label, -a / b


def maximal_time(geom: SurfaceGeometry, path: ClassPath) -> ExactTime:
    """Supremum of t for which omega0 + t K passes the Nakai test."""
    if path.nu != 0:
        raise InputError("maximal_time is defined on the unnormalized path (nu = 0)")
    if not is_kahler(geom, path.omega0):
        raise DomainError("initial class is not Kähler")
    linear = [b for _, b in _linear_bounds(geom, path)]
    coeffs = volume_polynomial(geom, path)
    quad = _quadratic_bound(coeffs)
    t_lin = min(linear) if linear else None
    if t_lin is None:
        return quad
    if quad.kind == "Infinite":
        return ExactTime.rational(t_lin)
    if quad.kind == "Rational":
        return ExactTime.rational(min(t_lin, quad.lo))
    # the root r lies in (lo, hi]; q > 0 on [0, r) so the sign at t_lin decides
    if _eval_poly(coeffs, t_lin) > 0:
        return ExactTime.rational(t_lin)
    return quad


@dataclass(frozen=True)
class SingularityReport:
    """Outcome of the flow from one class.

    ``kind`` is one of NoSingularity, Contraction, CollapseFibration and
    CollapseToPoint; the remaining fields are filled as they apply.
    """

    T: ExactTime
    kind: str
    volume_poly: tuple
    limit_class: RationalClass | None = None
    curves: tuple = ()
    curve_classes: tuple = ()
    fiber_class: RationalClass | None = None
    volume_linear_coefficient: Fraction | None = None
    is_fano: bool | None = None

    def vanishing_order(self) -> int:
        """Order to which Vol(t) vanishes at T (0 when it does not)."""
        if self.T.kind != "Rational":
            return 0 if self.kind not in ("CollapseFibration", "CollapseToPoint") else 1
        t = self.T.lo
        c0, c1, c2 = self.volume_poly
        if _eval_poly(self.volume_poly, t) != 0:
            return 0
        if c1 + 2 * c2 * t != 0:
            return 1
        return 2 if c2 != 0 else 3

    def to_json(self) -> dict:
        out = {
            "T": self.T.to_json(),
            "kind": self.kind,
            "volume_poly": [format_fraction(c) for c in self.volume_poly],
        }
        if self.limit_class is not None:
            out["limit_class"] = self.limit_class.to_json()
        if self.kind == "Contraction":
            out["contracted_curves"] = list(self.curves)
        if self.kind == "CollapseFibration":
            out["fiber_class"] = self.fiber_class.to_json()
            out["volume_linear_coefficient"] = format_fraction(self.volume_linear_coefficient)
        if self.kind == "CollapseToPoint":
            out["is_fano"] = self.is_fano
        if self.kind == "NoSingularity":
            out["note"] = "minimal relative to the declared curve list"
        return out


def classify_singularity(geom: SurfaceGeometry, path: ClassPath) -> SingularityReport:
    T = maximal_time(geom, path)
    vol = volume_polynomial(geom, path)
    if T.kind == "Infinite":
        return SingularityReport(T=T, kind="NoSingularity", volume_poly=vol)
    if T.kind == "Interval":
        raise ClassificationError(
            "the class degenerates at an irrational time; the limit class has no "
            "rational representative to certify"
        )
    alpha = class_at(path, T.lo)
    sq = pair(geom, alpha, alpha)
    if alpha.is_zero():
        return SingularityReport(
            T=T, kind="CollapseToPoint", volume_poly=vol, limit_class=alpha,
            is_fano=is_kahler(geom, path.c1),
        )
    if sq == 0:
        slope = vol[1] + 2 * vol[2] * T.lo
        return SingularityReport(
            T=T, kind="CollapseFibration", volume_poly=vol, limit_class=alpha,
            fiber_class=alpha.primitive(), volume_linear_coefficient=-slope,
        )
    labels, classes = [], []
    for label, c in geom.curves:
        if pair(geom, alpha, c) == 0 and c not in classes:
            labels.append(label)
            classes.append(c)
    if not classes:
        raise ClassificationError(f"limit class {alpha!r} has positive square but annihilates no declared curve")
    for label, c in zip(labels, classes):
        if not is_minus_one_curve(geom, c):
            raise ClassificationError(f"annihilated curve {label} is not a (-1)-curve")
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            if pair(geom, classes[i], classes[j]) != 0:
                raise ClassificationError(f"annihilated curves {labels[i]} and {labels[j]} intersect")
    return SingularityReport(
        T=T, kind="Contraction", volume_poly=vol, limit_class=alpha,
        curves=tuple(labels), curve_classes=tuple(classes),
    )


@dataclass(frozen=True)
class MmpStep:
    geometry: SurfaceGeometry
    entering_class: RationalClass
    report: SingularityReport
    event: str
    cumulative: ExactTime

    def to_json(self) -> dict:
        return {
            "rank": self.geometry.rank,
            "entering_class": self.entering_class.to_json(),
            "T": self.report.T.to_json(),
            "event": self.event,
            "kind": self.report.kind,
            "contracted_curves": list(self.report.curves),
            "volume_poly": [format_fraction(c) for c in self.report.volume_poly],
            "cumulative": self.cumulative.to_json(),
        }


@dataclass(frozen=True)
class MmpTrace:
    steps: tuple = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "steps": [s.to_json() for s in self.steps],
            "note": "minimality is relative to the declared curve list",
        }


def mmp_run(geom: SurfaceGeometry, omega0) -> MmpTrace:
    """Flow, contract and repeat until the flow is immortal or collapses."""
    steps = []
    cumulative = ExactTime.rational(0)
    current, cls = geom, _as_class(omega0, geom.rank)
    for _ in range(geom.rank + 1):
        report = classify_singularity(current, class_path(current, cls))
        cumulative = cumulative + report.T
        if report.kind == "NoSingularity":
            steps.append(MmpStep(current, cls, report, "Minimal", cumulative))
            return MmpTrace(tuple(steps))
        if report.kind in ("CollapseFibration", "CollapseToPoint"):
            steps.append(MmpStep(current, cls, report, "Collapse", cumulative))
            return MmpTrace(tuple(steps))
        steps.append(MmpStep(current, cls, report, "Contraction", cumulative))
        current, bd = blow_down(current, report.curve_classes)
        cls = bd.push(report.limit_class)
    raise ClassificationError("MMP did not terminate within the lattice rank")
