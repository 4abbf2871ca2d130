"""Exact intersection theory on the (1,1)-lattice of a Kähler surface.

Everything here works over :class:`fractions.Fraction`; no floating point
enters any decision.  A :class:`SurfaceGeometry` bundles the cup-product
matrix, the canonical class, a finite list of declared irreducible curves and
a reference Kähler class.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    CurveListError,
    DomainError,
    InputError,
    PreconditionError,
    ValidationError,
)


def to_fraction(value) -> Fraction:
    """Parse an int, Fraction or ``"p/q"`` string; floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InputError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational: {value!r}") from exc
    raise InputError(f"exact rational expected, got {type(value).__name__} {value!r}")


def format_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class RationalClass:
    """A (1,1)-class as exact coordinates in the lattice basis."""

    coords: tuple

    def __init__(self, coords: Iterable):
        object.__setattr__(self, "coords", tuple(to_fraction(c) for c in coords))

    @classmethod
    def of(cls, *coords) -> "RationalClass":
        return cls(coords)

    @classmethod
    def zero(cls, rank: int) -> "RationalClass":
        return cls([0] * rank)

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def _check(self, other):
        if not isinstance(other, RationalClass):
            return NotImplemented
        if len(other) != len(self):
            raise InputError(f"rank mismatch: {len(self)} vs {len(other)}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return RationalClass(a + b for a, b in zip(self.coords, other.coords))

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return RationalClass(a - b for a, b in zip(self.coords, other.coords))

    def __neg__(self):
        return RationalClass(-a for a in self.coords)

    def __mul__(self, scalar):
        if isinstance(scalar, float):
            raise InputError("scaling a RationalClass by a float is not exact")
        s = to_fraction(scalar)
        return RationalClass(s * a for a in self.coords)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.coords)

    def primitive(self) -> "RationalClass":
        """Smallest integral vector on the same ray (zero stays zero)."""
        if self.is_zero():
            return self
        lcm = 1
        for a in self.coords:
            lcm = lcm * a.denominator // math.gcd(lcm, a.denominator)
        ints = [int(a * lcm) for a in self.coords]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        return RationalClass(v // g for v in ints)

    def to_json(self) -> list:
        return [format_fraction(a) for a in self.coords]

    def __repr__(self):
        return "RationalClass(" + ", ".join(format_fraction(a) for a in self.coords) + ")"


def _as_class(c, rank: int) -> RationalClass:
    if not isinstance(c, RationalClass):
        c = RationalClass(c)
    if len(c) != rank:
        raise InputError(f"class has {len(c)} coordinates, lattice rank is {rank}")
    return c


def _charpoly(matrix: Sequence[Sequence[Fraction]]) -> list:
    """Characteristic polynomial coefficients, leading first (Faddeev-LeVerrier)."""
    n = len(matrix)
    coeffs = [Fraction(1)]
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        am = [[sum(matrix[i][l] * m[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            am[i][i] += coeffs[-1]
        m = am
        prod_trace = sum(sum(matrix[i][l] * m[l][i] for l in range(n)) for i in range(n))
        coeffs.append(-prod_trace / k)
    return coeffs


def _sign_changes(seq) -> int:
    signs = [1 if s > 0 else -1 for s in seq if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def signature(matrix: Sequence[Sequence[Fraction]]) -> tuple[int, int, int]:
    """(positives, negatives, nullity) of a symmetric rational matrix.

    All eigenvalues of a real symmetric matrix are real, so Descartes' rule
    of signs on the characteristic polynomial counts them exactly.
    """
    n = len(matrix)
    coeffs = _charpoly(matrix)
    # lowest-order nonzero coefficient gives the nullity
    nullity = 0
    while nullity < n and coeffs[n - nullity] == 0:
        nullity += 1
    trimmed = coeffs[: n - nullity + 1]
    positives = _sign_changes(trimmed)
    negated = [c * (-1) ** (len(trimmed) - 1 - i) for i, c in enumerate(trimmed)]
    negatives = _sign_changes(negated)
    return positives, negatives, nullity


@dataclass(frozen=True)
class SurfaceGeometry:
    """Numerical data of a Kähler surface.

    ``curves`` is a tuple of ``(label, RationalClass)`` pairs.  Kählerness is
    only ever certified when ``curve_list_sufficient`` is set.
    """

    rank: int
    pairing_matrix: tuple
    canonical_class: RationalClass
    curves: tuple = ()
    reference_kahler: RationalClass | None = None
    curve_list_sufficient: bool = False
    name: str = ""
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.rank < 1:
            raise ValidationError("rank must be positive")
        rows = tuple(tuple(to_fraction(v) for v in row) for row in self.pairing_matrix)
        if len(rows) != self.rank or any(len(r) != self.rank for r in rows):
            raise ValidationError(f"pairing matrix must be {self.rank}x{self.rank}")
        object.__setattr__(self, "pairing_matrix", rows)
        object.__setattr__(self, "canonical_class", _as_class(self.canonical_class, self.rank))
        curves = tuple((str(label), _as_class(c, self.rank)) for label, c in self.curves)
        object.__setattr__(self, "curves", curves)
        if self.reference_kahler is not None:
            object.__setattr__(self, "reference_kahler", _as_class(self.reference_kahler, self.rank))
        if self.validate:
            self._validate()

    def _validate(self):
        g = self.pairing_matrix
        for i in range(self.rank):
            for j in range(i):
                if g[i][j] != g[j][i]:
                    raise ValidationError("pairing matrix is not symmetric")
        pos, neg = hodge_signature(self)
        if (pos, neg) != (1, self.rank - 1):
            raise ValidationError(
                f"pairing signature ({pos}, {neg}) violates the Hodge index type (1, {self.rank - 1})"
            )
        ref = self.reference_kahler
        if ref is None:
            raise ValidationError("reference_kahler is required")
        if pair(self, ref, ref) <= 0:
            raise ValidationError("reference class has non-positive square")
        for label, c in self.curves:
            if pair(self, ref, c) <= 0:
                raise ValidationError(f"reference class is not positive on curve {label}")

    def curve(self, label: str) -> RationalClass:
        for lab, c in self.curves:
            if lab == label:
                return c
        raise DomainError(f"no declared curve labelled {label!r}")

    def label_of(self, c: RationalClass) -> str:
        for lab, cc in self.curves:
            if cc == c:
                return lab
        raise DomainError(f"{c!r} is not a declared curve")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "pairing": [format_fraction(v) for row in self.pairing_matrix for v in row],
            "canonical": self.canonical_class.to_json(),
            "curves": {label: c.to_json() for label, c in self.curves},
            "reference_kahler": self.reference_kahler.to_json() if self.reference_kahler else None,
            "curve_list_sufficient": self.curve_list_sufficient,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SurfaceGeometry":
        missing = [k for k in ("rank", "pairing", "canonical", "curves", "reference_kahler",
                               "curve_list_sufficient") if k not in data]
        if missing:
            raise InputError(f"geometry is missing keys: {', '.join(missing)}")
        rank = int(data["rank"])
        flat = [to_fraction(v) for v in data["pairing"]]
        if len(flat) != rank * rank:
            raise InputError(f"pairing must hold {rank * rank} entries, got {len(flat)}")
        matrix = [flat[i * rank:(i + 1) * rank] for i in range(rank)]
        curves = data["curves"]
        if isinstance(curves, dict):
            curves = list(curves.items())
        return cls(
            rank=rank,
            pairing_matrix=matrix,
            canonical_class=RationalClass(data["canonical"]),
            curves=[(label, RationalClass(c)) for label, c in curves],
            reference_kahler=RationalClass(data["reference_kahler"]),
            curve_list_sufficient=bool(data["curve_list_sufficient"]),
            name=data.get("name", ""),
        )


def load_geometry(path) -> SurfaceGeometry:
    return SurfaceGeometry.from_json(json.loads(Path(path).read_text()))


def save_geometry(geom: SurfaceGeometry, path) -> None:
    Path(path).write_text(json.dumps(geom.to_json(), indent=2) + "\n")


def pair(geom: SurfaceGeometry, a, b) -> Fraction:
    """Cup product a·b = aᵀ G b."""
    a = _as_class(a, geom.rank)
    b = _as_class(b, geom.rank)
    g = geom.pairing_matrix
    return sum(
        (a[i] * g[i][j] * b[j] for i in range(geom.rank) for j in range(geom.rank) if a[i] and b[j]),
        Fraction(0),
    )


def adjunction_genus(geom: SurfaceGeometry, c) -> Fraction:
    """1 + (K·C + C·C)/2; the arithmetic genus of an irreducible curve C."""
    return 1 + (pair(geom, geom.canonical_class, c) + pair(geom, c, c)) / 2


def is_minus_one_curve(geom: SurfaceGeometry, c) -> bool:
    c = _as_class(c, geom.rank)
    if all(cc != c for _, cc in geom.curves):
        raise DomainError(f"{c!r} is not in the declared curve list; cannot certify it")
    return pair(geom, c, c) == -1 and pair(geom, geom.canonical_class, c) == -1


def is_kahler(geom: SurfaceGeometry, a) -> bool:
    """Nakai-Moishezon test against the declared curves and reference class."""
    if not geom.curve_list_sufficient:
        raise CurveListError(
            "geometry does not assert that its curve list suffices for the Nakai "
            "criterion; refusing to certify a Kähler class"
        )
    a = _as_class(a, geom.rank)
    if pair(geom, a, a) <= 0 or pair(geom, a, geom.reference_kahler) <= 0:
        return False
    return all(pair(geom, a, c) > 0 for _, c in geom.curves)


def hodge_signature(geom: SurfaceGeometry) -> tuple[int, int]:
    pos, neg, nullity = signature(geom.pairing_matrix)
    if nullity:
        raise ValidationError(f"pairing matrix is degenerate (nullity {nullity})")
    return pos, neg


def _nullspace(rows: list, ncols: int) -> list:
    """Basis of {x : rows·x = 0} over Q, one vector per free column (RREF order)."""
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        lead = m[r][col]
        m[r] = [v / lead for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncols
        v[fcol] = Fraction(1)
        for row, pcol in enumerate(pivots):
            v[pcol] = -m[row][fcol]
        basis.append(v)
    return basis


def _solve_columns(columns: list, target: list) -> list:
    """Exact coordinates y with Σ y_k columns[k] = target; raises if inconsistent."""
    n = len(target)
    k = len(columns)
    aug = [[columns[c][i] for c in range(k)] + [target[i]] for i in range(n)]
    row = 0
    pivots = []
    for col in range(k):
        p = next((i for i in range(row, n) if aug[i][col] != 0), None)
        if p is None:
            continue
        aug[row], aug[p] = aug[p], aug[row]
        lead = aug[row][col]
        aug[row] = [v / lead for v in aug[row]]
        for i in range(n):
            if i != row and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[row])]
        pivots.append(col)
        row += 1
    if any(aug[i][k] != 0 for i in range(row, n)):
        raise DomainError("class does not lie in the sublattice")
    y = [Fraction(0)] * k
    for r, col in enumerate(pivots):
        y[col] = aug[r][k]
    return y


@dataclass(frozen=True)
class BlowDown:
    """Identification of the orthogonal complement of contracted curves.

    ``basis`` holds integral vectors upstairs spanning {c : c·E_i = 0}; a
    class downstairs with coordinates y pulls back to Σ y_k basis[k].
    """

    source: SurfaceGeometry
    contracted: tuple
    basis: tuple

    def project(self, c) -> RationalClass:
        """Orthogonal projection c + Σ (c·E_i) E_i onto the complement."""
        c = _as_class(c, self.source.rank)
        out = c
        for e in self.contracted:
            out = out + pair(self.source, c, e) * e
        return out

    def push(self, c) -> RationalClass:
        """Downstairs coordinates of a class orthogonal to every E_i."""
        c = _as_class(c, self.source.rank)
        for e in self.contracted:
            if pair(self.source, c, e) != 0:
                raise DomainError(f"{c!r} is not orthogonal to contracted curve {e!r}")
        return RationalClass(_solve_columns([list(b) for b in self.basis], list(c)))

    def pull(self, y) -> RationalClass:
        y = _as_class(y, len(self.basis))
        out = RationalClass.zero(self.source.rank)
        for yk, b in zip(y, self.basis):
            out = out + yk * b
        return out


def blow_down(geom: SurfaceGeometry, curves: Sequence) -> tuple[SurfaceGeometry, BlowDown]:
    """Contract pairwise-disjoint (-1)-curves.

    The new lattice is the orthogonal complement of the curves with the
    restricted pairing.  Canonical, curve and reference classes are pushed
    through the orthogonal projection (π*π_* c = c + Σ (c·E_i) E_i).
    """
    es = [_as_class(c, geom.rank) for c in curves]
    if not es:
        raise PreconditionError("nothing to contract")
    for e in es:
        try:
            ok = is_minus_one_curve(geom, e)
        except DomainError as exc:
            raise PreconditionError(str(exc)) from exc
        if not ok:
            raise PreconditionError(f"{e!r} is not a (-1)-curve")
    for i in range(len(es)):
        for j in range(i + 1, len(es)):
            if es[i] == es[j] or pair(geom, es[i], es[j]) != 0:
                raise PreconditionError(f"curves {es[i]!r} and {es[j]!r} are not disjoint")
    if len(es) >= geom.rank:
        raise PreconditionError("cannot contract as many curves as the lattice rank")

    g = geom.pairing_matrix
    constraints = [[sum(e[i] * g[i][j] for i in range(geom.rank)) for j in range(geom.rank)] for e in es]
    raw = _nullspace(constraints, geom.rank)
    basis = tuple(RationalClass(v).primitive() for v in raw)
    bd = BlowDown(source=geom, contracted=tuple(es), basis=basis)

    new_rank = len(basis)
    matrix = [[pair(geom, basis[a], basis[b]) for b in range(new_rank)] for a in range(new_rank)]
    canonical = bd.push(bd.project(geom.canonical_class))
    survivors = []
    for label, c in geom.curves:
        if c in es:
            continue
        survivors.append((label, bd.push(bd.project(c))))
    reference = bd.push(bd.project(geom.reference_kahler))
    new = SurfaceGeometry(
        rank=new_rank,
        pairing_matrix=matrix,
        canonical_class=canonical,
        curves=survivors,
        reference_kahler=reference,
        curve_list_sufficient=geom.curve_list_sufficient,
        name=(geom.name + " / contracted") if geom.name else "",
    )
    return new, bd


# Standard lattices ---------------------------------------------------------

def projective_plane() -> SurfaceGeometry:
    """P² with basis (H)."""
    return SurfaceGeometry(
        rank=1, pairing_matrix=[[1]], canonical_class=[-3], curves=[("H", [1])],
        reference_kahler=[1], curve_list_sufficient=True, name="P2",
    )


def blowup_p2() -> SurfaceGeometry:
    """P² blown up at one point, basis (H, E).

    The exceptional curve E and the fiber class H-E generate the cone of
    curves, so the declared list is sufficient.
    """
    return SurfaceGeometry(
        rank=2,
        pairing_matrix=[[1, 0], [0, -1]],
        canonical_class=[-3, 1],
        curves=[("E", [0, 1]), ("H-E", [1, -1]), ("H", [1, 0])],
        reference_kahler=[2, -1],
        curve_list_sufficient=True,
        name="Bl1P2",
    )


def two_point_blowup_p2() -> SurfaceGeometry:
    """P² blown up at two points, basis (H, E1, E2); cone generated by E1, E2, H-E1-E2."""
    return SurfaceGeometry(
        rank=3,
        pairing_matrix=[[1, 0, 0], [0, -1, 0], [0, 0, -1]],
        canonical_class=[-3, 1, 1],
        curves=[
            ("E1", [0, 1, 0]),
            ("E2", [0, 0, 1]),
            ("H-E1-E2", [1, -1, -1]),
            ("H-E1", [1, -1, 0]),
            ("H-E2", [1, 0, -1]),
        ],
        reference_kahler=[3, -1, -1],
        curve_list_sufficient=True,
        name="Bl2P2",
    )


def k_trivial_rank_one() -> SurfaceGeometry:
    """Picard-rank-one model of a surface with K = 0 (generic abelian or K3)."""
    return SurfaceGeometry(
        rank=1, pairing_matrix=[[1]], canonical_class=[0], curves=[],
        reference_kahler=[1], curve_list_sufficient=True, name="K-trivial",
    )


def blowup_class(beta0, gamma0) -> RationalClass:
    """β₀[π*ω₁] + γ₀[f*ω₂] on Bl1P2, where [π*ω₁] = H-E and [f*ω₂] = H."""
    b = to_fraction(beta0)
    g = to_fraction(gamma0)
    return RationalClass([b + g, -b])
