"""Finite-dimensional Riesz spaces and regulators ((D)-sequences).

Elements are tuples of doubles ordered componentwise, so ``dim == 1`` is the
totally ordered real line and ``dim > 1`` is the product lattice R^d.

Regulators are kept in a canonical product form: row ``i`` is the sequence
``a[i, j] = u_i * base**(j - shift)``, which is an (o)-sequence whenever
``u_i != 0``.  Every row past the stored ones is zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import SpaceMismatch


@dataclass(frozen=True)
class LatticeSpace:
    kind: str = "scalar"
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ("scalar", "vector"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind == "scalar" and self.dim != 1:
            raise ValueError("scalar space has dim 1")

    @classmethod
    def scalar(cls) -> "LatticeSpace":
        return cls("scalar", 1)

    @classmethod
    def vector(cls, dim: int) -> "LatticeSpace":
        return cls("vector", dim)

    def zero(self) -> "LatticeElement":
        return LatticeElement(self, (0.0,) * self.dim)

    def element(self, coords) -> "LatticeElement":
        if np.isscalar(coords):
            coords = (coords,) * self.dim
        return LatticeElement(self, tuple(float(c) for c in coords))

    def __str__(self):
        return "scalar" if self.kind == "scalar" else f"vector({self.dim})"


SCALAR = LatticeSpace.scalar()


@dataclass(frozen=True)
class LatticeElement:
    space: LatticeSpace
    coords: tuple

    def __post_init__(self):
        if len(self.coords) != self.space.dim:
            raise SpaceMismatch(f"{len(self.coords)} coords for a {self.space} element")

    @classmethod
    def of(cls, *coords: float) -> "LatticeElement":
        """Scalar element for one coordinate, vector element otherwise."""
        space = SCALAR if len(coords) == 1 else LatticeSpace.vector(len(coords))
        return cls(space, tuple(float(c) for c in coords))

    @classmethod
    def from_array(cls, space: LatticeSpace, arr) -> "LatticeElement":
        arr = np.asarray(arr, dtype=float).reshape(-1)
        return cls(space, tuple(float(c) for c in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def _check(self, other: "LatticeElement"):
        if not isinstance(other, LatticeElement):
            raise TypeError(f"expected LatticeElement, got {type(other).__name__}")
        if other.space != self.space:
            raise SpaceMismatch(f"{self.space} vs {other.space}")

    def _zip(self, other, op):
        self._check(other)
        return LatticeElement(self.space, tuple(op(x, y) for x, y in zip(self.coords, other.coords)))

    def __add__(self, other):
        return self._zip(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._zip(other, lambda x, y: x - y)

    def __neg__(self):
        return LatticeElement(self.space, tuple(-x for x in self.coords))

    def __mul__(self, c: float):
        return LatticeElement(self.space, tuple(c * x for x in self.coords))

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return LatticeElement(self.space, tuple(x / c for x in self.coords))

    def join(self, other):
        return self._zip(other, max)

    def meet(self, other):
        return self._zip(other, min)

    def __abs__(self):
        return self.join(-self)

    def __le__(self, other):
        self._check(other)
        return all(x <= y for x, y in zip(self.coords, other.coords))

    def __ge__(self, other):
        return other <= self

    def __lt__(self, other):
        # strict order of a Riesz space: x <= y and x != y
        return self <= other and self.coords != other.coords

    def __gt__(self, other):
        return other < self

    def is_positive(self) -> bool:
        return all(x >= 0 for x in self.coords)

    def norm(self) -> float:
        return max(abs(x) for x in self.coords)

    def to_json(self) -> list:
        return list(self.coords)

    def __repr__(self):
        if self.space.dim == 1:
            return f"LatticeElement({self.coords[0]!r})"
        return f"LatticeElement{self.coords!r}"


def lattice_join(x: LatticeElement, y: LatticeElement) -> LatticeElement:
    return x.join(y)


def lattice_meet(x: LatticeElement, y: LatticeElement) -> LatticeElement:
    return x.meet(y)


def join_all(xs: Iterable[LatticeElement]) -> LatticeElement:
    it = iter(xs)
    acc = next(it)
    for x in it:
        acc = acc.join(x)
    return acc


def meet_all(xs: Iterable[LatticeElement]) -> LatticeElement:
    it = iter(xs)
    acc = next(it)
    for x in it:
        acc = acc.meet(x)
    return acc


def lattice_sum(xs: Iterable[LatticeElement], space: LatticeSpace) -> LatticeElement:
    acc = space.zero()
    for x in xs:
        acc = acc + x
    return acc


@dataclass(frozen=True)
class EvalMap:
    """A map phi: N -> N given by its first values and a constant tail."""

    values: tuple = ()
    tail_value: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if any(v < 1 for v in self.values) or self.tail_value < 1:
            raise ValueError("eval map entries must be >= 1")

    @classmethod
    def constant(cls, n: int) -> "EvalMap":
        return cls((), n)

    def __call__(self, i: int) -> int:
        """phi(i) for 1-based ``i``."""
        return self.values[i - 1] if i <= len(self.values) else self.tail_value

    def shifted(self, k: int) -> "EvalMap":
        """The map i -> phi(i) + k."""
        return EvalMap(tuple(v + k for v in self.values), self.tail_value + k)

    def to_json(self):
        return {"values": list(self.values), "tail": self.tail_value}


@dataclass(frozen=True)
class Regulator:
    rows: tuple
    base: float = 0.5
    shift: int = 0
    space: LatticeSpace = field(default=SCALAR)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not 0.0 < self.base < 1.0:
            raise ValueError("decay base must lie in (0, 1)")
        for u in self.rows:
            if u.space != self.space:
                raise SpaceMismatch(f"row in {u.space}, regulator in {self.space}")
            if not u.is_positive():
                raise ValueError("regulator rows must be nonnegative")

    @classmethod
    def from_values(cls, rows: Sequence, base: float = 0.5, shift: int = 0) -> "Regulator":
        """Build from plain numbers (scalar rows) or sequences (vector rows)."""
        rows = list(rows)
        if not rows:
            return cls((), base, shift, SCALAR)
        first = rows[0]
        if np.isscalar(first):
            elems = tuple(LatticeElement.of(float(r)) for r in rows)
            space = SCALAR
        else:
            space = LatticeSpace.vector(len(first)) if len(first) > 1 else SCALAR
            elems = tuple(LatticeElement(space, tuple(float(c) for c in r)) for r in rows)
        return cls(elems, base, shift, space)

    @classmethod
    def zero(cls, space: LatticeSpace = SCALAR, base: float = 0.5) -> "Regulator":
        return cls((), base, 0, space)

    @property
    def i_max(self) -> int:
        return len(self.rows)

    def entry(self, i: int, j: int) -> LatticeElement:
        """a[i, j] with 1-based indices."""
        if i > len(self.rows):
            return self.space.zero()
        return self.rows[i - 1] * self.base ** (j - self.shift)

    def row_sum(self) -> LatticeElement:
        return lattice_sum(self.rows, self.space)

    def bound(self) -> LatticeElement:
        """An upper bound of the whole double sequence."""
        return self.row_sum() * self.base ** (1 - self.shift)

    def scaled(self, c: float) -> "Regulator":
        """The regulator (|c| a[i, j])."""
        return Regulator(tuple(u * abs(c) for u in self.rows), self.base, self.shift, self.space)

    def to_json(self) -> dict:
        out = {"base": self.base, "rows": [u.to_json() for u in self.rows]}
        if self.shift:
            out["shift"] = self.shift
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Regulator":
        return cls.from_values(obj["rows"], obj.get("base", 0.5), obj.get("shift", 0))


def regulator_eval(r: Regulator, phi: EvalMap) -> LatticeElement:
    """sup over i of a[i, phi(i)]; rows past ``i_max`` contribute zero."""
    acc = r.space.zero()
    for i in range(1, r.i_max + 1):
        acc = acc.join(r.entry(i, phi(i)))
    return acc


def _common(rs: Sequence[Regulator]):
    space, base = rs[0].space, rs[0].base
    for r in rs[1:]:
        if r.space != space:
            raise SpaceMismatch(f"{r.space} vs {space}")
        if r.base != base:
            raise SpaceMismatch(f"decay base {r.base} vs {base}")
    return space, base


def regulator_combine(rs: Sequence[Regulator]) -> Regulator:
    """A regulator c with sum_r eval(r, phi) <= eval(c, phi) for every phi.

    Each eval is at most U_r * base**(min_i phi(i) - shift_r), so ``c`` repeats
    the row ``sum_r U_r * base**(-shift_r)`` over every index any input uses,
    with one extra shift of headroom.
    """
    rs = list(rs)
    if not rs:
        return Regulator.zero()
    space, base = _common(rs)
    total = space.zero()
    width = 0
    for r in rs:
        total = total + r.row_sum() * base ** (-r.shift)
        width = max(width, r.i_max)
    if width == 0 or total == space.zero():
        return Regulator.zero(space, base)
    return Regulator((total,) * width, base, 1, space)


@dataclass(frozen=True)
class SigmaReport:
    values: tuple
    decreasing: bool
    infimum_proxy: LatticeElement


def sigma_distributivity_check(r: Regulator, depth: int) -> SigmaReport:
    """Evaluate ``r`` along the constant maps phi = n, n = 1..depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    values = tuple(regulator_eval(r, EvalMap.constant(n)) for n in range(1, depth + 1))
    decreasing = True
    for prev, cur in zip(values, values[1:]):
        if not cur <= prev:
            decreasing = False
        # strictly smaller wherever the previous value is nonzero
        if any(p > 0 and not c < p for p, c in zip(prev.coords, cur.coords)):
            decreasing = False
    return SigmaReport(values, decreasing, values[-1])


def fremlin_combine(family: Sequence[Regulator], x: LatticeElement) -> Regulator:
    """Dominate x ^ sum_n sup_i a^n[i, phi(i) + n] by a single regulator.

    The n-th term is at most U_n * base**n * base**(min phi), so every used
    row index of the result carries sum_n U_n * base**(n - shift_n).
    """
    if not x.is_positive():
        raise ValueError("x must be nonnegative")
    family = list(family)
    if not family:
        return Regulator.zero(x.space)
    space, base = _common(family)
    if space != x.space:
        raise SpaceMismatch(f"{space} vs {x.space}")
    total = space.zero()
    width = 0
    for n, r in enumerate(family, start=1):
        total = total + r.row_sum() * base ** (n - r.shift)
        width = max(width, r.i_max)
    if width == 0:
        return Regulator.zero(space, base)
    return Regulator((total,) * width, base, 0, space)


def fremlin_lhs(family: Sequence[Regulator], x: LatticeElement, phi: EvalMap) -> LatticeElement:
    acc = x.space.zero()
    for n, r in enumerate(family, start=1):
        acc = acc + regulator_eval(r, phi.shifted(n))
    return x.meet(acc)


def fremlin_check(family: Sequence[Regulator], x: LatticeElement, c: Regulator, phi: EvalMap):
    """Return (lhs, rhs, holds) for one eval map."""
    lhs = fremlin_lhs(family, x, phi)
    rhs = regulator_eval(c, phi)
    return lhs, rhs, lhs <= rhs


def combination_violations(rs: Sequence[Regulator], entries=range(1, 7), i_max: int = 4):
    """Exhaustively test the combination bound over all maps with the given entries.

    Returns the list of eval maps (first ``i_max`` values) that break it.
    """
    c = regulator_combine(rs)
    bad = []
    for vals in itertools.product(entries, repeat=i_max):
        phi = EvalMap(vals, 1)
        lhs = lattice_sum((regulator_eval(r, phi) for r in rs), c.space)
        if not lhs <= regulator_eval(c, phi):
            bad.append(vals)
    return bad


def row_is_o_sequence(r: Regulator, depth: int = 60) -> bool:
    """Each nonzero row strictly decreases and reaches 1e-15 * |u_i| by ``depth``."""
    for i, u in enumerate(r.rows, start=1):
        if u.norm() == 0:
            continue
        prev = r.entry(i, 1)
        for j in range(2, depth + 1):
            cur = r.entry(i, j)
            if not cur < prev:
                return False
            prev = cur
        if prev.norm() > 1e-15 * u.norm():
            return False
    return True


def dyadic(x: float, bits: int = 20) -> float:
    """Round to a multiple of 2**-bits so sums stay exact in binary floating point."""
    return math.ldexp(round(math.ldexp(x, bits)), -bits)
