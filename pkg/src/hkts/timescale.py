"""Time scales that are finite unions of closed intervals and isolated points."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidInterval, NotInTimeScale


@dataclass(frozen=True)
class PointClass:
    right: str
    left: str

    @property
    def dense(self) -> bool:
        return self.right == "dense" and self.left == "dense"

    @property
    def isolated(self) -> bool:
        return self.right == "scattered" and self.left == "scattered"


class TimeScale:
    """Sorted, pairwise disjoint components ``(lo, hi)``; a point has ``lo == hi``.

    Touching or overlapping components are merged at construction.  Membership
    and the jump operators are exact: no epsilon is used anywhere, so callers
    must pass points taken from the structure itself.
    """

    __slots__ = ("_lo", "_hi", "_lo_arr", "_hi_arr")

    def __init__(self, components: Iterable):
        comps = []
        for c in components:
            lo, hi = (float(c), float(c)) if np.isscalar(c) else (float(c[0]), float(c[1]))
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("time scale components must be finite")
            if lo > hi:
                raise ValueError(f"empty component [{lo}, {hi}]")
            comps.append((lo, hi))
        if not comps:
            raise ValueError("a time scale is nonempty")
        comps.sort()
        merged = [list(comps[0])]
        for lo, hi in comps[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        self._lo = tuple(c[0] for c in merged)
        self._hi = tuple(c[1] for c in merged)
        self._lo_arr = np.array(self._lo)
        self._hi_arr = np.array(self._hi)

    # construction helpers

    @classmethod
    def uniform(cls, start: float, stop: float, step: float) -> "TimeScale":
        if step <= 0:
            raise ValueError("step must be positive")
        if stop < start:
            raise ValueError("stop must not precede start")
        n = int(math.floor((stop - start) / step + 1e-9))
        return cls(start + k * step for k in range(n + 1))

    @classmethod
    def qscale(cls, q: float, s: float = 1.0, k_max: int = 10) -> "TimeScale":
        """The points q**k * s for k = 0..k_max, together with 0."""
        if not 0.0 < q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if k_max < 0:
            raise ValueError("k_max must be >= 0")
        return cls([0.0] + [s * q**k for k in range(k_max + 1)])

    @classmethod
    def cantor(cls, depth: int, lo: float = 0.0, hi: float = 1.0) -> "TimeScale":
        if depth < 0:
            raise ValueError("depth must be >= 0")
        pieces = [(lo, hi)]
        for _ in range(depth):
            nxt = []
            for a, b in pieces:
                third = (b - a) / 3.0
                nxt.append((a, a + third))
                nxt.append((b - third, b))
            pieces = nxt
        return cls(pieces)

    @classmethod
    def from_json(cls, obj: dict) -> "TimeScale":
        if "generator" in obj:
            g = dict(obj["generator"])
            kind = g.pop("type", None)
            try:
                if kind == "uniform":
                    return cls.uniform(g["start"], g["stop"], g["step"])
                if kind == "qscale":
                    return cls.qscale(g["q"], g.get("s", 1.0), g.get("K", g.get("k_max", 10)))
                if kind == "cantor":
                    return cls.cantor(g["depth"], g.get("lo", 0.0), g.get("hi", 1.0))
            except KeyError as exc:
                raise ValueError(f"generator {kind!r} is missing {exc.args[0]!r}") from None
            raise ValueError(f"unknown generator type {kind!r}")
        if "components" not in obj:
            raise ValueError("time scale spec needs 'components' or 'generator'")
        comps = []
        for c in obj["components"]:
            if "interval" in c:
                lo, hi = c["interval"]
                if not lo < hi:
                    raise ValueError(f"interval component needs lo < hi, got {c['interval']}")
                comps.append((lo, hi))
            elif "point" in c:
                comps.append(c["point"])
            else:
                raise ValueError(f"bad component {c!r}")
        return cls(comps)

    def to_json(self) -> dict:
        out = []
        for lo, hi in zip(self._lo, self._hi):
            out.append({"point": lo} if lo == hi else {"interval": [lo, hi]})
        return {"components": out}

    # structure

    @property
    def components(self) -> list:
        return list(zip(self._lo, self._hi))

    @property
    def min(self) -> float:
        return self._lo[0]

    @property
    def max(self) -> float:
        return self._hi[-1]

    def __eq__(self, other):
        return isinstance(other, TimeScale) and self._lo == other._lo and self._hi == other._hi

    def __hash__(self):
        return hash((self._lo, self._hi))

    def __repr__(self):
        parts = [f"{{{lo!r}}}" if lo == hi else f"[{lo!r}, {hi!r}]" for lo, hi in self.components]
        return "TimeScale(" + " u ".join(parts) + ")"

    def component_index(self, t: float) -> int:
        """Index of the component containing t, or -1."""
        i = bisect.bisect_right(self._lo, t) - 1
        if i >= 0 and t <= self._hi[i]:
            return i
        return -1

    def __contains__(self, t) -> bool:
        return self.component_index(t) >= 0

    def _require(self, t) -> int:
        i = self.component_index(t)
        if i < 0:
            raise NotInTimeScale(t)
        return i

    def sigma(self, t: float) -> float:
        i = self._require(t)
        if t < self._hi[i]:
            return float(t)
        return self._lo[i + 1] if i + 1 < len(self._lo) else float(t)

    def rho(self, t: float) -> float:
        i = self._require(t)
        if t > self._lo[i]:
            return float(t)
        return self._hi[i - 1] if i > 0 else float(t)

    def mu(self, t: float) -> float:
        return self.sigma(t) - t

    def eta(self, t: float) -> float:
        return t - self.rho(t)

    def classify(self, t: float) -> PointClass:
        right = "scattered" if self.sigma(t) > t else "dense"
        left = "scattered" if self.rho(t) < t else "dense"
        return PointClass(right, left)

    # vectorised versions for points already known to be in the scale

    def _index_array(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._lo_arr, t, side="right") - 1

    def contains_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = self._index_array(t)
        ok = idx >= 0
        safe = np.where(ok, idx, 0)
        return ok & (t <= self._hi_arr[safe])

    def sigma_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.clip(self._index_array(t), 0, len(self._lo) - 1)
        inside = t < self._hi_arr[idx]
        nxt = np.minimum(idx + 1, len(self._lo) - 1)
        jump = np.where(idx + 1 < len(self._lo), self._lo_arr[nxt], t)
        return np.where(inside, t, jump)

    def rho_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.clip(self._index_array(t), 0, len(self._lo) - 1)
        inside = t > self._lo_arr[idx]
        prv = np.maximum(idx - 1, 0)
        jump = np.where(idx > 0, self._hi_arr[prv], t)
        return np.where(inside, t, jump)

    def mu_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.sigma_array(t) - t

    def eta_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return t - self.rho_array(t)

    def interval(self, a: float, b: float) -> "TsInterval":
        return TsInterval(self, a, b)

    def full_interval(self) -> "TsInterval":
        return TsInterval(self, self.min, self.max)


@dataclass(frozen=True)
class TsInterval:
    """The set [a, b]_T of points of ``scale`` between a and b."""

    scale: TimeScale
    a: float
    b: float

    def __post_init__(self):
        if self.a not in self.scale:
            raise InvalidInterval(f"left endpoint {self.a!r} is not in the time scale")
        if self.b not in self.scale:
            raise InvalidInterval(f"right endpoint {self.b!r} is not in the time scale")
        if not self.a < self.b:
            raise InvalidInterval(f"need a < b, got [{self.a!r}, {self.b!r}]")

    @property
    def length(self) -> float:
        return self.b - self.a

    def __contains__(self, t) -> bool:
        return self.a <= t <= self.b and t in self.scale

    def sub(self, a: float, b: float) -> "TsInterval":
        if not (self.a <= a and b <= self.b):
            raise InvalidInterval(f"[{a}, {b}] is not inside [{self.a}, {self.b}]")
        return TsInterval(self.scale, a, b)


def points_in(interval: TsInterval) -> list:
    """Decompose [a, b]_T into continuum segments and isolated points.

    Returns ``(lo, hi)`` pairs in increasing order; ``lo == hi`` marks a point
    that stands alone inside [a, b] (an isolated point of T, or the end of a
    component that the restriction cut down to one point).
    """
    scale, a, b = interval.scale, interval.a, interval.b
    out = []
    for lo, hi in scale.components:
        if hi < a or lo > b:
            continue
        out.append((max(lo, a), min(hi, b)))
    return out


def scattered_points(interval: TsInterval) -> list:
    """Points of [a, b)_T with positive forward graininess."""
    out = []
    for lo, hi in points_in(interval):
        if hi < interval.b:
            out.append(hi)
    return out


def continuum_length(interval: TsInterval) -> float:
    return sum(hi - lo for lo, hi in points_in(interval))


def make_generator(spec) -> TimeScale:
    """Build a time scale from a JSON-like spec (see ``TimeScale.from_json``)."""
    if isinstance(spec, TimeScale):
        return spec
    if "type" in spec:
        spec = {"generator": spec}
    return TimeScale.from_json(spec)
