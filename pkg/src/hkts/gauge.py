"""Delta-gauges, tagged partitions, the fineness predicate and partitioners.

A tagged item ``([l, r], xi)`` is fine for a gauge ``(dL, dR)`` when

    (xi - dL(xi) < l  or  l == xi)  and  l <= xi <= r  and
    (r < xi + dR(xi)  or  r == sigma(xi))

The two escape clauses admit a tag sitting on its left endpoint when
``dL(a) == 0`` and an item that ends exactly at the next point of a
right-scattered tag; without the second one a gauge with ``dR == mu`` at a
scattered point admits no fine partition at all.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidGauge, InvalidInterval
from .timescale import TimeScale, TsInterval, points_in

log = logging.getLogger(__name__)

SAFETY = 0.5
MAX_ITEMS = 5_000_000


def _as_array_fn(fn: Callable, vectorized: bool) -> Callable:
    if vectorized:
        return fn
    vec = np.vectorize(lambda x: float(fn(float(x))), otypes=[float])
    return vec


class DeltaGauge:
    """A pair of radius functions on ``interval``.

    ``left``/``right`` receive float arrays and return the raw radii.  The
    right radius is clamped from below by the forward graininess on [a, b).
    ``consts(lo, hi)`` reports radii that are constant on the open segment
    (lo, hi) so partitioners can step through it without per-point calls;
    it returns None when no such constants are known.
    """

    def __init__(
        self,
        interval: TsInterval,
        left: Callable,
        right: Callable,
        *,
        anchors: Sequence[float] = (),
        consts: Optional[Callable] = None,
        spec: Optional[dict] = None,
    ):
        self.interval = interval
        self._left = left
        self._right = right
        self.anchors = tuple(sorted(set(float(c) for c in anchors)))
        self._consts = consts
        self.spec = spec

    @property
    def scale(self) -> TimeScale:
        return self.interval.scale

    # evaluation

    def dl(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.asarray(self._left(arr), dtype=float)
        out = np.broadcast_to(out, arr.shape).copy()
        return float(out) if out.ndim == 0 else out

    def dr(self, x):
        arr = np.asarray(x, dtype=float)
        raw = np.broadcast_to(np.asarray(self._right(arr), dtype=float), arr.shape)
        mu = self.scale.mu_array(arr)
        out = np.where(arr < self.interval.b, np.maximum(raw, mu), raw)
        return float(out) if out.ndim == 0 else out

    def consts(self, lo: float, hi: float):
        if self._consts is None:
            return None
        if any(lo < c <= hi for c in self.anchors):
            return None
        return self._consts(lo, hi)

    # construction

    @classmethod
    def constant(cls, interval: TsInterval, dL: float, dR: Optional[float] = None) -> "DeltaGauge":
        dR = dL if dR is None else dR
        dL, dR = float(dL), float(dR)
        g = cls(
            interval,
            lambda x: np.full(np.shape(x), dL),
            lambda x: np.full(np.shape(x), dR),
            consts=lambda lo, hi: (dL, dR),
            spec={"dL": dL, "dR": dR},
        )
        g.validate()
        return g

    @classmethod
    def piecewise(
        cls,
        interval: TsInterval,
        components: Sequence,
        overrides: Optional[dict] = None,
    ) -> "DeltaGauge":
        """One ``(dL, dR)`` pair per component of the scale, plus point overrides.

        ``overrides`` maps a point to ``(dL, dR)``; either entry may be None to
        keep the component value.
        """
        scale = interval.scale
        if len(components) != len(scale.components):
            raise InvalidGauge(
                f"{len(components)} gauge entries for {len(scale.components)} components"
            )
        cdl = np.array([float(c[0]) for c in components])
        cdr = np.array([float(c[1]) for c in components])
        overrides = {float(p): v for p, v in (overrides or {}).items()}

        def look(x, col, table):
            idx = np.clip(scale._index_array(x), 0, len(table) - 1)
            out = table[idx].astype(float)
            for p, v in overrides.items():
                if v[col] is not None:
                    out = np.where(x == p, float(v[col]), out)
            return out

        def consts(lo, hi):
            if any(lo < p < hi for p in overrides):
                return None
            i = scale.component_index(lo)
            return float(cdl[i]), float(cdr[i])

        spec = {
            "components": [{"dL": float(l), "dR": float(r)} for l, r in zip(cdl, cdr)],
        }
        if overrides:
            spec["overrides"] = [
                {"point": p, "dL": v[0], "dR": v[1]} for p, v in sorted(overrides.items())
            ]
        g = cls(interval, lambda x: look(x, 0, cdl), lambda x: look(x, 1, cdr), consts=consts, spec=spec)
        g.validate(overrides)
        return g

    @classmethod
    def level(cls, interval: TsInterval, h: float) -> "DeltaGauge":
        """The constant gauge h used at one refinement level of the engine."""
        return cls.constant(interval, h, h)

    @classmethod
    def from_callables(
        cls,
        interval: TsInterval,
        left: Callable,
        right: Callable,
        *,
        vectorized: bool = False,
        anchors: Sequence[float] = (),
    ) -> "DeltaGauge":
        return cls(
            interval,
            _as_array_fn(left, vectorized),
            _as_array_fn(right, vectorized),
            anchors=anchors,
        )

    @classmethod
    def from_json(cls, interval: TsInterval, obj: dict) -> "DeltaGauge":
        if "components" in obj:
            comps = [(c["dL"], c["dR"]) for c in obj["components"]]
            ov = {o["point"]: (o.get("dL"), o.get("dR")) for o in obj.get("overrides", [])}
            return cls.piecewise(interval, comps, ov)
        if "dL" not in obj and "dR" not in obj:
            raise InvalidGauge("gauge spec needs 'dL'/'dR' or 'components'")
        dL = obj.get("dL", obj.get("dR"))
        return cls.constant(interval, dL, obj.get("dR", dL))

    def to_json(self) -> dict:
        if self.spec is None:
            raise TypeError("gauges built from callables are not serialisable")
        return dict(self.spec)

    def validate(self, extra=()):
        """Check the gauge conditions at every point where they can fail.

        Only meaningful for gauges that are constant per component, which is
        what ``consts`` describes; callable gauges are checked lazily by the
        partitioners.
        """
        I = self.interval
        a, b = I.a, I.b
        probe = []
        for lo, hi in points_in(I):
            probe.append(lo)
            probe.append(hi)
            if lo < hi:
                probe.append(0.5 * (lo + hi))
        probe.extend(p for p in extra if a <= p <= b and p in I.scale)
        probe = np.unique(np.array(probe))
        dl = self.dl(probe)
        raw_dr = np.asarray(self._right(probe), dtype=float)
        dr = self.dr(probe)
        for x, l, rr, r in zip(probe, dl, raw_dr, dr):
            if not np.isfinite(l) or not np.isfinite(rr):
                raise InvalidGauge(f"non-finite gauge value at {x}")
            if x > a and not l > 0:
                raise InvalidGauge(f"dL({x}) = {l} must be positive on (a, b]")
            if l < 0 or rr < 0:
                raise InvalidGauge(f"negative gauge value at {x}")
            if x < b and not r > 0:
                raise InvalidGauge(f"dR({x}) = {r} must be positive on [a, b)")


def gauge_min(g1: DeltaGauge, g2: DeltaGauge) -> DeltaGauge:
    if g1.scale != g2.scale:
        raise InvalidGauge("gauges live on different time scales")
    c1, c2 = g1._consts, g2._consts
    consts = None
    if c1 is not None and c2 is not None:

        def consts(lo, hi):
            x, y = c1(lo, hi), c2(lo, hi)
            if x is None or y is None:
                return None
            return min(x[0], y[0]), min(x[1], y[1])

    spec = None
    if g1.spec is not None and g2.spec is not None and "dL" in g1.spec and "dL" in g2.spec:
        spec = {"dL": min(g1.spec["dL"], g2.spec["dL"]), "dR": min(g1.spec["dR"], g2.spec["dR"])}
    return DeltaGauge(
        g1.interval,
        lambda x: np.minimum(g1._left(x), g2._left(x)),
        lambda x: np.minimum(g1._right(x), g2._right(x)),
        anchors=g1.anchors + g2.anchors,
        consts=consts,
        spec=spec,
    )


def stitch_gauges(g1: DeltaGauge, g2: DeltaGauge) -> DeltaGauge:
    """Join a gauge on [a, c] and one on [c, b] into a gauge on [a, b].

    Near c the radii shrink toward c, so every fine partition of [a, b] has c
    as a tag, or has rho(c) < c as a tag of an item ending at c.
    """
    scale = g1.scale
    if g2.scale != scale:
        raise InvalidGauge("gauges live on different time scales")
    c = g1.interval.b
    if g2.interval.a != c:
        raise InvalidInterval(f"gauge domains do not meet: {g1.interval.b} vs {g2.interval.a}")
    whole = TsInterval(scale, g1.interval.a, g2.interval.b)
    eta_c = scale.eta(c)
    left_scattered = eta_c > 0

    def left(x):
        x = np.asarray(x, dtype=float)
        below = g1.dl(x)
        at_c = np.minimum(below, eta_c / 2.0) if left_scattered else below
        above = np.minimum(g2.dl(x), (x - c) / 2.0)
        return np.where(x < c, below, np.where(x == c, at_c, above))

    def right(x):
        x = np.asarray(x, dtype=float)
        mu = scale.mu_array(x)
        below = np.minimum(g1.dr(x), np.maximum(mu, (c - x) / 2.0))
        return np.where(x < c, below, g2.dr(x))

    return DeltaGauge(whole, left, right, anchors=(c,) + g1.anchors + g2.anchors)


@dataclass(frozen=True)
class TaggedInterval:
    left: float
    right: float
    tag: float

    @property
    def length(self) -> float:
        return self.right - self.left


class TaggedPartition:
    """Items ``([left_k, right_k], tag_k)`` stored as three float arrays."""

    __slots__ = ("interval", "left", "right", "tag")

    def __init__(self, interval: TsInterval, left, right, tag):
        self.interval = interval
        self.left = np.ascontiguousarray(left, dtype=float)
        self.right = np.ascontiguousarray(right, dtype=float)
        self.tag = np.ascontiguousarray(tag, dtype=float)
        n = len(self.left)
        if len(self.right) != n or len(self.tag) != n:
            raise ValueError("left/right/tag arrays differ in length")
        for arr in (self.left, self.right, self.tag):
            arr.flags.writeable = False

    @classmethod
    def from_items(cls, interval: TsInterval, items) -> "TaggedPartition":
        items = list(items)
        return cls(
            interval,
            [it[0] if not isinstance(it, TaggedInterval) else it.left for it in items],
            [it[1] if not isinstance(it, TaggedInterval) else it.right for it in items],
            [it[2] if not isinstance(it, TaggedInterval) else it.tag for it in items],
        )

    @property
    def scale(self) -> TimeScale:
        return self.interval.scale

    def __len__(self):
        return len(self.left)

    def __iter__(self):
        for l, r, t in zip(self.left, self.right, self.tag):
            yield TaggedInterval(float(l), float(r), float(t))

    @property
    def items(self) -> list:
        return list(self)

    def __eq__(self, other):
        return (
            isinstance(other, TaggedPartition)
            and self.interval == other.interval
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.tag, other.tag)
        )

    def subset(self, indices) -> "TaggedPartition":
        idx = np.asarray(indices, dtype=int)
        return TaggedPartition(self.interval, self.left[idx], self.right[idx], self.tag[idx])

    @property
    def lengths(self) -> np.ndarray:
        return self.right - self.left

    def classify(self) -> str:
        """'full', 'partial' or 'invalid' relative to ``interval``.

        A full partition is a chain a = t_0 < t_1 < ... < t_n = b; a partial
        one has items inside [a, b] with pairwise disjoint interiors.
        """
        n = len(self)
        a, b = self.interval.a, self.interval.b
        if n == 0:
            return "partial"
        if np.any(self.left >= self.right):
            return "invalid"
        if np.any(self.left < a) or np.any(self.right > b):
            return "invalid"
        order = np.argsort(self.left, kind="stable")
        l, r = self.left[order], self.right[order]
        if np.any(r[:-1] > l[1:]):
            return "invalid"
        if l[0] == a and r[-1] == b and np.array_equal(r[:-1], l[1:]):
            return "full"
        return "partial"

    @property
    def is_full(self) -> bool:
        return self.classify() == "full"

    def to_json(self) -> dict:
        return {
            "items": [{"left": it.left, "right": it.right, "tag": it.tag} for it in self],
            "full": self.is_full,
        }

    @classmethod
    def from_json(cls, interval: TsInterval, obj: dict) -> "TaggedPartition":
        return cls.from_items(interval, [(i["left"], i["right"], i["tag"]) for i in obj["items"]])

    def __repr__(self):
        return f"TaggedPartition({len(self)} items on [{self.interval.a}, {self.interval.b}])"


def _fine_mask(P: TaggedPartition, g: DeltaGauge):
    scale = P.scale
    l, r, xi = P.left, P.right, P.tag
    dl = np.asarray(g.dl(xi), dtype=float).reshape(-1)
    dr = np.asarray(g.dr(xi), dtype=float).reshape(-1)
    sig = scale.sigma_array(xi)
    members = scale.contains_array(l) & scale.contains_array(r) & scale.contains_array(xi)
    inside = (l >= g.interval.a) & (r <= g.interval.b)
    order = (l <= xi) & (xi <= r) & (l < r)
    left_ok = (xi - dl < l) | (l == xi)
    strict_right = r < xi + dr
    right_ok = strict_right | (r == sig)
    ok = members & inside & order & left_ok & right_ok
    escape = right_ok & ~strict_right
    return ok, escape


def is_fine(P: TaggedPartition, g: DeltaGauge) -> bool:
    if P.scale != g.scale:
        raise InvalidGauge("partition and gauge live on different time scales")
    if len(P) == 0:
        return True
    ok, escape = _fine_mask(P, g)
    n_esc = int(np.count_nonzero(escape & ok))
    if n_esc:
        log.debug("sigma(xi) endpoint clause used by %d item(s)", n_esc)
    return bool(np.all(ok))


def fineness_certificate(P: TaggedPartition, g: DeltaGauge) -> dict:
    """Machine-readable evidence for ``is_fine``."""
    if len(P) == 0:
        return {"fine": True, "items": 0, "sigma_clause_items": 0, "first_violation": None}
    ok, escape = _fine_mask(P, g)
    bad = np.flatnonzero(~ok)
    first = None
    if len(bad):
        k = int(bad[0])
        first = {"index": k, "left": float(P.left[k]), "right": float(P.right[k]), "tag": float(P.tag[k])}
    return {
        "fine": bool(len(bad) == 0),
        "items": len(P),
        "sigma_clause_items": int(np.count_nonzero(escape & ok)),
        "first_violation": first,
    }


def splits_at(P: TaggedPartition, c: float) -> bool:
    """True when c is a tag, or rho(c) < c is the tag of an item ending at c."""
    if np.any(P.tag == c):
        return True
    rc = P.scale.rho(c)
    return bool(rc < c and np.any((P.tag == rc) & (P.right == c)))


# partitioners


CHUNK = 1 << 14


class _Builder:
    """Collects items, or hands each chunk to ``sink`` without storing it."""

    def __init__(self, max_items, sink=None):
        self.chunks = []
        self.count = 0
        self.max_items = max_items
        self.sink = sink

    def add(self, l, r, t):
        l = np.atleast_1d(np.asarray(l, dtype=float))
        self.count += len(l)
        if self.count > self.max_items:
            raise InvalidGauge(
                f"partition needs more than {self.max_items} items; the gauge may shrink to zero"
            )
        r = np.atleast_1d(np.asarray(r, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.sink is not None:
            self.sink(l, r, t)
        else:
            self.chunks.append((l, r, t))

    def build(self, interval):
        if not self.chunks:
            return TaggedPartition(interval, [], [], [])
        if len(self.chunks) == 1:
            return TaggedPartition(interval, *self.chunks[0])
        return TaggedPartition(
            interval,
            np.concatenate([c[0] for c in self.chunks]),
            np.concatenate([c[1] for c in self.chunks]),
            np.concatenate([c[2] for c in self.chunks]),
        )


def _fraction(rng, n=None):
    # uniform on (0, 1]; arrays are drawn on the grid k / 2**16, k = 1..2**16
    if rng is None:
        return 1.0 if n is None else np.ones(n)
    if n is None:
        return 1.0 - rng.random()
    k = np.frombuffer(rng.bytes(2 * n), dtype=np.uint16)
    out = np.multiply(k, 2.0**-16, dtype=np.float64)
    out += 2.0**-16
    return out


def _want_right(rng, right_prob, n=None):
    if rng is None or right_prob <= 0:
        return False if n is None else np.zeros(n, dtype=bool)
    if n is None:
        return rng.random() < right_prob
    # one random byte per item: the probability is rounded to a multiple of 1/256
    return np.frombuffer(rng.bytes(n), dtype=np.uint8) < round(256 * right_prob)


def _segment_vectorised(lo, hi, g, consts, s, rng, right_prob, out):
    dL, dR = consts

    def emit(l, r):
        if rng is None or right_prob <= 0:
            tags = l
        else:
            ok = r - dL < l
            if r[-1] == hi:
                ok[-1] = hi - g.dl(hi) < l[-1]
            if right_prob < 1:
                ok &= _want_right(rng, right_prob, len(l))
            # exact select without a data-dependent branch per item
            tags = l * ~ok + r * ok
        out.add(l, r, tags)

    d0 = g.dr(lo)
    if not d0 > 0:
        raise InvalidGauge(f"dR({lo}) = {d0} at a right-dense point")
    t1 = min(lo + _fraction(rng) * s * d0, hi)
    if not t1 > lo or not (t1 == hi or t1 < lo + d0):
        raise InvalidGauge(f"gauge at {lo} is below floating-point resolution")
    emit(np.array([lo]), np.array([t1]))
    if t1 == hi:
        return
    if not dR > 0:
        raise InvalidGauge(f"dR = {dR} on the continuum segment [{lo}, {hi}]")
    ulp = float(np.spacing(max(abs(lo), abs(hi))))
    if (1.0 - s) * dR <= 8 * ulp:
        raise InvalidGauge("gauge radius is below floating-point resolution")
    # tiny random steps can round to nothing; such knots are dropped
    dedupe = rng is not None and s * dR * 2.0**-16 <= 2 * ulp
    mean = s * dR * (1.0 if rng is None else 0.5)
    pos = t1
    while pos < hi:
        n = min(CHUNK, int((hi - pos) / mean * 1.02) + 16)
        if out.count + n > out.max_items + CHUNK:
            raise InvalidGauge(f"partition needs more than {out.max_items} items")
        steps = np.empty(n + 1)
        steps[0] = pos
        np.multiply(_fraction(rng, n), s * dR, out=steps[1:], dtype=np.float64)
        knots = np.cumsum(steps)
        knots[0] = pos
        if knots[-1] >= hi:
            cut = int(np.searchsorted(knots, hi, side="left"))
            knots = knots[: cut + 1]
            knots[cut] = hi
        if dedupe:
            knots = knots[np.concatenate([[True], knots[1:] > knots[:-1]])]
        if len(knots) > 1:
            emit(knots[:-1], knots[1:])
        pos = knots[-1]


def _segment_scalar(lo, hi, g, s, rng, right_prob, out, b):
    """Sweep [lo, hi] point by point. Returns True when the sweep also jumped
    the gap after ``hi`` (an anchor at a right-scattered ``hi``)."""
    scale = g.scale
    t = lo
    anchors = [c for c in g.anchors if lo < c <= hi]
    while t < hi:
        hit = None
        for c in anchors:
            if c > t and c - g.dl(c) < t:
                hit = c
                break
        if hit is not None:
            c = hit
            if c < hi:
                r = min(c + _fraction(rng) * s * g.dr(c), hi)
            elif c < b:
                r = scale.sigma(c)
            else:
                r = c
            out.add(t, r, c)
            if r > hi:
                return True
            t = r
            continue
        d = g.dr(t)
        if not d > 0:
            raise InvalidGauge(f"dR({t}) = {d} at a right-dense point")
        r = min(t + _fraction(rng) * s * d, hi)
        if not r > t or not (r == hi or r < t + d):
            raise InvalidGauge(f"gauge at {t} is below floating-point resolution")
        tag = t
        if _want_right(rng, right_prob) and r - g.dl(r) < t:
            tag = r
        out.add(t, r, tag)
        t = r
    return False


def _sweep(
    I: TsInterval, g: DeltaGauge, s: float, rng, right_prob: float, max_items: int, sink=None
) -> Optional[TaggedPartition]:
    if g.scale != I.scale:
        raise InvalidGauge("gauge and interval live on different time scales")
    if not (g.interval.a <= I.a and I.b <= g.interval.b):
        raise InvalidGauge("interval is not inside the gauge domain")
    if not 0 < s < 1:
        raise ValueError("safety factor must lie in (0, 1)")
    scale = I.scale
    out = _Builder(max_items, sink)
    pieces = points_in(I)
    pending_pts = []

    def flush_points():
        # isolated points are always tagged at their left end, so sums over the
        # scattered part of T are forced
        if pending_pts:
            p = np.array(pending_pts)
            out.add(p, scale.sigma_array(p), p)
            pending_pts.clear()

    for lo, hi in pieces:
        jumped = False
        if lo < hi:
            flush_points()
            consts = g.consts(lo, hi)
            if consts is not None and not any(lo < c <= hi for c in g.anchors):
                _segment_vectorised(lo, hi, g, consts, s, rng, right_prob, out)
            else:
                jumped = _segment_scalar(lo, hi, g, s, rng, right_prob, out, I.b)
        if hi < I.b and not jumped:
            pending_pts.append(hi)
    flush_points()
    return None if sink is not None else out.build(I)


def cousin_partition(
    I: TsInterval, g: DeltaGauge, safety: float = SAFETY, max_items: int = MAX_ITEMS
) -> TaggedPartition:
    """Deterministic left-to-right sweep producing a full fine partition."""
    return _sweep(I, g, safety, None, 0.0, max_items)


def random_fine_partition(
    I: TsInterval,
    g: DeltaGauge,
    seed,
    safety: float = SAFETY,
    right_prob: float = 0.5,
    max_items: int = MAX_ITEMS,
) -> TaggedPartition:
    """Like ``cousin_partition`` with random step fractions in (0, safety] and
    random left/right tags on continuum items (kept only when fine)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _sweep(I, g, safety, rng, right_prob, max_items)


def stream_partition(
    I: TsInterval,
    g: DeltaGauge,
    sink: Callable,
    seed=None,
    safety: float = SAFETY,
    right_prob: float = 0.5,
    max_items: int = MAX_ITEMS,
) -> None:
    """Generate the same items as ``cousin_partition`` (``seed=None``) or
    ``random_fine_partition`` but pass them to ``sink(left, right, tag)`` in
    chunks instead of building the partition."""
    if seed is None:
        _sweep(I, g, safety, None, 0.0, max_items, sink)
    else:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        _sweep(I, g, safety, rng, right_prob, max_items, sink)


def expected_items(I: TsInterval, h: float, safety: float = SAFETY) -> float:
    """Rough item count of a random partition under the constant gauge h."""
    n = 0.0
    for lo, hi in points_in(I):
        n += 1 + (hi - lo) / (0.5 * safety * h)
    return n
