"""Riemann sums and the gauge-refinement integration engine.

At level k the engine uses the constant gauge ``h0 * 2**-k`` (the right
radius is clamped up to the forward graininess at scattered points), draws
the deterministic Cousin partition plus ``m`` random fine partitions, and
stops as soon as the spread ``max(sums) - min(sums)`` is within tolerance.
The reported value is the midpoint of the sampled sums.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as _quad

from .errors import IntegrityError, InvalidInterval, NotInTimeScale, NotOracleEligible
from .gauge import (
    CHUNK,
    SAFETY,
    DeltaGauge,
    TaggedPartition,
    cousin_partition,
    expected_items,
    is_fine,
    random_fine_partition,
    splits_at,
    stitch_gauges,
    stream_partition,
)
from .riesz import SCALAR, LatticeElement, LatticeSpace, Regulator
from .timescale import TimeScale, TsInterval, points_in


class Integrand:
    """A pure function from points of a time scale to a lattice space.

    ``fn`` maps a float array of shape (n,) to values of shape (n,) or
    (n, dim).  Pass ``vectorized=False`` for a plain scalar callable.
    """

    def __init__(
        self,
        fn: Callable,
        space: LatticeSpace = SCALAR,
        *,
        vectorized: bool = True,
        name: Optional[str] = None,
        domain: Optional[TimeScale] = None,
        oracle_eligible: bool = True,
        breakpoints: Sequence[float] = (),
    ):
        self.space = space
        self.name = name or getattr(fn, "__name__", "f")
        self.domain = domain
        self.oracle_eligible = oracle_eligible
        self.breakpoints = tuple(breakpoints)
        if vectorized:
            self._fn = fn
        else:
            dim = space.dim

            def loop(ts):
                return np.array([np.asarray(fn(float(t)), dtype=float).reshape(dim) for t in ts]).reshape(-1, dim)

            self._fn = loop

    def values(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.domain is not None and len(ts):
            bad = ~self.domain.contains_array(ts)
            if np.any(bad):
                raise NotInTimeScale(float(ts[np.argmax(bad)]), "tag outside the integrand's domain")
        out = np.asarray(self._fn(ts), dtype=float)
        out = np.broadcast_to(out.reshape(len(ts), -1) if out.ndim else out, (len(ts), self.space.dim))
        return out

    def __call__(self, t: float) -> LatticeElement:
        return LatticeElement.from_array(self.space, self.values([t])[0])

    def with_domain(self, domain: TimeScale) -> "Integrand":
        return Integrand(
            self._fn, self.space, name=self.name, domain=domain,
            oracle_eligible=self.oracle_eligible, breakpoints=self.breakpoints,
        )

    @classmethod
    def constant(cls, value, space: LatticeSpace = SCALAR) -> "Integrand":
        row = np.broadcast_to(np.asarray(value, dtype=float), (space.dim,)).copy()
        return cls(lambda ts: np.tile(row, (len(ts), 1)), space, name=f"const{tuple(row)}")

    @classmethod
    def from_expr(cls, text: str) -> "Integrand":
        from .exprlang import compile_expr

        return compile_expr(text)

    def component(self, k: int) -> "Integrand":
        return Integrand(
            lambda ts: self.values(ts)[:, k], SCALAR, name=f"{self.name}[{k}]",
            oracle_eligible=self.oracle_eligible, breakpoints=self.breakpoints,
        )

    def __repr__(self):
        return f"Integrand({self.name!r}, {self.space})"


def linear_combination(alpha: float, f: Integrand, beta: float, g: Integrand) -> Integrand:
    if f.space != g.space:
        raise ValueError(f"{f.space} vs {g.space}")
    return Integrand(
        lambda ts: alpha * f.values(ts) + beta * g.values(ts),
        f.space,
        name=f"{alpha}*({f.name}) + {beta}*({g.name})",
        oracle_eligible=f.oracle_eligible and g.oracle_eligible,
        breakpoints=f.breakpoints + g.breakpoints,
    )


_EXACT_ITEMS = 4096


class _Accumulator:
    """Running sum of f(tag) * (right - left) over chunks of items."""

    def __init__(self, f: Integrand):
        self.f = f
        self.total = np.zeros(f.space.dim, dtype=np.longdouble)

    def __call__(self, l, r, tag):
        vals = self.f.values(tag)
        if len(l) <= _EXACT_ITEMS:
            # extended precision makes sums of a constant telescope exactly
            w = r.astype(np.longdouble) - l.astype(np.longdouble)
            self.total += (vals.astype(np.longdouble) * w[:, None]).sum(axis=0)
        else:
            w = r - l
            for k in range(vals.shape[1]):
                self.total[k] += np.dot(vals[:, k], w)

    def result(self) -> np.ndarray:
        return self.total.astype(float)


def _sum_array(f: Integrand, P: TaggedPartition) -> np.ndarray:
    acc = _Accumulator(f)
    for start in range(0, len(P), CHUNK):
        stop = start + CHUNK
        acc(P.left[start:stop], P.right[start:stop], P.tag[start:stop])
    return acc.result()


def riemann_sum(f: Integrand, P: TaggedPartition) -> LatticeElement:
    """sum_k f(tag_k) * (right_k - left_k)."""
    return LatticeElement.from_array(f.space, _sum_array(f, P))


@dataclass(frozen=True)
class EngineConfig:
    seed: int = 0
    samples_per_level: int = 8
    max_levels: int = 40
    initial_scale: Optional[float] = None
    safety: float = SAFETY
    max_items: int = 10_000_000
    workers: Optional[int] = None

    def __post_init__(self):
        if self.samples_per_level < 2:
            raise ValueError("samples_per_level must be >= 2")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.initial_scale is not None and not self.initial_scale > 0:
            raise ValueError("initial_scale must be positive")


@dataclass(frozen=True)
class IntegralResult:
    value: LatticeElement
    spread: LatticeElement
    level: int
    levels_used: int
    partitions_evaluated: int
    converged: bool
    fitted_regulator: Regulator
    gauge_scale: float
    history: tuple = field(default=())
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "value": self.value.to_json(),
            "spread": self.spread.to_json(),
            "converged": self.converged,
            "levels": self.level,
            "levels_used": self.levels_used,
            "partitions": self.partitions_evaluated,
            "gauge_scale": self.gauge_scale,
            "regulator": self.fitted_regulator.to_json(),
            "reason": self.reason,
        }


def _tol_array(tol, space: LatticeSpace) -> np.ndarray:
    if isinstance(tol, LatticeElement):
        arr = tol.array
    else:
        arr = np.broadcast_to(np.asarray(tol, dtype=float), (space.dim,)).copy()
    if arr.shape != (space.dim,) or np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"tolerance must be a nonnegative element of {space}")
    return arr


def _workers(cfg: EngineConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    try:
        return max(1, int(os.environ.get("HK_TS_THREADS", "1")))
    except ValueError:
        return 1


def initial_scale(I: TsInterval, cfg: EngineConfig) -> float:
    return cfg.initial_scale if cfg.initial_scale is not None else I.length / 2.0


@lru_cache(maxsize=512)
def _constant_gauge(I: TsInterval, h: float) -> DeltaGauge:
    return DeltaGauge.level(I, h)


def level_gauge(I: TsInterval, cfg: EngineConfig, level: int) -> DeltaGauge:
    return _constant_gauge(I, math.ldexp(initial_scale(I, cfg), -level))


def _right_prob(index: int, m: int) -> float:
    # spread the tag bias from all-left to all-right across the samples
    return index / (m - 1)


def _partition_args(I: TsInterval, cfg: EngineConfig, level: int, index: int):
    seed = None if index == 0 else (cfg.seed, level, index)
    prob = 0.0 if index == 0 else _right_prob(index - 1, cfg.samples_per_level)
    return seed, prob


def level_partition(I: TsInterval, cfg: EngineConfig, level: int, index: int) -> TaggedPartition:
    """Partition ``index`` of ``level``: 0 is the Cousin sweep, 1..m are random.

    Random streams are keyed by (seed, level, index), so any partition can be
    regenerated on its own and results do not depend on evaluation order.
    """
    g = level_gauge(I, cfg, level)
    seed, prob = _partition_args(I, cfg, level, index)
    if seed is None:
        return cousin_partition(I, g, cfg.safety, cfg.max_items + CHUNK)
    return random_fine_partition(I, g, seed, cfg.safety, prob, cfg.max_items + CHUNK)


def level_partitions(I: TsInterval, cfg: EngineConfig, level: int) -> list:
    return [level_partition(I, cfg, level, i) for i in range(cfg.samples_per_level + 1)]


def level_sum(f: Integrand, I: TsInterval, cfg: EngineConfig, level: int, index: int) -> np.ndarray:
    """Riemann sum of ``f`` over ``level_partition(I, cfg, level, index)``,
    computed while the partition is generated."""
    acc = _Accumulator(f)
    seed, prob = _partition_args(I, cfg, level, index)
    stream_partition(I, level_gauge(I, cfg, level), acc, seed, cfg.safety, prob, cfg.max_items + CHUNK)
    return acc.result()


def _check_purity(f: Integrand, P: TaggedPartition):
    probe = P.tag[: min(len(P), 64)]
    v1 = np.array(f.values(probe), copy=True)
    v2 = np.array(f.values(probe), copy=True)
    if not np.all(np.isfinite(v1)):
        raise IntegrityError(f"integrand {f.name!r} returned non-finite values")
    if not np.array_equal(v1, v2):
        k = int(np.argmax(np.any(v1 != v2, axis=1)))
        raise IntegrityError(f"integrand {f.name!r} is not pure: two values at t={float(probe[k])!r}")


def _first_batch(m: int) -> list:
    # the all-left Cousin sweep and the most right-tagged sample usually bracket
    # the other sums, so a level that is going to fail tends to fail here
    return [0, m]


def level_statistics(f: Integrand, I: TsInterval, cfg: EngineConfig, level: int):
    """(value, spread) over all m + 1 partitions of one level."""
    stack = np.array([level_sum(f, I, cfg, level, i) for i in range(cfg.samples_per_level + 1)])
    top, bottom = stack.max(axis=0), stack.min(axis=0)
    return 0.5 * (top + bottom), top - bottom


def hk_integrate(f: Integrand, I: TsInterval, tol=1e-6, cfg: EngineConfig = EngineConfig()) -> IntegralResult:
    """Integrate ``f`` over ``I`` by gauge refinement with a Cauchy-spread stop.

    Each level is evaluated in two fixed batches; when the first batch alone
    already exceeds the tolerance the rest of the level is skipped, since it
    cannot bring the spread back down.  If no level converges, the finest
    level attempted is completed and reported with ``converged=False``.
    """
    if not isinstance(I, TsInterval):
        raise InvalidInterval("expected a TsInterval")
    tol_arr = _tol_array(tol, f.space)
    h0 = initial_scale(I, cfg)
    m = cfg.samples_per_level
    workers = _workers(cfg)
    history = []
    evaluated = 0
    reason = "max_levels"
    state = None

    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def run(level, indices):
        jobs = [(level, i) for i in indices]
        if pool:
            return list(pool.map(lambda j: level_sum(f, I, cfg, *j), jobs))
        return [level_sum(f, I, cfg, *j) for j in jobs]

    try:
        if expected_items(I, h0, cfg.safety) <= cfg.max_items:
            _check_purity(f, level_partition(I, cfg, 0, 0))
        for level in range(cfg.max_levels):
            h = math.ldexp(h0, -level)
            if expected_items(I, h, cfg.safety) > cfg.max_items:
                reason = "item budget"
                break
            first = _first_batch(m)
            sums = run(level, first)
            evaluated += len(sums)
            complete = False
            if np.all(np.ptp(sums, axis=0) <= tol_arr):
                rest = [i for i in range(m + 1) if i not in first]
                sums += run(level, rest)
                evaluated += len(rest)
                complete = True
            state = (level, h, sums, complete)
            spread = np.ptp(sums, axis=0)
            history.append(tuple(float(x) for x in spread))
            if complete and np.all(spread <= tol_arr):
                reason = "converged"
                break
        if state is not None and not state[3]:
            level, h, sums, _ = state
            rest = [i for i in range(m + 1) if i not in _first_batch(m)]
            sums = sums + run(level, rest)
            evaluated += len(rest)
            state = (level, h, sums, True)
            history[-1] = tuple(float(x) for x in np.ptp(sums, axis=0))
    finally:
        if pool:
            pool.shutdown()

    if state is None:
        # budget exceeded before the first level: nothing sampled
        z = f.space.zero()
        inf = LatticeElement(f.space, (math.inf,) * f.space.dim)
        return IntegralResult(z, inf, -1, 0, 0, False, Regulator.zero(f.space), h0, (), reason)
    level, h, sums, _ = state
    stack = np.array(sums)
    top, bottom = stack.max(axis=0), stack.min(axis=0)
    spread_el = LatticeElement.from_array(f.space, top - bottom)
    return IntegralResult(
        value=LatticeElement.from_array(f.space, 0.5 * (top + bottom)),
        spread=spread_el,
        level=level,
        levels_used=len(history),
        partitions_evaluated=evaluated,
        converged=reason == "converged",
        fitted_regulator=Regulator((spread_el * 2.0,), 0.5, 0, f.space),
        gauge_scale=h,
        history=tuple(history),
        reason=reason,
    )


def oracle_integrate(f: Integrand, I: TsInterval, quad_tol: float = 1e-10) -> LatticeElement:
    """Independent reference value: exact sums over the scattered points plus
    adaptive quadrature on every continuum segment."""
    if not f.oracle_eligible:
        raise NotOracleEligible(f"integrand {f.name!r} is not declared piecewise smooth")
    scale = I.scale
    total = np.zeros(f.space.dim)
    for lo, hi in points_in(I):
        if lo < hi:
            brk = [p for p in f.breakpoints if lo < p < hi]
            for k in range(f.space.dim):
                val, _err = _quad.quad(
                    lambda x: float(f.values([x])[0, k]),
                    lo, hi, epsabs=quad_tol, epsrel=quad_tol, limit=500,
                    points=brk or None,
                )
                total[k] += val
        if hi < I.b:
            total += f.values([hi])[0] * scale.mu(hi)
    return LatticeElement.from_array(f.space, total)


# theorem checks


@dataclass(frozen=True)
class LinearityReport:
    integral_f: IntegralResult
    integral_g: IntegralResult
    integral_combo: IntegralResult
    defect: LatticeElement
    bound: LatticeElement
    ok: bool

    def to_json(self):
        return {
            "f": self.integral_f.to_json(),
            "g": self.integral_g.to_json(),
            "combination": self.integral_combo.to_json(),
            "defect": self.defect.to_json(),
            "bound": self.bound.to_json(),
            "ok": self.ok,
        }


def check_linearity(f, g, alpha, beta, I, tol=1e-6, cfg: EngineConfig = EngineConfig()) -> LinearityReport:
    """Integrate f, g and alpha*f + beta*g separately and compare."""
    rf = hk_integrate(f, I, tol, cfg)
    rg = hk_integrate(g, I, tol, cfg)
    rh = hk_integrate(linear_combination(alpha, f, beta, g), I, tol, cfg)
    tol_el = LatticeElement.from_array(f.space, _tol_array(tol, f.space))
    defect = abs(rh.value - rf.value * alpha - rg.value * beta)
    bound = rh.spread + rf.spread * abs(alpha) + rg.spread * abs(beta) + tol_el
    ok = rf.converged and rg.converged and rh.converged and defect <= bound
    return LinearityReport(rf, rg, rh, defect, bound, ok)


@dataclass(frozen=True)
class SplitReport:
    whole: IntegralResult
    left: IntegralResult
    right: IntegralResult
    defect: LatticeElement
    bound: LatticeElement
    stitched_partitions: int
    stitched_fine: bool
    stitched_split: bool
    ok: bool

    def to_json(self):
        return {
            "whole": self.whole.to_json(),
            "left": self.left.to_json(),
            "right": self.right.to_json(),
            "defect": self.defect.to_json(),
            "bound": self.bound.to_json(),
            "stitched": {
                "partitions": self.stitched_partitions,
                "fine": self.stitched_fine,
                "split_at_c": self.stitched_split,
            },
            "ok": self.ok,
        }


def split_integrate(f, I: TsInterval, c: float, tol=1e-6, cfg: EngineConfig = EngineConfig()) -> SplitReport:
    """Compare the integral over [a, b] with the sum over [a, c] and [c, b]."""
    if c not in I.scale or not I.a < c < I.b:
        raise InvalidInterval(f"split point {c!r} must be a point of T strictly inside [a, b]")
    left_I, right_I = I.sub(I.a, c), I.sub(c, I.b)
    whole = hk_integrate(f, I, tol, cfg)
    left = hk_integrate(f, left_I, tol, cfg)
    right = hk_integrate(f, right_I, tol, cfg)
    tol_el = LatticeElement.from_array(f.space, _tol_array(tol, f.space))
    defect = abs(whole.value - left.value - right.value)
    bound = whole.spread + left.spread + right.spread + tol_el

    # the gauge-stitching construction at the first level
    g = stitch_gauges(level_gauge(left_I, cfg, 0), level_gauge(right_I, cfg, 0))
    parts = [cousin_partition(I, g, cfg.safety)]
    parts += [
        random_fine_partition(I, g, (cfg.seed, 0, i), cfg.safety, _right_prob(i - 1, cfg.samples_per_level))
        for i in range(1, cfg.samples_per_level + 1)
    ]
    fine = all(is_fine(P, g) and P.is_full for P in parts)
    split = all(splits_at(P, c) for P in parts)
    ok = whole.converged and left.converged and right.converged and defect <= bound and fine and split
    return SplitReport(whole, left, right, defect, bound, len(parts), fine, split, ok)


def saks_henstock_residual(
    f: Integrand,
    I: TsInterval,
    partial: TaggedPartition,
    tol=1e-6,
    cfg: EngineConfig = EngineConfig(),
    cache: Optional[dict] = None,
) -> LatticeElement:
    """|S(f, partial) - sum_k integral of f over [left_k, right_k]|.

    Each piece is integrated by the engine at ``tol / len(partial)``.  Pass a
    dict as ``cache`` to reuse piece integrals across calls; a cached piece is
    only reused when it was computed at a tolerance at least as tight.
    """
    n = len(partial)
    if n == 0:
        return f.space.zero()
    if partial.classify() == "invalid":
        raise InvalidInterval("items overlap or leave [a, b]")
    piece_tol = _tol_array(tol, f.space) / n
    total = np.zeros(f.space.dim)
    for l, r in zip(partial.left, partial.right):
        key = (float(l), float(r))
        hit = cache.get(key) if cache is not None else None
        if hit is not None and np.all(hit[0] <= piece_tol):
            val = hit[1]
        else:
            res = hk_integrate(f, I.sub(float(l), float(r)), piece_tol, cfg)
            val = res.value.array
            if cache is not None:
                cache[key] = (piece_tol, val)
        total += val
    s = _sum_array(f, partial)
    return LatticeElement.from_array(f.space, np.abs(s - total))
