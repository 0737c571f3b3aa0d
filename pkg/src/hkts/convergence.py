"""Executable convergence experiments for sequences of integrands.

Universally quantified statements (every point, every eval map) are checked
on finite samples: partition tags plus a quasi-random point set for t, and
the constant maps 1..8 plus seeded random maps for phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MonotonicityError, UniformIntegrabilityError, WitnessNotFound
from .integrator import (
    EngineConfig,
    Integrand,
    IntegralResult,
    hk_integrate,
    level_partition,
    level_sum,
)
from .riesz import (
    EvalMap,
    LatticeElement,
    LatticeSpace,
    Regulator,
    fremlin_check,
    fremlin_combine,
    regulator_eval,
)
from .timescale import TsInterval, points_in, scattered_points

WEYL_POINTS = 64
# golden-ratio increment of the additive recurrence u_k = frac(k * alpha)
_ALPHA = (math.sqrt(5.0) - 1.0) / 2.0


class FunctionSequence:
    """f_1, f_2, ... given by a generator, together with the limit f."""

    def __init__(self, gen: Callable[[int], Integrand], limit: Integrand, name: str = "seq"):
        self.gen = gen
        self.limit = limit
        self.name = name
        self.space: LatticeSpace = limit.space

    def __call__(self, n: int) -> Integrand:
        if n < 1:
            raise ValueError("sequence index starts at 1")
        f = self.gen(n)
        if f.space != self.space:
            raise ValueError(f"f_{n} lives in {f.space}, the limit in {self.space}")
        return f

    def __repr__(self):
        return f"FunctionSequence({self.name!r})"


def default_phis(seed: int = 0, count: int = 8, width: int = 8) -> list:
    """The constant maps 1..8 followed by ``count`` random maps."""
    rng = np.random.default_rng((seed, 0x9E37))
    phis = [EvalMap.constant(k) for k in range(1, 9)]
    for _ in range(count):
        vals = rng.integers(1, 9, size=width)
        phis.append(EvalMap(tuple(int(v) for v in vals), int(rng.integers(1, 9))))
    return phis


def _snap(I: TsInterval, x: float) -> float:
    """Nearest point of [a, b]_T to x (ties go left)."""
    best, dist = I.a, abs(x - I.a)
    for lo, hi in points_in(I):
        p = min(max(x, lo), hi)
        if abs(p - x) < dist:
            best, dist = p, abs(p - x)
    return float(best)


def sample_points(I: TsInterval, partitions: Sequence = (), count: int = WEYL_POINTS) -> np.ndarray:
    """Partition tags, all scattered points, the endpoints and ``count``
    quasi-random points of [a, b]_T, sorted and deduplicated."""
    pts = [I.a, I.b]
    pts += scattered_points(I)
    for P in partitions:
        pts += P.tag.tolist()
    for k in range(1, count + 1):
        u = (k * _ALPHA) % 1.0
        pts.append(_snap(I, I.a + u * (I.b - I.a)))
    return np.unique(np.asarray(pts, dtype=float))


def _differences(seq: FunctionSequence, points: np.ndarray, n_max: int) -> np.ndarray:
    """|f_n(t) - f(t)| for n = 1..n_max; shape (n_max, len(points), dim)."""
    lim = seq.limit.values(points)
    out = np.empty((n_max, len(points), seq.space.dim))
    for n in range(1, n_max + 1):
        out[n - 1] = np.abs(seq(n).values(points) - lim)
    return out


@dataclass(frozen=True)
class WcrsWitness:
    regulator: Regulator
    points: tuple
    p_table: dict
    phi_tables: tuple
    phi_samples: tuple
    n_max: int

    def p(self, t: float) -> int:
        return self.p_table[float(t)]

    def to_json(self) -> dict:
        return {
            "regulator": self.regulator.to_json(),
            "n_max": self.n_max,
            "points": len(self.points),
            "p_max": max(self.p_table.values()),
            "phis": [
                {"phi": phi.to_json(), "p_max": max(tab.values())}
                for phi, tab in zip(self.phi_samples, self.phi_tables)
            ],
        }


def wcrs_witness(
    seq: FunctionSequence,
    reg: Regulator,
    points,
    phis: Sequence[EvalMap],
    n_max: int = 10_000,
    diffs: Optional[np.ndarray] = None,
) -> WcrsWitness:
    """Minimal p(t, phi) with |f_n(t) - f(t)| < eval(reg, phi) for all n in [p, n_max].

    The search is linear in n because |f_n - f| need not be monotone.  One
    table is kept per eval map; ``p_table`` holds the maximum over the maps.
    """
    points = np.asarray(points, dtype=float)
    if diffs is None:
        diffs = _differences(seq, points, n_max)
    phis = tuple(phis)
    tables = []
    p_all = np.ones(len(points), dtype=int)
    for phi in phis:
        bound = regulator_eval(reg, phi).array
        ok = np.all(diffs < bound, axis=2)  # (n_max, points)
        # the last failing n, per point; p is one past it
        failing = ~ok
        any_fail = failing.any(axis=0)
        last = n_max - 1 - np.argmax(failing[::-1], axis=0)
        p = np.where(any_fail, last + 2, 1)
        if np.any(p > n_max):
            k = int(np.argmax(p > n_max))
            raise WitnessNotFound(float(points[k]), phi, n_max)
        tables.append({float(t): int(v) for t, v in zip(points, p)})
        p_all = np.maximum(p_all, p)
    return WcrsWitness(
        regulator=reg,
        points=tuple(float(t) for t in points),
        p_table={float(t): int(v) for t, v in zip(points, p_all)},
        phi_tables=tuple(tables),
        phi_samples=phis,
        n_max=n_max,
    )


# uniform integrability


@dataclass(frozen=True)
class UniformityReport:
    n_set: tuple
    levels: tuple
    residuals: tuple  # residuals[level][n index], componentwise max over partitions
    phi_bounds: tuple
    common_levels: tuple  # per phi, or None
    ok: bool

    def max_residual_per_n(self, level: int) -> tuple:
        return self.residuals[self.levels.index(level)]

    def to_json(self) -> dict:
        return {
            "n": list(self.n_set),
            "levels": list(self.levels),
            "residuals": [[list(r) for r in row] for row in self.residuals],
            "bounds": [list(b) for b in self.phi_bounds],
            "common_levels": list(self.common_levels),
            "ok": self.ok,
        }


def uniform_integrability_check(
    seq: FunctionSequence,
    I: TsInterval,
    reg: Regulator,
    n_set: Sequence[int],
    gauge_levels: int = 12,
    cfg: EngineConfig = EngineConfig(),
    phis: Optional[Sequence[EvalMap]] = None,
    tol=1e-6,
    integrals: Optional[dict] = None,
    raise_on_failure: bool = True,
) -> UniformityReport:
    """Search for one gauge level that works for every n at once.

    For every level below ``gauge_levels`` and every n, the residual is the
    largest |S(f_n, P) - integral of f_n| over the m + 1 sampled partitions of
    that level.  A level is common for phi when all residuals are below
    eval(reg, phi).  ``integrals`` may carry precomputed engine results.
    """
    phis = tuple(phis) if phis is not None else tuple(default_phis(cfg.seed))
    n_set = tuple(n_set)
    values = {}
    for n in n_set:
        res = (integrals or {}).get(n)
        if res is None:
            res = hk_integrate(seq(n), I, tol, cfg)
        values[n] = res.value.array
    table = []
    for level in range(gauge_levels):
        row = []
        for n in n_set:
            f = seq(n)
            worst = np.zeros(seq.space.dim)
            for i in range(cfg.samples_per_level + 1):
                worst = np.maximum(worst, np.abs(level_sum(f, I, cfg, level, i) - values[n]))
            row.append(tuple(float(x) for x in worst))
        table.append(tuple(row))
    bounds = tuple(tuple(regulator_eval(reg, phi).coords) for phi in phis)
    common = []
    for b in bounds:
        found = None
        for level, row in enumerate(table):
            if all(np.all(np.asarray(r) < np.asarray(b)) for r in row):
                found = level
                break
        common.append(found)
    report = UniformityReport(
        n_set=n_set,
        levels=tuple(range(gauge_levels)),
        residuals=tuple(table),
        phi_bounds=bounds,
        common_levels=tuple(common),
        ok=all(c is not None for c in common),
    )
    if not report.ok and raise_on_failure:
        bad = [phi for phi, c in zip(phis, common) if c is None]
        raise UniformIntegrabilityError(
            f"no common gauge level below {gauge_levels} for {len(bad)} eval map(s), first {bad[0].to_json()}",
            report,
        )
    return report


# limit theorems


def _run(seq: FunctionSequence, I, ns, tol, cfg) -> dict:
    return {n: hk_integrate(seq(n), I, tol, cfg) for n in ns}


@dataclass(frozen=True)
class UctReport:
    witness: WcrsWitness
    uniformity: UniformityReport
    integrals: dict
    limit: IntegralResult
    eps: dict
    gaps: dict
    ok: bool

    def to_json(self) -> dict:
        return {
            "witness": self.witness.to_json(),
            "uniformity": self.uniformity.to_json(),
            "limit": self.limit.to_json(),
            "cases": [
                {
                    "n": n,
                    "integral": self.integrals[n].value.to_json(),
                    "spread": self.integrals[n].spread.to_json(),
                    "eps": list(self.eps[n]),
                    "gap": list(self.gaps[n]),
                }
                for n in sorted(self.integrals)
            ],
            "ok": self.ok,
        }


def uct_experiment(
    seq: FunctionSequence,
    I: TsInterval,
    tol=1e-6,
    *,
    reg: Regulator,
    n_schedule: Sequence[int] = tuple(2**k for k in range(11)),
    cfg: EngineConfig = EngineConfig(),
    n_max: int = 10_000,
    gauge_levels: int = 12,
    uniform_n: Optional[Sequence[int]] = None,
) -> UctReport:
    """Witness w.c.r.s. convergence and uniform integrability, then compare
    the integrals of f_n with the integral of the limit.

    eps_n is (b - a) times the tightest sampled regulator bound already valid
    at n (n >= p(t, phi) at every sampled t), or (b - a) times the sampled
    sup-distance when no sampled bound is valid yet.
    """
    width = I.b - I.a
    phis = default_phis(cfg.seed)
    pts = sample_points(I, [level_partition(I, cfg, 2, 0)])
    diffs = _differences(seq, pts, n_max)
    witness = wcrs_witness(seq, reg, pts, phis, n_max, diffs)
    ints = _run(seq, I, n_schedule, tol, cfg)
    limit = hk_integrate(seq.limit, I, tol, cfg)
    uni_n = tuple(uniform_n) if uniform_n is not None else tuple(n for n in n_schedule if n <= n_max)
    uniformity = uniform_integrability_check(
        seq, I, reg, uni_n, gauge_levels, cfg, phis, tol, integrals=ints
    )
    tol_arr = np.broadcast_to(np.asarray(tol, dtype=float), (seq.space.dim,))
    lim_pts = seq.limit.values(pts)
    eps, gaps = {}, {}
    ok = True
    for n in n_schedule:
        valid = [
            regulator_eval(reg, phi).array
            for phi, tab in zip(phis, witness.phi_tables)
            if n <= n_max and all(n >= p for p in tab.values())
        ]
        if valid:
            e = width * np.min(np.array(valid), axis=0)
        else:
            sup = np.max(np.abs(seq(n).values(pts) - lim_pts), axis=0)
            e = width * sup
        gap = np.abs(ints[n].value.array - limit.value.array)
        eps[n] = tuple(float(x) for x in e)
        gaps[n] = tuple(float(x) for x in gap)
        if np.any(gap > e + ints[n].spread.array + limit.spread.array + tol_arr):
            ok = False
    ok = ok and uniformity.ok and all(r.converged for r in ints.values()) and limit.converged
    return UctReport(witness, uniformity, ints, limit, eps, gaps, ok)


@dataclass(frozen=True)
class MctConfig:
    lower: LatticeElement
    upper: LatticeElement
    n_schedule: tuple = tuple(2**k for k in range(11))
    tol: object = 1e-6
    residual_levels: tuple = (0, 2, 4, 6)


@dataclass(frozen=True)
class MctReport:
    integrals: dict
    limit: IntegralResult
    nondecreasing: bool
    below_upper: bool
    limit_gap: tuple
    limit_ok: bool
    x: LatticeElement
    residuals_checked: int
    residual_violations: int
    fremlin: Regulator
    fremlin_violations: int
    ok: bool = field(default=False)

    def to_json(self) -> dict:
        return {
            "cases": [
                {"n": n, "integral": r.value.to_json(), "spread": r.spread.to_json()}
                for n, r in sorted(self.integrals.items())
            ],
            "limit": self.limit.to_json(),
            "nondecreasing": self.nondecreasing,
            "below_upper": self.below_upper,
            "limit_gap": list(self.limit_gap),
            "limit_ok": self.limit_ok,
            "x": self.x.to_json(),
            "residuals_checked": self.residuals_checked,
            "residual_violations": self.residual_violations,
            "fremlin_regulator": self.fremlin.to_json(),
            "fremlin_violations": self.fremlin_violations,
            "ok": self.ok,
        }


def check_monotone(seq: FunctionSequence, points, ns: Sequence[int]):
    """Spot-check f_n <= f_{n+1} and f_n <= f at the sampled points."""
    points = np.asarray(points, dtype=float)
    lim = seq.limit.values(points)
    checks = sorted(set(ns) | {n + 1 for n in ns})
    prev_n, prev = None, None
    for n in checks:
        cur = seq(n).values(points)
        if prev is not None and prev_n == n - 1:
            bad = np.any(prev > cur, axis=1)
            if np.any(bad):
                raise MonotonicityError(float(points[np.argmax(bad)]), prev_n)
        bad = np.any(cur > lim, axis=1)
        if np.any(bad):
            raise MonotonicityError(float(points[np.argmax(bad)]), n)
        prev_n, prev = n, cur


def mct_experiment(seq: FunctionSequence, I: TsInterval, mcfg: MctConfig, cfg: EngineConfig = EngineConfig()) -> MctReport:
    """Monotone convergence: integrals increase to the integral of the limit."""
    dim = seq.space.dim
    pts = sample_points(I, [level_partition(I, cfg, 2, 0)])
    check_monotone(seq, pts, mcfg.n_schedule)
    lo, hi = mcfg.lower.array, mcfg.upper.array
    first = seq(1).values(pts)
    if np.any(first < lo):
        raise ValueError("lower bound l exceeds f_1 at a sampled point")
    if np.any(seq.limit.values(pts) > hi):
        raise ValueError("upper bound L is below f at a sampled point")
    tol_arr = np.broadcast_to(np.asarray(mcfg.tol, dtype=float), (dim,))

    ints = _run(seq, I, mcfg.n_schedule, mcfg.tol, cfg)
    limit = hk_integrate(seq.limit, I, mcfg.tol, cfg)
    ns = sorted(ints)
    nondecreasing = all(
        np.all(ints[b].value.array >= ints[a].value.array - 2 * (ints[a].spread.array + ints[b].spread.array))
        for a, b in zip(ns, ns[1:])
    )
    width = I.b - I.a
    below = all(np.all(r.value.array <= hi * width + r.spread.array) for r in ints.values())
    gap = np.abs(ints[ns[-1]].value.array - limit.value.array)
    limit_ok = bool(np.all(gap <= tol_arr + ints[ns[-1]].spread.array + limit.spread.array))

    # the crude bound |S - integral| <= (b - a)(L - l) on sampled partitions
    x = LatticeElement.from_array(seq.space, width * (hi - lo))
    checked = violations = 0
    for n in ns:
        f = seq(n)
        for level in mcfg.residual_levels:
            for i in range(cfg.samples_per_level + 1):
                s = level_sum(f, I, cfg, level, i)
                checked += 1
                if np.any(np.abs(s - ints[n].value.array) > x.array):
                    violations += 1

    family = [ints[n].fitted_regulator for n in ns]
    c = fremlin_combine(family, x)
    fremlin_bad = sum(1 for phi in default_phis(cfg.seed) if not fremlin_check(family, x, c, phi)[2])

    ok = (
        nondecreasing
        and below
        and limit_ok
        and violations == 0
        and fremlin_bad == 0
        and limit.converged
        and all(r.converged for r in ints.values())
    )
    return MctReport(ints, limit, nondecreasing, below, tuple(float(v) for v in gap), limit_ok, x, checked, violations, c, fremlin_bad, ok)
