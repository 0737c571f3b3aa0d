"""Built-in integrands, sequences, regulators and time scales, addressable by name.

Every integrand entry carries its reference value on the standard problems
and a short tag saying where that value comes from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .convergence import FunctionSequence
from .exprlang import compile_expr
from .integrator import Integrand
from .riesz import Regulator, dyadic
from .timescale import TimeScale, TsInterval

HYBRID = TimeScale([(0.0, 1.0), 1.5, (2.0, 3.0)])
CONTINUUM = TimeScale([(0.0, 1.0)])
INTEGERS5 = TimeScale.uniform(0, 5, 1)

SHOWCASE_EXPR = "piecewise(t = 0, 0, 2*t*sin(t^(-2)) - (2/t)*cos(t^(-2)))"


@dataclass(frozen=True)
class CatalogIntegrand:
    name: str
    expr: str
    breakpoints: tuple = ()
    oracle_eligible: bool = True
    provenance: str = "quadrature oracle"

    def integrand(self) -> Integrand:
        f = compile_expr(self.expr)
        return Integrand(
            f.values,
            f.space,
            name=self.name,
            oracle_eligible=self.oracle_eligible,
            breakpoints=self.breakpoints,
        )


INTEGRANDS = {
    c.name: c
    for c in [
        CatalogIntegrand("one", "1", provenance="telescoping"),
        CatalogIntegrand("t", "t"),
        CatalogIntegrand("t2", "t^2"),
        CatalogIntegrand("sin", "sin(3*t)"),
        CatalogIntegrand("exp", "exp(-t)"),
        CatalogIntegrand("step", "piecewise(t < 0.5, 0, 1)", breakpoints=(0.5,)),
        CatalogIntegrand("vec", "[t, 1]"),
        CatalogIntegrand("vec-mixed", "[t^2, cos(t)]"),
        CatalogIntegrand(
            "hk-showcase",
            SHOWCASE_EXPR,
            oracle_eligible=False,
            provenance="fundamental theorem: t^2 sin(t^-2) at 1 minus its limit at 0",
        ),
    ]
}

SHOWCASE_VALUE = math.sin(1.0)

# integrands used for linearity and additivity sweeps (scalar, oracle eligible)
SCALAR_CASES = ("one", "t", "t2", "sin", "exp", "step")


def integrand(name: str) -> Integrand:
    try:
        return INTEGRANDS[name].integrand()
    except KeyError:
        raise KeyError(f"unknown catalog integrand {name!r}; known: {sorted(INTEGRANDS)}") from None


# sequences


def _vec(fn: Callable, name: str, **kw) -> Integrand:
    return Integrand(fn, name=name, **kw)


def linear_shrink() -> FunctionSequence:
    """f_n(t) = t (1 - 1/n), increasing to f(t) = t."""
    return FunctionSequence(
        lambda n: _vec(lambda ts, n=n: ts * (1.0 - 1.0 / n), f"t*(1-1/{n})"),
        _vec(lambda ts: ts, "t"),
        "linear-shrink",
    )


def offset() -> FunctionSequence:
    """f_n(t) = t + 1/n, decreasing to t; the gap is (b - a)/n."""
    return FunctionSequence(
        lambda n: _vec(lambda ts, n=n: ts + 1.0 / n, f"t+1/{n}"),
        _vec(lambda ts: ts, "t"),
        "offset",
    )


def constant_sequence() -> FunctionSequence:
    f = _vec(lambda ts: np.ones_like(ts), "1")
    return FunctionSequence(lambda n: f, f, "constant")


def mass_concentration() -> FunctionSequence:
    """f_n = n on (0, 1/n] and 0 elsewhere: pointwise to 0, every integral on
    [0, 1] equal to 1, not uniformly integrable."""

    def gen(n):
        return _vec(
            lambda ts, n=n: np.where((ts > 0) & (ts <= 1.0 / n), float(n), 0.0),
            f"mass{n}",
            breakpoints=(1.0 / n,),
        )

    return FunctionSequence(gen, _vec(lambda ts: np.zeros_like(ts), "0"), "mass-concentration-counterexample")


SEQUENCES = {
    "linear-shrink": linear_shrink,
    "offset": offset,
    "constant": constant_sequence,
    "mass-concentration-counterexample": mass_concentration,
}


def sequence(name: str) -> FunctionSequence:
    try:
        return SEQUENCES[name]()
    except KeyError:
        raise KeyError(f"unknown catalog sequence {name!r}; known: {sorted(SEQUENCES)}") from None


# regulators

REGULATORS = {
    "geometric": Regulator.from_values([1.0], 0.5),
    "two-row": Regulator.from_values([1.0, 3.0], 0.5),
    "shifted": Regulator.from_values([2.0], 0.5, shift=3),
    "quarter": Regulator.from_values([5.0, 1.0, 0.5], 0.25),
    "vector": Regulator.from_values([[1.0, 2.0]], 0.5),
    "vector-two-row": Regulator.from_values([[1.0, 0.0], [0.5, 4.0]], 0.5, shift=1),
}


# time scales

SCALES = {
    "continuum": CONTINUUM,
    "hybrid": HYBRID,
    "integers5": INTEGERS5,
    "qscale": TimeScale.qscale(0.5, 1.0, 10),
    "cantor3": TimeScale.cantor(3),
}


def random_scale(rng: np.random.Generator, max_parts: int = 5) -> TimeScale:
    """A random finite union of closed intervals and points in [0, 10].

    Coordinates are multiples of 2**-20 so differences are exact in binary.
    """
    k = int(rng.integers(1, max_parts + 1))
    cuts = np.sort(rng.choice(np.arange(1, 2 * k * 8), size=2 * k, replace=False)) * (10.0 / (16 * k))
    comps = []
    for i in range(k):
        lo, hi = dyadic(float(cuts[2 * i])), dyadic(float(cuts[2 * i + 1]))
        if rng.random() < 0.35 or hi <= lo:
            comps.append(lo)
        else:
            comps.append((lo, hi))
    return TimeScale(comps)


def random_interval(rng: np.random.Generator, scale: TimeScale) -> TsInterval:
    """A random [a, b]_T with a < b, endpoints taken from the structure."""
    cands = []
    for lo, hi in scale.components:
        cands.append(lo)
        if hi > lo:
            cands.append(hi)
            cands.append(dyadic(lo + (hi - lo) * float(rng.uniform(0.1, 0.9))))
    cands = sorted(set(cands))
    if len(cands) < 2:
        raise ValueError("time scale has a single point")
    i, j = sorted(rng.choice(len(cands), size=2, replace=False))
    return TsInterval(scale, cands[i], cands[j])


def random_scale_interval(rng: np.random.Generator, max_parts: int = 5) -> TsInterval:
    while True:
        T = random_scale(rng, max_parts)
        if len(T.components) > 1 or T.min < T.max:
            return random_interval(rng, T)

