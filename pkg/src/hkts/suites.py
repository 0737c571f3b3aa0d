"""Theorem checks over the built-in catalog, as run by ``hkts verify``."""

from __future__ import annotations

import numpy as np

from . import catalog
from .convergence import MctConfig, mct_experiment, uct_experiment
from .gauge import TaggedPartition
from .integrator import (
    EngineConfig,
    check_linearity,
    hk_integrate,
    level_partition,
    oracle_integrate,
    saks_henstock_residual,
    split_integrate,
)
from .riesz import (
    EvalMap,
    LatticeElement,
    Regulator,
    combination_violations,
    fremlin_check,
    fremlin_combine,
    regulator_eval,
    row_is_o_sequence,
    sigma_distributivity_check,
)

SUITES = ("linearity", "additivity", "saks-henstock", "uct", "mct", "riesz")
TOL = 1e-4


def _case(name: str, ok: bool, **detail) -> dict:
    return {"case": name, "ok": bool(ok), **detail}


def linearity(seed: int = 0) -> list:
    cfg = EngineConfig(seed=seed)
    cases = [
        ("continuum", "t", "one", 2.0, 3.0),
        ("continuum", "t2", "sin", 1.0, -1.0),
        ("hybrid", "exp", "step", 0.5, 2.0),
        ("hybrid", "t", "t", 1.0, -1.0),
        ("hybrid", "sin", "one", 0.0, 0.0),
        ("integers5", "t2", "t", -1.5, 4.0),
        ("qscale", "exp", "t2", 3.0, 0.25),
        ("continuum", "vec", "vec-mixed", 1.0, 2.0),
    ]
    out = []
    for scale, fn, gn, a, b in cases:
        I = catalog.SCALES[scale].full_interval()
        f, g = catalog.integrand(fn), catalog.integrand(gn)
        rep = check_linearity(f, g, a, b, I, TOL, cfg)
        oracle = oracle_integrate(f, I) * a + oracle_integrate(g, I) * b
        oracle_gap = abs(rep.integral_combo.value - oracle)
        oracle_ok = oracle_gap <= rep.integral_combo.spread + LatticeElement.from_array(f.space, np.full(f.space.dim, 1e-9))
        out.append(
            _case(
                f"{a}*{fn} + {b}*{gn} on {scale}",
                rep.ok and oracle_ok,
                defect=rep.defect.to_json(),
                bound=rep.bound.to_json(),
                oracle_gap=oracle_gap.to_json(),
            )
        )
    return out


def additivity(seed: int = 0) -> list:
    cfg = EngineConfig(seed=seed)
    cases = [
        ("hybrid", "t", 1.5),
        ("hybrid", "t", 1.0),
        ("hybrid", "t2", 0.5),
        ("hybrid", "one", 2.0),
        ("continuum", "sin", 0.25),
        ("integers5", "t2", 2.0),
        ("qscale", "t", 0.125),
    ]
    out = []
    for scale, fn, c in cases:
        I = catalog.SCALES[scale].full_interval()
        rep = split_integrate(catalog.integrand(fn), I, c, TOL, cfg)
        out.append(
            _case(
                f"{fn} on {scale} split at {c}",
                rep.ok,
                defect=rep.defect.to_json(),
                bound=rep.bound.to_json(),
                stitched_fine=rep.stitched_fine,
                stitched_split=rep.stitched_split,
            )
        )
    return out


def saks_henstock(seed: int = 0, selections: int = 12, tol: float = 2e-2) -> list:
    """Residuals of random sub-selections of converged partitions against the
    fitted regulator at phi = 1."""
    cfg = EngineConfig(seed=seed)
    rng = np.random.default_rng((seed, 0x5A45))
    out = []
    for scale, fn in [("continuum", "t"), ("hybrid", "t"), ("continuum", "step")]:
        I = catalog.SCALES[scale].full_interval()
        f = catalog.integrand(fn)
        rep = saks_henstock_sweep(f, I, tol, cfg, rng, selections)
        out.append(_case(f"{fn} on {scale}", rep["ok"], **{k: v for k, v in rep.items() if k != "ok"}))
    return out


def saks_henstock_sweep(f, I, tol, cfg: EngineConfig, rng, selections: int, sources=None) -> dict:
    """Integrate f, then test random partial selections of the converged
    level's partitions.

    Piece integrals are shared through a cache that is primed with the full
    partition (the tightest per-piece tolerance), so every later selection
    reuses them.
    """
    res = hk_integrate(f, I, tol, cfg)
    bound = regulator_eval(res.fitted_regulator, EvalMap.constant(1))
    m = cfg.samples_per_level
    sources = sources if sources is not None else (0, m)
    piece_tol = 0.1 * res.spread.norm() + 1e-12
    parts = {}
    caches = {}
    full_residuals = []
    for i in sources:
        P = level_partition(I, cfg, res.level, i)
        parts[i] = P
        caches[i] = {}
        full_residuals.append(saks_henstock_residual(f, I, P, piece_tol, cfg, caches[i]).norm())
    worst = 0.0
    bad = 0
    for k in range(selections):
        i = sources[k % len(sources)]
        sub = partial_selection(parts[i], rng)
        # the per-piece tolerance is fixed by the full partition
        r = saks_henstock_residual(f, I, sub, piece_tol * len(sub) / len(parts[i]), cfg, caches[i])
        worst = max(worst, r.norm())
        if not r <= bound:
            bad += 1
    return {
        "ok": res.converged and bad == 0,
        "level": res.level,
        "spread": res.spread.to_json(),
        "selections": selections,
        "violations": bad,
        "worst_residual": worst,
        "full_partition_residuals": full_residuals,
        "bound": bound.to_json(),
    }


def partial_selection(P: TaggedPartition, rng: np.random.Generator) -> TaggedPartition:
    """A random nonempty subset of the items of P."""
    keep = rng.random(len(P)) < rng.uniform(0.1, 0.9)
    if not keep.any():
        keep[rng.integers(len(P))] = True
    return P.subset(np.flatnonzero(keep))


def uct(seed: int = 0) -> list:
    cfg = EngineConfig(seed=seed)
    out = []
    hybrid = catalog.HYBRID.full_interval()
    cont = catalog.CONTINUUM.full_interval()
    runs = [
        ("linear-shrink on hybrid", catalog.linear_shrink(), hybrid, [4.0]),
        ("offset on continuum", catalog.offset(), cont, [2.0]),
        ("constant on hybrid", catalog.constant_sequence(), hybrid, [1.0]),
    ]
    for name, seq, I, rows in runs:
        rep = uct_experiment(
            seq, I, TOL, reg=Regulator.from_values(rows), n_schedule=tuple(2**k for k in range(8)),
            cfg=cfg, n_max=2000, gauge_levels=10,
        )
        last = max(rep.gaps)
        out.append(_case(name, rep.ok, final_gap=list(rep.gaps[last]), final_eps=list(rep.eps[last])))
    return out


def mct(seed: int = 0) -> list:
    cfg = EngineConfig(seed=seed)
    I = catalog.CONTINUUM.full_interval()
    out = []
    for name, seq in [("linear-shrink", catalog.linear_shrink()), ("constant", catalog.constant_sequence())]:
        mcfg = MctConfig(LatticeElement.of(0.0), LatticeElement.of(1.0), tuple(2**k for k in range(18)), 1e-5)
        rep = mct_experiment(seq, I, mcfg, cfg)
        out.append(
            _case(
                name,
                rep.ok,
                limit_gap=list(rep.limit_gap),
                residual_violations=rep.residual_violations,
                fremlin_violations=rep.fremlin_violations,
            )
        )
    return out


def riesz(seed: int = 0, fremlin_samples: int = 200) -> list:
    rng = np.random.default_rng((seed, 0x7153))
    regs = catalog.REGULATORS
    out = []
    pairs = [("geometric", "two-row"), ("shifted", "quarter"), ("vector", "vector-two-row"), ("geometric", "shifted")]
    for a, b in pairs:
        rs = [regs[a], regs[b]]
        if rs[0].base != rs[1].base:
            continue
        bad = combination_violations(rs)
        out.append(_case(f"combination {a} + {b}", not bad, violations=len(bad)))
    for name, r in regs.items():
        rep = sigma_distributivity_check(r, 60)
        small = rep.infimum_proxy.norm() <= 1e-15 * max(u.norm() for u in r.rows)
        out.append(_case(f"sigma proxy {name}", rep.decreasing and small and row_is_o_sequence(r), depth=60))
    family = [regs["geometric"], regs["two-row"], regs["shifted"]]
    bad = 0
    for _ in range(fremlin_samples):
        x = LatticeElement.of(float(rng.uniform(0.0, 5.0)))
        phi = random_eval_map(rng)
        c = fremlin_combine(family, x)
        if not fremlin_check(family, x, c, phi)[2]:
            bad += 1
    out.append(_case("fremlin scalar family", bad == 0, samples=fremlin_samples, violations=bad))
    return out


def random_eval_map(rng: np.random.Generator, width: int = 6, top: int = 12) -> EvalMap:
    vals = rng.integers(1, top + 1, size=int(rng.integers(0, width + 1)))
    return EvalMap(tuple(int(v) for v in vals), int(rng.integers(1, top + 1)))


RUNNERS = {
    "linearity": linearity,
    "additivity": additivity,
    "saks-henstock": saks_henstock,
    "uct": uct,
    "mct": mct,
    "riesz": riesz,
}


def run_suite(name: str, seed: int = 0) -> dict:
    names = SUITES if name == "all" else (name,)
    for n in names:
        if n not in RUNNERS:
            raise KeyError(f"unknown suite {n!r}; choose from {', '.join(SUITES + ('all',))}")
    cases = []
    for n in names:
        for c in RUNNERS[n](seed):
            cases.append({"suite": n, **c})
    failed = sum(1 for c in cases if not c["ok"])
    return {"suite": name, "seed": seed, "cases": cases, "passed": len(cases) - failed, "failed": failed, "ok": failed == 0}

