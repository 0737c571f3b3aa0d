import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hkts import catalog
from hkts.errors import IntegrityError, InvalidInterval, NotInTimeScale, NotOracleEligible
from hkts.gauge import DeltaGauge, TaggedPartition, random_fine_partition
from hkts.integrator import (
    EngineConfig,
    Integrand,
    check_linearity,
    hk_integrate,
    level_partition,
    level_statistics,
    level_sum,
    oracle_integrate,
    riemann_sum,
    saks_henstock_residual,
    split_integrate,
)
from hkts.riesz import LatticeElement, LatticeSpace
from hkts.timescale import TimeScale

H = catalog.HYBRID.full_interval()
UNIT = catalog.CONTINUUM.full_interval()
CFG = EngineConfig(seed=7)

intervals = st.integers(0, 2**32 - 1).map(lambda s: catalog.random_scale_interval(np.random.default_rng(s)))


def t_fn():
    return catalog.integrand("t")


def test_riemann_sum_examples():
    P = random_fine_partition(H, DeltaGauge.constant(H, 0.1), 0)
    assert riemann_sum(Integrand.constant(1.0), P) == LatticeElement.of(3.0)
    D = TimeScale([0.0, 1.0, 2.0]).full_interval()
    P = TaggedPartition.from_items(D, [(0, 1, 0), (1, 2, 1)])
    assert riemann_sum(catalog.integrand("t2"), P) == LatticeElement.of(1.0)
    P = TaggedPartition.from_items(UNIT, [(0, 0.5, 0.5), (0.5, 1, 1)])
    assert riemann_sum(t_fn(), P) == LatticeElement.of(0.75)


def test_engine_examples():
    r = hk_integrate(t_fn(), UNIT, 1e-6, CFG)
    assert r.converged and abs(r.value.coords[0] - 0.5) <= 1e-6
    r = hk_integrate(catalog.integrand("t2"), catalog.INTEGERS5.full_interval(), 1e-12, CFG)
    assert r.value == LatticeElement.of(30.0) and r.level == 0


def test_vector_constant_exact():
    f = Integrand.constant([2.0, -0.5], LatticeSpace.vector(2))
    r = hk_integrate(f, H, 1e-12, CFG)
    assert r.level == 0 and r.value == LatticeElement.of(6.0, -1.5)
    assert r.spread == LatticeElement.of(0.0, 0.0)


def test_fitted_regulator_shape():
    r = hk_integrate(t_fn(), UNIT, 1e-4, CFG)
    assert r.fitted_regulator.base == 0.5
    assert r.fitted_regulator.rows == (r.spread * 2.0,)
    js = r.to_json()
    assert set(js) >= {"value", "spread", "converged", "levels", "partitions", "regulator"}


def test_non_convergence_is_reported():
    r = hk_integrate(t_fn(), UNIT, 1e-9, EngineConfig(max_levels=2))
    assert not r.converged and r.reason == "max_levels" and r.level == 1
    assert r.partitions_evaluated == 2 + 9
    r = hk_integrate(t_fn(), UNIT, 1e-12, EngineConfig(max_items=1000))
    assert not r.converged and r.reason == "item budget"


def test_impure_integrand_rejected():
    rng = np.random.default_rng(0)
    f = Integrand(lambda ts: rng.random(len(ts)))
    with pytest.raises(IntegrityError):
        hk_integrate(f, UNIT, 1e-3, CFG)


def test_domain_checked():
    f = t_fn().with_domain(TimeScale([(0.0, 0.5)]))
    with pytest.raises(NotInTimeScale):
        hk_integrate(f, UNIT, 1e-3, CFG)


def test_bad_interval():
    with pytest.raises(InvalidInterval):
        hk_integrate(t_fn(), (0.0, 1.0), 1e-3, CFG)


def test_oracle():
    assert oracle_integrate(t_fn(), H).coords[0] == pytest.approx(4.25, abs=1e-12)
    assert oracle_integrate(Integrand.constant(1.0), H) == LatticeElement.of(3.0)
    assert oracle_integrate(catalog.integrand("t2"), catalog.INTEGERS5.full_interval()) == LatticeElement.of(30.0)
    with pytest.raises(NotOracleEligible):
        oracle_integrate(catalog.integrand("hk-showcase"), UNIT)


CASES = [(s, f) for s in ("continuum", "hybrid", "qscale", "cantor3") for f in catalog.SCALAR_CASES]


@pytest.mark.parametrize("scale,name", CASES)
def test_oracle_equivalence(scale, name):
    I = catalog.SCALES[scale].full_interval()
    f = catalog.integrand(name)
    r = hk_integrate(f, I, 1e-4, CFG)
    assert r.converged
    assert np.all(r.spread.array <= 1e-4)
    assert abs(r.value - oracle_integrate(f, I)) <= r.spread + LatticeElement.of(1e-9)


def test_uniqueness_across_seeds():
    for name in ("t", "sin", "step"):
        f = catalog.integrand(name)
        r1 = hk_integrate(f, H, 1e-4, EngineConfig(seed=1))
        r2 = hk_integrate(f, H, 1e-4, EngineConfig(seed=2))
        assert abs(r1.value - r2.value) <= r1.spread + r2.spread


def test_thread_count_does_not_change_result():
    f = catalog.integrand("exp")
    a = hk_integrate(f, H, 1e-5, EngineConfig(seed=3, workers=1))
    b = hk_integrate(f, H, 1e-5, EngineConfig(seed=3, workers=3))
    assert a.to_json() == b.to_json()


def test_spread_monotone_in_level():
    # all-left and all-right sweeps bracket the sums of a monotone integrand
    for scale, name in itertools.product(("continuum", "hybrid"), ("t", "t2", "exp")):
        I = catalog.SCALES[scale].full_interval()
        f = catalog.integrand(name)
        spreads = [level_statistics(f, I, CFG, k)[1] for k in range(7)]
        for a, b in zip(spreads, spreads[1:]):
            assert np.all(b <= a + 1e-12), (scale, name)


def test_spread_trend_for_oscillating_and_step():
    # sampled spreads of non-monotone integrands may tick up by one level
    # (sin(3t) on [0, 1], levels 2 -> 3), but never across two
    for scale, name in itertools.product(("continuum", "hybrid"), ("sin", "step")):
        I = catalog.SCALES[scale].full_interval()
        f = catalog.integrand(name)
        spreads = [level_statistics(f, I, CFG, k)[1] for k in range(8)]
        for a, b in zip(spreads, spreads[2:]):
            assert np.all(b <= a + 1e-12), (scale, name)


def test_vector_decomposition():
    f = catalog.integrand("vec-mixed")
    r = hk_integrate(f, H, 1e-4, CFG)
    for k in range(2):
        rk = hk_integrate(f.component(k), H, 1e-4, CFG)
        assert abs(r.value.coords[k] - rk.value.coords[0]) <= r.spread.coords[k] + rk.spread.coords[0]


def test_level_sum_matches_materialised_partition():
    f = catalog.integrand("sin")
    for level, index in [(0, 0), (3, 2), (5, 8)]:
        P = level_partition(H, CFG, level, index)
        assert np.allclose(level_sum(f, H, CFG, level, index), riemann_sum(f, P).array, rtol=0, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(intervals, st.integers(0, 8), st.integers(0, 6))
def test_telescoping(I, index, level):
    P = level_partition(I, CFG, level, index)
    assert P.is_full
    assert riemann_sum(Integrand.constant(1.0), P).coords[0] == I.b - I.a


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 1000))
def test_forced_sum_collapse(n, seed):
    D = TimeScale.uniform(0, n, 1).full_interval()
    f = catalog.integrand("exp")
    forced = sum(np.exp(-k) for k in range(n))
    g = DeltaGauge.constant(D, 0.3)
    P = random_fine_partition(D, g, seed)
    assert riemann_sum(f, P).coords[0] == pytest.approx(forced, abs=1e-14)


def test_linearity_examples():
    f, one = t_fn(), Integrand.constant(1.0)
    rep = check_linearity(f, one, 2.0, 3.0, UNIT, 1e-6, CFG)
    assert rep.ok
    assert abs(rep.integral_combo.value.coords[0] - 4.0) <= 1e-6
    rep = check_linearity(f, one, 0.0, 0.0, UNIT, 1e-6, CFG)
    assert rep.integral_combo.value == LatticeElement.of(0.0)
    rep = check_linearity(f, f, 1.0, -1.0, UNIT, 1e-6, CFG)
    assert rep.defect == LatticeElement.of(0.0)


def test_split_examples():
    rep = split_integrate(t_fn(), H, 1.5, 1e-5, CFG)
    assert rep.ok
    assert rep.left.value.coords[0] == pytest.approx(1.0, abs=1e-5)
    assert rep.right.value.coords[0] == pytest.approx(3.25, abs=1e-5)
    rep = split_integrate(t_fn(), H, 2.0, 1e-5, CFG)
    assert rep.ok and rep.stitched_split
    rep = split_integrate(Integrand.constant(1.0), H, 0.5, 1e-12, CFG)
    assert rep.left.value == LatticeElement.of(0.5) and rep.right.value == LatticeElement.of(2.5)
    with pytest.raises(InvalidInterval):
        split_integrate(t_fn(), H, 1.2, 1e-5, CFG)


def test_saks_henstock_examples():
    one = TaggedPartition.from_items(UNIT, [(0.0, 0.5, 0.0)])
    r = saks_henstock_residual(t_fn(), UNIT, one, 1e-6, CFG)
    assert r.coords[0] == pytest.approx(0.125, abs=1e-6)
    empty = TaggedPartition.from_items(UNIT, [])
    assert saks_henstock_residual(t_fn(), UNIT, empty, 1e-6, CFG) == LatticeElement.of(0.0)


def test_saks_henstock_full_partition_within_spread():
    f = t_fn()
    res = hk_integrate(f, H, 1e-2, CFG)
    P = level_partition(H, CFG, res.level, 3)
    r = saks_henstock_residual(f, H, P, 1e-3, CFG)
    assert r <= res.spread + LatticeElement.of(1e-3)
