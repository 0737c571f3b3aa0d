import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hkts import catalog
from hkts.convergence import (
    FunctionSequence,
    MctConfig,
    check_monotone,
    default_phis,
    mct_experiment,
    sample_points,
    uct_experiment,
    uniform_integrability_check,
    wcrs_witness,
)
from hkts.errors import MonotonicityError, UniformIntegrabilityError, WitnessNotFound
from hkts.integrator import EngineConfig, Integrand
from hkts.riesz import EvalMap, LatticeElement, LatticeSpace, Regulator, regulator_eval

UNIT = catalog.CONTINUUM.full_interval()
H = catalog.HYBRID.full_interval()
CFG = EngineConfig(seed=11)
REG1 = Regulator.from_values([1.0])


def test_witness_examples():
    w = wcrs_witness(catalog.linear_shrink(), REG1, [0.0, 1.0], [EvalMap.constant(3)], n_max=100)
    assert w.p(1.0) == 9
    assert w.p(0.0) == 1


def test_witness_constant_sequence():
    w = wcrs_witness(catalog.constant_sequence(), Regulator.from_values([1e-9]), [0.0, 0.5, 1.0], default_phis(), 50)
    assert set(w.p_table.values()) == {1}


def test_witness_not_found():
    with pytest.raises(WitnessNotFound):
        wcrs_witness(catalog.linear_shrink(), REG1, [1.0], [EvalMap.constant(3)], n_max=5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 4.0), st.lists(st.integers(1, 6), max_size=4), st.integers(1, 6))
def test_witness_invariant(u, vals, tail):
    seq = catalog.linear_shrink()
    pts = np.linspace(0.0, 1.0, 9)
    reg = Regulator.from_values([u])
    phi = EvalMap(tuple(vals), tail)
    try:
        w = wcrs_witness(seq, reg, pts, [phi], n_max=300)
    except WitnessNotFound:
        return
    bound = regulator_eval(reg, phi).coords[0]
    for t in pts:
        p = w.p(t)
        for n in range(p, 301):
            assert abs(seq(n)(t).coords[0] - t) < bound
        if p > 1:
            assert not abs(seq(p - 1)(t).coords[0] - t) < bound


def test_sample_points_cover_structure():
    pts = sample_points(H)
    assert {0.0, 1.0, 1.5, 3.0} <= set(pts.tolist())
    assert all(p in H for p in pts)


def test_sequence_space_checked():
    bad = FunctionSequence(lambda n: Integrand.constant([1.0, 2.0], LatticeSpace.vector(2)), Integrand.constant(1.0))
    with pytest.raises(ValueError):
        bad(1)
    with pytest.raises(ValueError):
        catalog.linear_shrink()(0)


def test_uniformity_linear_shrink():
    rep = uniform_integrability_check(catalog.linear_shrink(), UNIT, REG1, (1, 2, 4, 8, 16), 8, CFG, tol=1e-4)
    assert rep.ok
    # at a fixed level the residual of f_n is about (1 - 1/n) times that of f,
    # up to the engine tolerance on the reference integrals
    row = [r[0] for r in rep.max_residual_per_n(3)]
    assert row[0] == 0.0
    assert all(b >= a - 2e-4 for a, b in zip(row, row[1:]))


def test_uniformity_constant_sequence_zero():
    rep = uniform_integrability_check(catalog.constant_sequence(), H, REG1, (1, 2, 3), 4, CFG, tol=1e-6)
    assert all(r == (0.0,) for row in rep.residuals for r in row)


def test_mass_concentration_fails():
    seq = catalog.mass_concentration()
    with pytest.raises(UniformIntegrabilityError) as e:
        uniform_integrability_check(seq, UNIT, REG1, (1, 4, 16, 64, 256), 6, CFG, tol=1e-2)
    assert not e.value.report.ok


def test_uct_examples():
    rep = uct_experiment(
        catalog.offset(), UNIT, 1e-5, reg=Regulator.from_values([2.0]),
        n_schedule=(1, 2, 4, 8), cfg=CFG, n_max=256, gauge_levels=8,
    )
    assert rep.ok
    for n in (1, 2, 4, 8):
        assert rep.gaps[n][0] == pytest.approx(1.0 / n, abs=2e-5)
    rep = uct_experiment(
        catalog.constant_sequence(), H, 1e-6, reg=REG1, n_schedule=(1, 2), cfg=CFG, n_max=8, gauge_levels=2,
    )
    assert rep.ok and rep.gaps[2] == (0.0,)


def test_uct_linear_shrink_hybrid():
    rep = uct_experiment(
        catalog.linear_shrink(), H, 1e-5, reg=Regulator.from_values([4.0]),
        n_schedule=(1, 4, 16), cfg=CFG, n_max=256, gauge_levels=10,
    )
    assert rep.ok
    for n in (1, 4, 16):
        assert rep.integrals[n].value.coords[0] == pytest.approx(4.25 * (1 - 1 / n), abs=1e-5)


def test_mct_example():
    mcfg = MctConfig(LatticeElement.of(0.0), LatticeElement.of(1.0), (1, 2, 4, 8, 16), 1e-5, (0, 2))
    rep = mct_experiment(catalog.linear_shrink(), UNIT, mcfg, CFG)
    assert rep.nondecreasing and rep.below_upper and rep.residual_violations == 0
    assert rep.x == LatticeElement.of(1.0)
    for n, r in rep.integrals.items():
        assert r.value.coords[0] == pytest.approx(0.5 * (1 - 1 / n), abs=1e-5)
    assert rep.fremlin_violations == 0


def test_mct_rejects_decreasing():
    with pytest.raises(MonotonicityError):
        check_monotone(catalog.offset(), [0.25, 0.5], (1, 2, 3))


def test_mct_rejects_bad_bounds():
    mcfg = MctConfig(LatticeElement.of(0.5), LatticeElement.of(1.0), (1, 2), 1e-4)
    with pytest.raises(ValueError):
        mct_experiment(catalog.linear_shrink(), UNIT, mcfg, CFG)
