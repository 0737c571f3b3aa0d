import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hkts import catalog
from hkts.errors import InvalidGauge, InvalidInterval
from hkts.gauge import (
    DeltaGauge,
    TaggedPartition,
    cousin_partition,
    fineness_certificate,
    gauge_min,
    is_fine,
    random_fine_partition,
    splits_at,
    stitch_gauges,
    stream_partition,
)
from hkts.timescale import TimeScale

UNIT = TimeScale([(0.0, 1.0)]).full_interval()
DISCRETE = TimeScale([0.0, 1.0, 2.0]).full_interval()

intervals = st.integers(0, 2**32 - 1).map(lambda s: catalog.random_scale_interval(np.random.default_rng(s)))


@st.composite
def interval_and_gauge(draw):
    I = draw(intervals)
    w = I.b - I.a
    dL = draw(st.floats(0.005, 0.8)) * w
    dR = draw(st.floats(0.005, 0.8)) * w
    return I, DeltaGauge.constant(I, dL, dR)


def test_fine_examples():
    P = TaggedPartition.from_items(UNIT, [(0, 0.5, 0), (0.5, 1, 1)])
    assert is_fine(P, DeltaGauge.constant(UNIT, 0.6))
    assert not is_fine(P, DeltaGauge.constant(UNIT, 0.5))


def test_sigma_clause_on_discrete_scale():
    g = DeltaGauge.from_callables(DISCRETE, lambda x: 0.1, lambda x: 1.0)
    P = TaggedPartition.from_items(DISCRETE, [(0, 1, 0), (1, 2, 1)])
    assert is_fine(P, g)
    assert fineness_certificate(P, g)["sigma_clause_items"] == 2
    assert cousin_partition(DISCRETE, g) == P


def test_cousin_unit_example():
    g = DeltaGauge.constant(UNIT, 0.3)
    P = cousin_partition(UNIT, g)
    assert len(P) == 7
    assert np.allclose(P.lengths[:-1], 0.15)
    assert P.lengths[-1] <= 0.15
    assert P.is_full and is_fine(P, g)
    assert np.array_equal(P.tag, P.left)


def test_random_partition_examples():
    g = DeltaGauge.constant(UNIT, 0.3)
    P = random_fine_partition(UNIT, g, 1)
    assert P.is_full and is_fine(P, g)
    assert P == random_fine_partition(UNIT, g, 1)
    gd = DeltaGauge.constant(DISCRETE, 0.5)
    assert random_fine_partition(DISCRETE, gd, 1) == random_fine_partition(DISCRETE, gd, 99) == cousin_partition(DISCRETE, gd)


def test_stream_matches_materialised():
    g = DeltaGauge.constant(catalog.HYBRID.full_interval(), 0.01)
    I = g.interval
    chunks = []
    stream_partition(I, g, lambda l, r, t: chunks.append((l.copy(), r.copy(), t.copy())), seed=5)
    P = random_fine_partition(I, g, 5)
    assert np.array_equal(np.concatenate([c[0] for c in chunks]), P.left)
    assert np.array_equal(np.concatenate([c[2] for c in chunks]), P.tag)


def test_invalid_gauges():
    with pytest.raises(InvalidGauge):
        DeltaGauge.constant(UNIT, 0.0, 0.3)
    g = DeltaGauge.from_callables(UNIT, lambda x: 0.3, lambda x: 0.3 if x < 0.2 else 0.0)
    with pytest.raises(InvalidGauge):
        cousin_partition(UNIT, g)


def test_clamp_keeps_dr_above_mu():
    g = DeltaGauge.constant(DISCRETE, 0.1)
    assert g.dr(0.0) == 1.0 and g.dr(1.0) == 1.0


def test_gauge_min_examples():
    g = gauge_min(DeltaGauge.constant(UNIT, 0.3), DeltaGauge.constant(UNIT, 0.5))
    assert g.dl(0.5) == 0.3 and g.dr(0.5) == 0.3
    h = DeltaGauge.constant(UNIT, 0.4)
    assert gauge_min(h, h).dl(0.2) == 0.4
    d = gauge_min(DeltaGauge.constant(DISCRETE, 0.1), DeltaGauge.constant(DISCRETE, 0.2))
    assert d.dr(1.0) == 1.0


def test_stitch_examples():
    T = TimeScale([(0.0, 3.0)])
    g = stitch_gauges(DeltaGauge.constant(T.interval(0.0, 1.5), 0.4), DeltaGauge.constant(T.interval(1.5, 3.0), 0.4))
    assert g.dl(2.0) == pytest.approx(0.25)
    H = catalog.HYBRID
    g = stitch_gauges(DeltaGauge.constant(H.interval(0.0, 1.5), 0.4), DeltaGauge.constant(H.interval(1.5, 3.0), 0.4))
    assert g.dl(1.5) == pytest.approx(0.25)


def test_stitch_rejects_gap():
    H = catalog.HYBRID
    with pytest.raises(InvalidInterval):
        stitch_gauges(DeltaGauge.constant(H.interval(0.0, 1.0), 0.4), DeltaGauge.constant(H.interval(1.5, 3.0), 0.4))


def test_partition_json_roundtrip():
    P = random_fine_partition(catalog.HYBRID.full_interval(), DeltaGauge.constant(catalog.HYBRID.full_interval(), 0.2), 3)
    obj = P.to_json()
    assert obj["full"]
    assert TaggedPartition.from_json(P.interval, obj) == P


def test_classify():
    assert TaggedPartition.from_items(UNIT, [(0, 0.5, 0)]).classify() == "partial"
    assert TaggedPartition.from_items(UNIT, [(0, 0.6, 0), (0.5, 1, 1)]).classify() == "invalid"
    assert TaggedPartition.from_items(UNIT, [(0, 0.5, 0), (0.5, 1, 1)]).classify() == "full"


@settings(max_examples=150, deadline=None)
@given(interval_and_gauge(), st.integers(0, 1000))
def test_generated_partitions_are_full_and_fine(ig, seed):
    I, g = ig
    for P in (cousin_partition(I, g), random_fine_partition(I, g, seed)):
        assert P.is_full and is_fine(P, g)
        # right-scattered tags never reach past sigma
        sig = I.scale.sigma_array(P.tag)
        scattered = sig > P.tag
        assert np.all(P.right[scattered] <= sig[scattered])


@settings(max_examples=100, deadline=None)
@given(interval_and_gauge(), st.floats(1.0, 3.0), st.integers(0, 1000))
def test_refinement_monotone(ig, factor, seed):
    I, g1 = ig
    s = g1.spec
    g2 = DeltaGauge.constant(I, s["dL"] * factor, s["dR"] * factor)
    P = random_fine_partition(I, g1, seed)
    assert is_fine(P, g2)


@settings(max_examples=100, deadline=None)
@given(interval_and_gauge(), interval_and_gauge(), st.integers(0, 1000))
def test_gauge_min_fine_implies_both(ig1, ig2, seed):
    I, g1 = ig1
    s = ig2[1].spec
    w = (I.b - I.a) / (ig2[0].b - ig2[0].a)
    g2 = DeltaGauge.constant(I, s["dL"] * w, s["dR"] * w)
    P = random_fine_partition(I, gauge_min(g1, g2), seed)
    assert is_fine(P, g1) and is_fine(P, g2)


@settings(max_examples=60, deadline=None)
@given(intervals, st.data())
def test_stitched_gauge_splits(I, data):
    inner = [lo for lo, hi in I.scale.components if I.a < lo < I.b]
    inner += [0.5 * (lo + hi) for lo, hi in I.scale.components if lo < hi and I.a < 0.5 * (lo + hi) < I.b]
    if not inner:
        return
    c = data.draw(st.sampled_from(sorted(inner)))
    h = data.draw(st.floats(0.01, 1.0)) * (I.b - I.a)
    g = stitch_gauges(DeltaGauge.constant(I.sub(I.a, c), h), DeltaGauge.constant(I.sub(c, I.b), h))
    probe = np.array([x for lo, hi in I.scale.components for x in (lo, hi) if I.a <= x < I.b])
    assert np.all(g.dr(probe) >= I.scale.mu_array(probe))
    seed = data.draw(st.integers(0, 1000))
    for P in (cousin_partition(I, g), random_fine_partition(I, g, seed)):
        assert P.is_full and is_fine(P, g) and splits_at(P, c)
