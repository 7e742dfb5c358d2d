import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import HOUR, outage
from gridrisk.events import (
    event_area,
    extract_events,
    group_outages,
    performance_curve,
)
from gridrisk.ingest import OutageRecord
from oracles import counter_sweep_groups, step_integral


def random_outages(rng, n, horizon=200, max_len=30, max_cust=500):
    out = []
    for i in range(n):
        s = rng.randrange(horizon)
        out.append(OutageRecord(f"r{i}", s, s + rng.randint(1, max_len), rng.randint(0, max_cust)))
    return out


def test_single_outage_is_one_event():
    ev = extract_events([outage(0, 2)])
    assert len(ev) == 1 and ev[0].n_outages == 1


def test_overlap_chain_forms_one_event():
    ev = extract_events([outage(0, 2), outage(1, 3), outage(2.5, 4)])
    assert len(ev) == 1
    assert ev[0].n_outages == 3
    assert (ev[0].start, ev[0].end) == (0, 4 * HOUR)


def test_touching_outages_split():
    ev = extract_events([outage(0, 2), outage(2, 3)])
    assert [e.n_outages for e in ev] == [1, 1]


def test_empty_input():
    assert extract_events([]) == []


def test_events_ordered_by_start():
    ev = extract_events([outage(10, 11), outage(0, 1), outage(5, 6)])
    assert [e.start for e in ev] == [0, 5 * HOUR, 10 * HOUR]


def test_grouping_matches_counter_sweep():
    rng = random.Random(7)
    for _ in range(200):
        outs = random_outages(rng, rng.randint(1, 40))
        got = {frozenset(o.id for o in e.outages) for e in extract_events(outs)}
        want = {frozenset(outs[i].id for i in g)
                for g in counter_sweep_groups([(o.start, o.restore) for o in outs])}
        assert got == want


def test_group_labels_ordered_and_dense():
    rng = random.Random(3)
    outs = random_outages(rng, 60)
    labels = group_outages([o.start for o in outs], [o.restore for o in outs])
    assert sorted(set(labels.tolist())) == list(range(labels.max() + 1))
    first_start = [min(o.start for o, l in zip(outs, labels) if l == k) for k in range(labels.max() + 1)]
    assert first_start == sorted(first_start)


def test_performance_curve_single():
    curve = performance_curve(extract_events([outage(0, 2, customers=50)])[0])
    assert curve.times.tolist() == [0, 2 * HOUR]
    assert curve.levels.tolist() == [50, 0]


def test_performance_curve_additive_plateau():
    curve = performance_curve(extract_events([outage(0, 2, 10), outage(0, 2, 20)])[0])
    assert curve.levels.tolist() == [30, 0]
    assert curve(HOUR) == 30 and curve(2 * HOUR) == 0 and curve(-1) == 0


def test_event_area_examples():
    assert event_area(extract_events([outage(0, 2, 50)])[0]) == 100.0
    assert event_area(extract_events([outage(0, 2, 0)])[0]) == 0.0


def test_area_equals_curve_integral_and_grid_oracle():
    rng = random.Random(11)
    for _ in range(100):
        outs = random_outages(rng, rng.randint(1, 25), horizon=50)
        for ev in extract_events(outs):
            a = event_area(ev)
            assert performance_curve(ev).integral_hours() == pytest.approx(a, rel=1e-12, abs=0)
            ref = step_integral([(o.start, o.restore) for o in ev.outages],
                                [o.customers for o in ev.outages])
            assert ref == pytest.approx(a, rel=1e-12, abs=0)


intervals = st.lists(
    st.tuples(st.integers(0, 100), st.integers(1, 20), st.integers(0, 1000)), min_size=1, max_size=40)


def _records(raw):
    return [OutageRecord(f"h{i}", s, s + d, c) for i, (s, d, c) in enumerate(raw)]


@given(intervals, st.randoms())
@settings(max_examples=150, deadline=None)
def test_event_invariants(raw, rnd):
    outs = _records(raw)
    events = extract_events(outs)
    # partition
    assert sum(e.n_outages for e in events) == len(outs)
    assert sorted(o.id for e in events for o in e.outages) == sorted(o.id for o in outs)
    for e in events:
        assert e.start == min(o.start for o in e.outages)
        assert e.end == max(o.restore for o in e.outages)
        # additivity
        assert e.customer_seconds == sum(o.customers * o.duration for o in e.outages)
        assert performance_curve(e).levels[-1] == 0
        # union of member intervals is one connected interval
        active = sorted((o.start, o.restore) for o in e.outages)
        reach = active[0][1]
        for s, r in active[1:]:
            assert s < reach
            reach = max(reach, r)
    # order invariance
    shuffled = outs[:]
    rnd.shuffle(shuffled)
    assert [frozenset(o.id for o in e.outages) for e in extract_events(shuffled)] == \
        [frozenset(o.id for o in e.outages) for e in events]
