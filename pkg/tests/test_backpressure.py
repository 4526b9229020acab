import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpnc.backpressure import (
    FlowId,
    PenaltyTracker,
    VirtualQueueSet,
    flow_score,
    select_flow,
    select_next_hop,
    spectrum_utility,
)


FA = FlowId(1, (7,))
FB = FlowId(2, (7,))


def test_flowid_validation():
    with pytest.raises(ValueError):
        FlowId(1, ())
    with pytest.raises(ValueError):
        FlowId(1, (1, 2))


def test_unicast_selection_example():
    # A: (5,2), B: (4,0), alpha=1 -> B wins with score 4 over 3
    got = select_flow([
        (FA, {7: 5}, {7: 2}, 1.0),
        (FB, {7: 4}, {7: 0}, 1.0),
    ])
    assert got == (FB, 4)


def test_no_positive_differential_returns_none():
    assert select_flow([(FA, {7: 2}, {7: 5}, 1.0), (FB, {7: 0}, {7: 0}, 1.0)]) is None


def test_penalty_changes_selection():
    # A: diff 3 with alpha 0.5 -> 1.5; B: diff 2 with alpha 1 -> 2
    got = select_flow([
        (FA, {7: 5}, {7: 2}, 0.5),
        (FB, {7: 4}, {7: 2}, 1.0),
    ])
    assert got == (FB, 2)


def test_multicast_score_sums_destinations():
    f = FlowId(1, (6, 7))
    assert flow_score({6: 3, 7: 1}, {6: 1, 7: 2}, 1.0) == 2


def test_singleton_multicast_equals_unicast():
    assert flow_score({7: 5}, {7: 2}, 1.0) == flow_score({7: 5}, {7: 2}, 1.0)
    got = select_flow([(FA, {7: 5}, {7: 2}, 1.0)])
    assert got == (FA, 3)


@given(
    st.dictionaries(st.integers(2, 9), st.integers(0, 50), min_size=1, max_size=4),
    st.dictionaries(st.integers(2, 9), st.integers(0, 50), max_size=4),
)
@settings(max_examples=200)
def test_score_matches_bruteforce(local, remote):
    expected = sum(max(local[d] - remote.get(d, 0), 0) for d in local)
    assert flow_score(local, remote, 1.0) == expected


def test_spectrum_utility_examples():
    assert spectrum_utility(2, (5 - 3) * 1.0) == 4
    assert spectrum_utility(2, 2 * 0.5) == 2
    assert spectrum_utility(0, 99) == 0


def test_next_hop_argmax_and_ties():
    assert select_next_hop([(2, 0, 1.0, FA, 6), (3, 0, 1.0, FA, 4)])[0] == 2
    # tie 6 vs 6 between neighbors 4 and 2 -> neighbor 2
    assert select_next_hop([(4, 0, 1.0, FA, 6), (2, 0, 1.0, FA, 6)])[0] == 2
    # channel tie-break, lower channel index wins
    got = select_next_hop([(2, 1, 1.0, FA, 6), (2, 0, 1.0, FA, 6)])
    assert got[1] == 0
    assert select_next_hop([(2, 0, 1.0, FA, 0), (3, 0, 0.0, FA, 9)]) is None


def test_work_conservation():
    got = select_next_hop([(5, 2, 0.5, FA, 1)])
    assert got is not None


@given(st.integers(1, 10))
@settings(max_examples=50)
def test_scale_invariance_of_argmax(k):
    cands = [
        (FA, {7: 5}, {7: 2}, 1.0),
        (FB, {7: 9}, {7: 1}, 1.0),
    ]
    scaled = [(f, {d: q * k for d, q in l.items()}, {d: q * k for d, q in r.items()}, a)
              for f, l, r, a in cands]
    assert select_flow(cands)[0] == select_flow(scaled)[0]


def test_penalty_tracker_sequence():
    t = PenaltyTracker()
    assert t.alpha(FA, 3) == 1.0
    t.record_visit(FA, 3)
    assert t.count(FA, 3) == 1
    assert t.alpha(FA, 3) == 1.0
    t.record_visit(FA, 3)
    assert t.alpha(FA, 3) == 0.5
    for _ in range(8):
        t.record_visit(FA, 3)
    assert t.alpha(FA, 3) == pytest.approx(0.1)


def test_alpha_non_increasing():
    t = PenaltyTracker()
    prev = t.alpha(FA, 2)
    for _ in range(20):
        t.record_visit(FA, 2)
        cur = t.alpha(FA, 2)
        assert cur <= prev
        prev = cur


def test_virtual_queue_accounting():
    q = VirtualQueueSet(node_id=4)
    f = FlowId(1, (6, 7))
    q.increment(f, 6)
    q.increment(f, 7)
    assert q.total() == 2
    q.decrement(f, 6)
    assert q.backlog(f, 6) == 0
    q.decrement(f, 6)  # clamped at zero
    assert q.backlog(f, 6) == 0


def test_own_destination_queue_absent():
    q = VirtualQueueSet(node_id=6)
    f = FlowId(1, (6, 7))
    q.increment(f, 6)
    q.increment(f, 7)
    assert q.backlog(f, 6) == 0
    assert q.dests_here(f) == (7,)


def test_entries_deterministic_order():
    q = VirtualQueueSet(node_id=4)
    f1 = FlowId(1, (6, 7))
    f2 = FlowId(2, (7,))
    q.increment(f2, 7)
    q.increment(f1, 7)
    q.increment(f1, 6)
    assert [(f.source, d) for f, d, _ in q.entries()] == [(1, 6), (1, 7), (2, 7)]
