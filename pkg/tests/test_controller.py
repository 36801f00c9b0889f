"""Controller-op tests: CPA oracles, prediction radius inflation,
transaction legal graph (including the 1e4 random-sequence suite),
admission ordering, backstop thresholds, mode hysteresis."""

import numpy as np
import pytest

from tacsim.controller import (
    ControllerMode,
    LEGAL_TRANSITIONS,
    ModeTracker,
    Phase,
    TransactionState,
    backstop_check,
    cpa,
    hotspot_admission,
    mode_target,
    predict_conflicts,
    run_transaction,
)
from tacsim.messages import BeaconMessage
from tacsim.trust import BeliefSource, NeighborBelief


def belief(pos, vel, weight=1.0, inflation=1.0, sender=2, t_issue=0,
           intent=()):
    beacon = BeaconMessage(sender_id=sender, seq=1, t_issue=t_issue,
                           ttl_ms=1000, position=tuple(pos),
                           velocity=tuple(vel), intent=intent)
    return NeighborBelief(sender, beacon, 0.0, weight, inflation,
                          BeliefSource.V2V)


def test_cpa_head_on_analytic():
    # both at 10 m/s, 100 m apart, co-altitude: meet in 5 s, d_cpa 0
    t, d = cpa(np.array([100.0, 0.0, 0.0]), np.array([-20.0, 0.0, 0.0]), 8.0)
    assert t == pytest.approx(5.0)
    assert d == pytest.approx(0.0, abs=1e-9)


def test_predict_head_on():
    preds = predict_conflicts(1, (0, 0, 30), (10, 0, 0),
                              [belief((100, 0, 30), (-10, 0, 0))], 8.0, 0.0)
    assert len(preds) == 1
    assert preds[0].t_cpa_s == pytest.approx(5.0)
    assert preds[0].d_cpa_m == pytest.approx(0.0, abs=1e-9)
    assert preds[0].severity == pytest.approx(1.0)


def test_predict_parallel_offset_no_conflict():
    preds = predict_conflicts(1, (0, 0, 30), (10, 0, 0),
                              [belief((0, 50, 30), (10, 0, 0))], 8.0, 0.0)
    assert preds == []


def test_predict_inflated_radius_reports():
    # same 50 m offset geometry, but inflation 3 with sigma 12 ->
    # effective radius 15 + 36 = 51 > 50 -> conflict reported
    preds = predict_conflicts(1, (0, 0, 30), (10, 0, 0),
                              [belief((0, 50, 30), (10, 0, 0), inflation=3.0)],
                              8.0, 0.0, protected_radius_m=15.0,
                              sigma_pos_m=12.0)
    assert len(preds) == 1
    assert preds[0].effective_radius_m == pytest.approx(51.0)


def test_predict_uses_intent_when_fresh():
    # neighbor's beacon velocity points north, but its intent turns east;
    # extrapolation along intent must be used for a full-weight belief
    b = belief((100, 0, 30), (0, 10, 0), t_issue=0,
               intent=(((100.0, 0.0, 30.0), 1), ((40.0, 0.0, 30.0), 6001),))
    preds = predict_conflicts(1, (0, 0, 30), (10, 0, 0), [b], 8.0, 1000.0)
    assert preds  # converging along intent
    stale = belief((100, 0, 30), (0, 10, 0), weight=0.5, t_issue=0,
                   intent=(((100.0, 0.0, 30.0), 1), ((40.0, 0.0, 30.0), 6001),))
    assert predict_conflicts(1, (0, 0, 30), (10, 0, 0), [stale], 8.0, 1000.0) == []


def test_predict_requires_positive_horizon():
    with pytest.raises(ValueError):
        predict_conflicts(1, (0, 0, 0), (0, 0, 0), [], 0.0, 0.0)


# ---------------------------------------------------------------------------
# transactions


def test_happy_path_clear():
    txn = TransactionState(1, 0)
    assert run_transaction(txn, "propose", 0.0)[1]
    assert run_transaction(txn, "commit", 100.0, validity_ms=2000)[1]
    assert run_transaction(txn, "clear", 500.0)[1]
    assert txn.phase == Phase.CLEARED


def test_proposal_timeout_aborts_with_fallback():
    txn = TransactionState(1, 0)
    run_transaction(txn, "propose", 0.0, timeout_ms=500)
    run_transaction(txn, "tick", 400.0)
    assert txn.phase == Phase.PROPOSED
    run_transaction(txn, "tick", 501.0)
    assert txn.phase == Phase.ABORTED
    assert txn.fallback


def test_commit_expiry_reverts():
    # COMMIT with 2 s validity and a lost CLEAR: expires at +2 s
    txn = TransactionState(1, 0)
    run_transaction(txn, "propose", 0.0)
    run_transaction(txn, "commit", 100.0, validity_ms=2000)
    assert txn.live_commit(1500.0)
    run_transaction(txn, "tick", 2101.0)
    assert txn.phase == Phase.ABORTED
    assert txn.expired
    assert not txn.live_commit(2101.0)


def test_illegal_transitions_rejected():
    txn = TransactionState(1, 0)
    assert not run_transaction(txn, "commit", 0.0)[1]
    assert not run_transaction(txn, "clear", 0.0)[1]
    run_transaction(txn, "propose", 0.0)
    assert not run_transaction(txn, "propose", 1.0)[1]
    run_transaction(txn, "abort", 2.0)
    for event in ("propose", "commit", "clear", "abort"):
        assert not run_transaction(txn, event, 3.0)[1]
    assert txn.phase == Phase.ABORTED


def test_legal_graph_random_event_suite():
    """1e4 random event sequences: every observed transition is a legal
    edge and terminal phases are absorbing."""
    rng = np.random.default_rng(123)
    events = ["propose", "commit", "abort", "clear", "timeout", "expire", "tick"]
    for _ in range(10_000):
        txn = TransactionState(1, 0)
        now = 0.0
        for _ in range(int(rng.integers(1, 12))):
            event = events[int(rng.integers(0, len(events)))]
            now += float(rng.integers(0, 1000))
            before = txn.phase
            _, legal = run_transaction(txn, event, now,
                                       validity_ms=int(rng.integers(1, 3000)),
                                       timeout_ms=500.0)
            after = txn.phase
            if before in (Phase.ABORTED, Phase.CLEARED):
                assert after == before  # absorbing
            if after != before:
                if event == "tick":
                    assert (before, "timeout") in LEGAL_TRANSITIONS or \
                        (before, "expire") in LEGAL_TRANSITIONS
                else:
                    assert (before, event) in LEGAL_TRANSITIONS
            # a committed transaction never outlives its validity window
            if txn.phase == Phase.COMMITTED:
                run_transaction(txn, "tick", txn.deadline_ms + 1.0)
                assert txn.phase == Phase.ABORTED


# ---------------------------------------------------------------------------
# admission ordering


def test_admission_eta_ordering():
    granted, order = hotspot_admission(2, [(7, 0.0, 12.0), (3, 0.0, 10.0)])
    assert order == [3, 7]
    assert granted == [3, 7]


def test_admission_guarded_capacity():
    granted, _ = hotspot_admission(2, [(1, 0, 5.0), (2, 0, 6.0), (3, 0, 7.0)],
                                   capacity_scale=0.5)
    assert granted == [1]


def test_admission_priority_then_id():
    _, order = hotspot_admission(
        2, [(9, 0.0, 5.0), (4, 1.0, 50.0), (2, 0.0, 5.0)])
    assert order == [4, 2, 9]


def test_admission_duplicate_rejected():
    with pytest.raises(ValueError):
        hotspot_admission(2, [(1, 0, 5.0), (1, 0, 6.0)])


def test_waveoff_rejoin_tail_oracle():
    # hand-simulated queue: grant head, wave it off with rejoin priority -1,
    # others keep their order, the waved-off vehicle lands at the tail
    requests = [(1, 0.0, 5.0), (2, 0.0, 6.0), (3, 0.0, 7.0)]
    _, order = hotspot_admission(1, requests)
    assert order == [1, 2, 3]
    requests = [(2, 0.0, 6.0), (3, 0.0, 7.0), (1, -1.0, 5.0)]
    _, order = hotspot_admission(1, requests)
    assert order == [2, 3, 1]


# ---------------------------------------------------------------------------
# backstop + modes


def test_backstop_threshold_crossing():
    # predicted separation 8 m in 2 s -> activation
    assert backstop_check((0, 0, 0), (10, 0, 0), [(28.0, 8.0, 0.0)],
                          [(0.0, 0.0, 0.0)], sep_m=10.0, ttc_s=3.0)


def test_backstop_never_when_far():
    assert not backstop_check((0, 0, 0), (0, 0, 0), [(500.0, 0.0, 0.0)],
                              [(0.0, 0.0, 0.0)], sep_m=10.0, ttc_s=3.0)


def test_backstop_current_range():
    assert backstop_check((0, 0, 0), (0, 0, 0), [(5.0, 0.0, 0.0)],
                          [(0.0, 0.0, 0.0)], sep_m=10.0, ttc_s=3.0)


def test_mode_targets():
    assert mode_target(1.0, 0.95) == ControllerMode.COOPERATIVE
    assert mode_target(1.0, 0.3) == ControllerMode.FALLBACK
    assert mode_target(0.6, 0.95) == ControllerMode.GUARDED
    assert mode_target(1.0, 0.65) == ControllerMode.GUARDED


def test_mode_hysteresis_no_chatter():
    """Oscillating quality around the threshold with period < hysteresis
    produces at most one transition per 2 s."""
    tracker = ModeTracker(hysteresis_ms=2000.0)
    transitions = []
    now = 0.0
    for k in range(100):
        now += 500.0
        prr = 0.65 if k % 2 == 0 else 0.75  # flips across the 0.7 threshold
        before = tracker.mode
        after = tracker.update(mode_target(1.0, prr), now)
        if after != before:
            transitions.append(now)
    for a, b in zip(transitions, transitions[1:]):
        assert b - a >= 2000.0


def test_mode_hysteresis_upward_delay():
    tracker = ModeTracker(hysteresis_ms=2000.0)
    tracker.update(ControllerMode.FALLBACK, 0.0)
    assert tracker.mode == ControllerMode.FALLBACK  # downward immediate
    tracker.update(ControllerMode.COOPERATIVE, 100.0)
    assert tracker.mode == ControllerMode.FALLBACK
    tracker.update(ControllerMode.COOPERATIVE, 2200.0)
    assert tracker.mode == ControllerMode.COOPERATIVE
