"""Per-aircraft tactical decision logic shared by the baselines:
short-horizon conflict prediction, the coordination transaction engine,
hotspot admission ordering, communication-quality mode transitions, and
the last-resort backstop used by every baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .messages import BeaconMessage
from .trust import NeighborBelief


class ControllerMode(IntEnum):
    COOPERATIVE = 0
    GUARDED = 1
    FALLBACK = 2
    BACKSTOP = 3


class Phase(IntEnum):
    IDLE = 0
    PROPOSED = 1
    COMMITTED = 2
    ABORTED = 3
    CLEARED = 4


# legal transaction transitions; terminal phases are absorbing
LEGAL_TRANSITIONS: dict[tuple[Phase, str], Phase] = {
    (Phase.IDLE, "propose"): Phase.PROPOSED,
    (Phase.PROPOSED, "commit"): Phase.COMMITTED,
    (Phase.PROPOSED, "abort"): Phase.ABORTED,
    (Phase.PROPOSED, "timeout"): Phase.ABORTED,
    (Phase.COMMITTED, "clear"): Phase.CLEARED,
    (Phase.COMMITTED, "abort"): Phase.ABORTED,
    (Phase.COMMITTED, "expire"): Phase.ABORTED,
}


@dataclass
class ConflictPrediction:
    pair: tuple[int, int]
    t_cpa_s: float
    d_cpa_m: float
    effective_radius_m: float

    @property
    def severity(self) -> float:
        return max(0.0, 1.0 - self.d_cpa_m / self.effective_radius_m)


@dataclass
class TransactionState:
    """One coordination transaction as seen by one participant."""

    transaction_id: int
    function: int
    phase: Phase = Phase.IDLE
    deadline_ms: float = math.inf        # proposal timeout or validity end
    participants: frozenset[int] = frozenset()
    granted_order: tuple[int, ...] = ()
    initiated: bool = False
    fallback: bool = False               # set when a proposal timed out
    expired: bool = False

    def live_commit(self, now_ms: float) -> bool:
        return self.phase == Phase.COMMITTED and now_ms <= self.deadline_ms


def run_transaction(state: TransactionState, event: str, now_ms: float,
                    validity_ms: float = 0.0,
                    timeout_ms: float = 500.0) -> tuple[TransactionState, bool]:
    """Apply one lifecycle event; returns (state, legal).

    Illegal events leave the state untouched (callers count them as
    protocol violations and drop the message). "tick" auto-expires
    commitments past their validity window and times out unanswered
    proposals.
    """
    if event == "tick":
        if state.phase == Phase.PROPOSED and now_ms > state.deadline_ms:
            state, _ = run_transaction(state, "timeout", now_ms)
            state.fallback = True
        elif state.phase == Phase.COMMITTED and now_ms > state.deadline_ms:
            state, _ = run_transaction(state, "expire", now_ms)
            state.expired = True
        return state, True
    target = LEGAL_TRANSITIONS.get((state.phase, event))
    if target is None:
        return state, False
    state.phase = target
    if event == "propose":
        state.deadline_ms = now_ms + timeout_ms
    elif event == "commit":
        state.deadline_ms = now_ms + validity_ms
    elif event == "timeout":
        state.fallback = True
    return state, True


def extrapolate_belief(belief: NeighborBelief, now_ms: float,
                       use_intent: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Predicted neighbor position/velocity at `now_ms`.

    Fresh (full-weight) beliefs follow the beacon's intent waypoints
    piecewise-linearly; degraded or intent-less beliefs extrapolate
    straight-line from the beacon state.
    """
    beacon: BeaconMessage = belief.beacon
    p = np.asarray(beacon.position, float)
    v = np.asarray(beacon.velocity, float)
    age_s = max(0.0, (now_ms - beacon.t_issue) / 1000.0)
    if not use_intent or not beacon.intent or belief.trust_weight < 1.0:
        return p + v * age_s, v
    t = float(beacon.t_issue)
    for wp, eta in beacon.intent:
        wp = np.asarray(wp, float)
        seg_dt = (eta - t) / 1000.0
        if seg_dt <= 0:
            p, t = wp, float(eta)
            continue
        seg_v = (wp - p) / seg_dt
        if now_ms <= eta:
            return p + seg_v * max(0.0, (now_ms - t) / 1000.0), seg_v
        p, t = wp, float(eta)
    return p, np.zeros(3)  # past the last waypoint: holding there


def cpa(rel_p: np.ndarray, rel_v: np.ndarray,
        horizon_s: float) -> tuple[float, float]:
    """Closest point of approach of a constant-velocity pair, clamped to
    [0, horizon]."""
    vv = float(rel_v @ rel_v)
    t = 0.0 if vv <= 1e-12 else float(-(rel_p @ rel_v) / vv)
    t = min(max(t, 0.0), horizon_s)
    miss = rel_p + rel_v * t
    return t, float(np.linalg.norm(miss))


def predict_conflicts(self_id: int, self_pos, self_vel,
                      beliefs: list[NeighborBelief], horizon_s: float,
                      now_ms: float, protected_radius_m: float = 15.0,
                      sigma_pos_m: float = 3.0) -> list[ConflictPrediction]:
    """Short-horizon conflict predictions against a belief list, sorted by
    time to closest approach. The effective radius grows with each
    belief's uncertainty inflation."""
    if horizon_s <= 0:
        raise ValueError("horizon_s must be > 0")
    self_pos = np.asarray(self_pos, float)
    self_vel = np.asarray(self_vel, float)
    out = []
    for belief in beliefs:
        npos, nvel = extrapolate_belief(belief, now_ms)
        t_cpa, d_cpa = cpa(npos - self_pos, nvel - self_vel, horizon_s)
        radius = protected_radius_m + belief.uncertainty_inflation * sigma_pos_m
        if d_cpa < radius and t_cpa <= horizon_s:
            out.append(ConflictPrediction((self_id, belief.sender_id),
                                          t_cpa, d_cpa, radius))
    out.sort(key=lambda c: (c.t_cpa_s, c.pair[1]))
    return out


def hotspot_admission(pad_count: int, requests: list[tuple[int, float, float]],
                      capacity_scale: float = 1.0,
                      occupied: int = 0) -> tuple[list[int], list[int]]:
    """Deterministic admission ordering for one shared resource.

    `requests` rows are (vehicle_id, priority, eta_s). Ordering is
    (priority desc, eta asc, id asc); at most
    floor(pad_count * capacity_scale) admissions are outstanding beyond
    the already `occupied` pads. Returns (granted_now, full_ordering).
    """
    ids = [r[0] for r in requests]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate admission requests")
    order = sorted(requests, key=lambda r: (-r[1], r[2], r[0]))
    ordering = [r[0] for r in order]
    slots = max(0, int(pad_count * capacity_scale) - occupied)
    return ordering[:slots], ordering


def backstop_check(self_pos, self_vel, threat_pos, threat_vel,
                   sep_m: float = 10.0, ttc_s: float = 3.0) -> bool:
    """Last-resort trigger: any neighbor (from any source) currently
    inside the separation threshold, or predicted inside it within the
    time-to-conflict threshold."""
    self_pos = np.asarray(self_pos, float)
    self_vel = np.asarray(self_vel, float)
    for tp, tv in zip(np.atleast_2d(threat_pos), np.atleast_2d(threat_vel)):
        rel_p = np.asarray(tp, float) - self_pos
        if float(np.linalg.norm(rel_p)) < sep_m:
            return True
        t, d = cpa(rel_p, np.asarray(tv, float) - self_vel, ttc_s)
        if d < sep_m and t <= ttc_s:
            return True
    return False


def mode_target(mean_weight: float, window_prr: float) -> ControllerMode:
    """Raw communication-quality mode (before hysteresis)."""
    if mean_weight < 0.4 or window_prr < 0.4:
        return ControllerMode.FALLBACK
    if mean_weight < 0.8 or window_prr < 0.7:
        return ControllerMode.GUARDED
    return ControllerMode.COOPERATIVE


@dataclass
class ModeTracker:
    """Hysteresis on upward (toward-cooperative) transitions: a better
    mode must hold for `hysteresis_ms` before it is adopted. Downward
    transitions apply immediately."""

    mode: ControllerMode = ControllerMode.COOPERATIVE
    hysteresis_ms: float = 2000.0
    _pending: ControllerMode | None = None
    _pending_since: float = 0.0
    transitions: int = 0

    def update(self, target: ControllerMode, now_ms: float) -> ControllerMode:
        if target == self.mode:
            self._pending = None
            return self.mode
        if target > self.mode:  # worse: take immediately
            self.mode = target
            self._pending = None
            self.transitions += 1
            return self.mode
        if self._pending != target:
            self._pending = target
            self._pending_since = now_ms
            return self.mode
        if now_ms - self._pending_since >= self.hysteresis_ms:
            self.mode = target
            self._pending = None
            self.transitions += 1
        return self.mode


# ---------------------------------------------------------------------------
# Shared motion formulas (array-friendly: accept (3,) or (n,3) inputs).


def cruise_accel(pos, vel, dest, cruise_speed: float, accel_max: float,
                 dt_s: float, arrive_radius_m: float = 20.0):
    """Accelerate toward a braking-aware desired velocity at the target."""
    to_dest = dest - pos
    dist = np.sqrt(np.sum(to_dest * to_dest, axis=-1, keepdims=True))
    direction = to_dest / np.where(dist > 1e-9, dist, 1.0)
    brake = np.sqrt(2.0 * accel_max * np.maximum(dist - 0.25 * arrive_radius_m, 0.0))
    v_des = direction * np.minimum(cruise_speed, brake)
    return (v_des - vel) / max(dt_s, 1e-6)


def avoidance_velocity(rel_p, rel_v, t_cpa, d_cpa, radius, avoid_speed: float,
                       parity):
    """Velocity offset pushing away from the predicted closest-approach
    miss vector; degenerate head-on geometry falls back to a horizontal
    perpendicular plus a parity-signed vertical component."""
    rel_p = np.asarray(rel_p, float)
    rel_v = np.asarray(rel_v, float)
    t = np.asarray(t_cpa, float)[..., None]
    miss = -(rel_p + rel_v * t)
    norm = np.sqrt(np.sum(miss * miss, axis=-1, keepdims=True))
    perp = np.stack([-rel_p[..., 1], rel_p[..., 0],
                     np.where(np.asarray(parity) % 2 == 0, 1.0, -1.0) * 5.0],
                    axis=-1)
    pnorm = np.sqrt(np.sum(perp * perp, axis=-1, keepdims=True))
    direction = np.where(norm > 1e-6, miss / np.where(norm > 1e-6, norm, 1.0),
                         perp / np.where(pnorm > 1e-9, pnorm, 1.0))
    severity = np.maximum(0.0, 1.0 - np.asarray(d_cpa) / np.asarray(radius))[..., None]
    return direction * (avoid_speed * (0.5 + 0.5 * severity))


def backstop_accel(pos, vel, threat_pos, accel_max: float):
    """Maximal-authority evasive acceleration away from the nearest
    threat, with a climb bias."""
    away = np.asarray(pos, float) - np.asarray(threat_pos, float)
    away = away + np.array([0.0, 0.0, 3.0])
    norm = np.sqrt(np.sum(away * away, axis=-1, keepdims=True))
    direction = away / np.where(norm > 1e-9, norm, 1.0)
    return direction * accel_max * math.sqrt(3.0)
