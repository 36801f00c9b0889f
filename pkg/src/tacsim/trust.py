"""Reject-vs-degrade validation pipeline for received tactical messages.

Hard checks (auth tag, replay window, hard expiry, invalid nav integrity)
reject a message before it can touch control state. Soft conditions
(staleness band, degraded nav integrity) keep the message usable with a
reduced trust weight and an inflated uncertainty factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

from .messages import (
    BeaconMessage,
    CoordinationMessage,
    Message,
    NavIntegrity,
    verify,
)

REPLAY_WINDOW = 64


class VerdictKind(IntEnum):
    ACCEPT = 0
    DEGRADE = 1
    REJECT = 2


class VerdictReason(IntEnum):
    NONE = 0
    AUTH_FAIL = 1
    REPLAY = 2
    EXPIRED = 3
    MALFORMED = 4
    LOW_INTEGRITY = 5
    STALE_BAND = 6
    PARTIAL_COVERAGE = 7


class BeliefSource(IntEnum):
    OWN_SENSOR = 0
    V2V = 1
    FUSED = 2


@dataclass(frozen=True)
class ValidationVerdict:
    kind: VerdictKind
    reason: VerdictReason
    trust_weight: float
    uncertainty_inflation: float

    def __post_init__(self):
        if self.kind == VerdictKind.REJECT:
            assert self.trust_weight == 0.0
        if self.kind == VerdictKind.ACCEPT:
            assert self.trust_weight == 1.0 and self.uncertainty_inflation == 1.0


ACCEPT = ValidationVerdict(VerdictKind.ACCEPT, VerdictReason.NONE, 1.0, 1.0)


def _reject(reason: VerdictReason) -> ValidationVerdict:
    return ValidationVerdict(VerdictKind.REJECT, reason, 0.0, 1.0)


@dataclass(frozen=True)
class FreshnessPolicy:
    """Staleness banding constants.

    Beacons: full weight through fresh_ms, then linear down-weighting to
    `floor` at expiry_ms with uncertainty inflation 1 + beta * band
    fraction. Coordination messages are binary-fresh up to their own ttl
    (no degrade band).
    """

    fresh_ms: float = 300.0
    expiry_ms: float = 1000.0
    floor: float = 0.2
    beta: float = 2.0
    degraded_integrity_cap: float = 0.5
    degraded_integrity_inflation: float = 2.0


DEFAULT_POLICY = FreshnessPolicy()


def degrade_policy(age_ms: float, fresh_ms: float, expiry_ms: float,
                   floor: float = 0.2, beta: float = 2.0) -> tuple[float, float]:
    """Trust weight and uncertainty inflation for a message of a given age."""
    if not 0 <= age_ms <= expiry_ms:
        raise ValueError(f"age_ms={age_ms} outside [0, {expiry_ms}]")
    if not fresh_ms < expiry_ms:
        raise ValueError("fresh_ms must be < expiry_ms")
    if age_ms <= fresh_ms:
        return 1.0, 1.0
    frac = (age_ms - fresh_ms) / (expiry_ms - fresh_ms)
    return 1.0 + (floor - 1.0) * frac, 1.0 + beta * frac


def replay_probe(highest: int, bitmap: int, seq: int) -> tuple[bool, int, int]:
    """Sliding-window at-most-once check.

    `highest` is the highest seq ever marked (-1 if none), `bitmap` holds
    the last REPLAY_WINDOW seqs (bit 0 = highest). Returns (fresh,
    new_highest, new_bitmap) where the new state is what marking this seq
    would produce; callers only commit it on ACCEPT/DEGRADE.
    """
    if highest < 0:
        return True, seq, 1
    if seq > highest:
        shift = seq - highest
        new_bitmap = (bitmap << shift) & ((1 << REPLAY_WINDOW) - 1) if shift < REPLAY_WINDOW else 0
        return True, seq, new_bitmap | 1
    offset = highest - seq
    if offset >= REPLAY_WINDOW:
        return False, highest, bitmap
    bit = 1 << offset
    if bitmap & bit:
        return False, highest, bitmap
    return True, highest, bitmap | bit


class ReplayState:
    """Per-receiver replay/sequence acceptance state, keyed by sender."""

    def __init__(self):
        self._state: dict[int, tuple[int, int]] = {}

    def probe(self, sender_id: int, seq: int) -> bool:
        highest, bitmap = self._state.get(sender_id, (-1, 0))
        fresh, _, _ = replay_probe(highest, bitmap, seq)
        return fresh

    def mark(self, sender_id: int, seq: int) -> None:
        highest, bitmap = self._state.get(sender_id, (-1, 0))
        fresh, new_highest, new_bitmap = replay_probe(highest, bitmap, seq)
        assert fresh, "mark() on a replayed seq"
        self._state[sender_id] = (new_highest, new_bitmap)

    def snapshot(self) -> dict[int, tuple[int, int]]:
        return dict(self._state)


def stale_weight(age_ms: float, ttl_ms: float, integrity: int,
                 policy: FreshnessPolicy = DEFAULT_POLICY) -> tuple[float, float]:
    """Weight/inflation for a beacon of a given age (post-hard-check).

    Single source of truth shared by validate(), belief queries and the
    vectorized engine twin.
    """
    expiry = min(policy.expiry_ms, ttl_ms)
    fresh = min(policy.fresh_ms, expiry - 1)
    weight, inflation = degrade_policy(min(age_ms, expiry), fresh, expiry,
                                       policy.floor, policy.beta)
    if integrity == NavIntegrity.DEGRADED:
        weight = min(weight, policy.degraded_integrity_cap)
        inflation = inflation * policy.degraded_integrity_inflation
    return weight, inflation


def validate(msg: Message, now_ms: float, key: bytes, replay: ReplayState,
             policy: FreshnessPolicy = DEFAULT_POLICY, *,
             check_auth: bool = True) -> ValidationVerdict:
    """Fixed-order validation: auth, replay, expiry, integrity, staleness.

    Replay state is updated only when the message is usable
    (ACCEPT/DEGRADE); rejected messages leave all state untouched.
    """
    if check_auth and not verify(msg, key):
        return _reject(VerdictReason.AUTH_FAIL)
    if not replay.probe(msg.sender_id, msg.seq):
        return _reject(VerdictReason.REPLAY)
    age = max(0.0, now_ms - msg.t_issue)
    if now_ms > msg.t_issue + msg.ttl_ms:
        return _reject(VerdictReason.EXPIRED)
    if isinstance(msg, BeaconMessage):
        if msg.nav_integrity == NavIntegrity.INVALID:
            return _reject(VerdictReason.LOW_INTEGRITY)
        weight, inflation = stale_weight(age, msg.ttl_ms, msg.nav_integrity, policy)
        if msg.nav_integrity == NavIntegrity.DEGRADED:
            verdict = ValidationVerdict(VerdictKind.DEGRADE,
                                        VerdictReason.LOW_INTEGRITY,
                                        weight, inflation)
        elif weight < 1.0:
            verdict = ValidationVerdict(VerdictKind.DEGRADE,
                                        VerdictReason.STALE_BAND,
                                        weight, inflation)
        else:
            verdict = ACCEPT
    else:
        # Coordination messages are binary-fresh within their ttl.
        verdict = ACCEPT
    replay.mark(msg.sender_id, msg.seq)
    return verdict


@dataclass
class NeighborBelief:
    """Freshness-weighted local belief about one neighbor."""

    sender_id: int
    beacon: BeaconMessage
    age_ms: float
    trust_weight: float
    uncertainty_inflation: float
    source: BeliefSource = BeliefSource.V2V

    def uncertainty_radius_m(self, sigma_pos_m: float = 3.0) -> float:
        return self.uncertainty_inflation * sigma_pos_m


class NeighborTable:
    """Per-aircraft belief table fed by validated beacons.

    Beliefs are recomputed (age, weight, inflation) at query time and
    evicted once past hard expiry, so nothing stale is ever visible to a
    controller.
    """

    def __init__(self, policy: FreshnessPolicy = DEFAULT_POLICY,
                 sigma_pos_m: float = 3.0):
        self.policy = policy
        self.sigma_pos_m = sigma_pos_m
        self._beacons: dict[int, BeaconMessage] = {}

    def update(self, verdict: ValidationVerdict, msg: BeaconMessage,
               now_ms: float) -> None:
        if verdict.kind == VerdictKind.REJECT:
            return
        held = self._beacons.get(msg.sender_id)
        if held is not None and held.t_issue > msg.t_issue:
            return  # late out-of-order arrival never regresses the belief
        self._beacons[msg.sender_id] = msg

    def query(self, now_ms: float) -> list[NeighborBelief]:
        out = []
        for sender_id in sorted(self._beacons):
            beacon = self._beacons[sender_id]
            age = max(0.0, now_ms - beacon.t_issue)
            if age > min(self.policy.expiry_ms, beacon.ttl_ms):
                continue
            weight, inflation = stale_weight(age, beacon.ttl_ms,
                                             beacon.nav_integrity, self.policy)
            out.append(NeighborBelief(sender_id, beacon, age, weight, inflation))
        self._beacons = {b.sender_id: b.beacon for b in out}
        return out

    def get(self, sender_id: int, now_ms: float) -> NeighborBelief | None:
        for belief in self.query(now_ms):
            if belief.sender_id == sender_id:
                return belief
        return None
