import numpy as np
import pytest

from tacsim.messages import (
    BeaconMessage,
    CoordFunction,
    CoordinationMessage,
    Lifecycle,
    NavIntegrity,
    sign,
)

KEY = b"0123456789abcdef0123456789abcdef"


def random_beacon(rng: np.random.Generator, signed_key: bytes | None = None,
                  **overrides) -> BeaconMessage:
    n_intent = int(rng.integers(0, 9))
    etas = np.sort(rng.integers(1, 10**6, size=n_intent))
    while len(set(etas.tolist())) != n_intent:
        etas = np.sort(rng.integers(1, 10**6, size=n_intent))
    intent = tuple(
        ((float(rng.normal()), float(rng.normal()), float(rng.normal())),
         int(eta)) for eta in etas)
    fields = dict(
        sender_id=int(rng.integers(0, 2**32)),
        seq=int(rng.integers(0, 2**62)),
        t_issue=int(rng.integers(0, 2**48)),
        ttl_ms=int(rng.integers(1, 2**31)),
        position=tuple(float(v) for v in rng.normal(size=3) * 1000),
        velocity=tuple(float(v) for v in rng.normal(size=3) * 10),
        intent=intent,
        observability_quality=float(rng.random()),
        track_count=int(rng.integers(0, 1000)),
        nav_integrity=NavIntegrity(int(rng.integers(0, 3))),
        maneuver_authority=tuple(float(abs(v)) for v in rng.normal(size=3) * 20),
    )
    fields.update(overrides)
    msg = BeaconMessage(**fields)
    return sign(msg, signed_key) if signed_key else msg


def random_coord(rng: np.random.Generator, signed_key: bytes | None = None,
                 **overrides) -> CoordinationMessage:
    sender = int(overrides.get("sender_id", rng.integers(0, 2**32)))
    others = {int(v) for v in rng.integers(0, 2**32, size=int(rng.integers(0, 5)))}
    participants = frozenset(others | {sender})
    lifecycle = Lifecycle(int(rng.integers(0, 4)))
    payload_keys = ["slot", "eta_s", "yield_to", "pri"][: int(rng.integers(0, 5))]
    fields = dict(
        sender_id=sender,
        seq=int(rng.integers(0, 2**62)),
        t_issue=int(rng.integers(0, 2**48)),
        ttl_ms=int(rng.integers(1, 2**31)),
        transaction_id=int(rng.integers(0, 2**62)),
        lifecycle=lifecycle,
        function=CoordFunction(int(rng.integers(0, 8))),
        participants=participants,
        zone_ref=int(rng.integers(0, 2**32)) if rng.random() < 0.5 else None,
        validity_ms=int(rng.integers(1, 2**31)),
        payload={k: float(rng.normal()) for k in payload_keys},
    )
    fields.update(overrides)
    msg = CoordinationMessage(**fields)
    return sign(msg, signed_key) if signed_key else msg


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
