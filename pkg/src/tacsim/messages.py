"""Tactical V2V message families: periodic beacons and event-triggered
coordination messages, with a canonical byte encoding and keyed auth tags.

The wire layout is little-endian, fixed-width, length-prefixed for lists,
and fully deterministic: a message encodes to exactly one byte sequence.
See docs/WIRE_FORMAT.md for the field-by-field layout; golden vectors live
in tests/vectors/.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum

TAG_LEN = 16
MAX_INTENT = 8
MAX_PARTICIPANTS = 32
MAX_PAYLOAD_ENTRIES = 16
MAX_PAYLOAD_KEY = 24

MSG_BEACON = 0x01
MSG_COORD = 0x02

_U32_MAX = 2**32 - 1
_U64_MAX = 2**64 - 1

_PAYLOAD_KEY_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789_")


class NavIntegrity(IntEnum):
    NOMINAL = 0
    DEGRADED = 1
    INVALID = 2


class Lifecycle(IntEnum):
    PROPOSE = 0
    COMMIT = 1
    ABORT = 2
    CLEAR = 3


class CoordFunction(IntEnum):
    YIELD_PASS = 0
    ADMISSION = 1
    SEQUENCING = 2
    REJOIN = 3
    RELEASE = 4
    PRIORITY = 5
    CONTINGENCY = 6
    HAZARD_CLEAR = 7


class EncodingDomainError(ValueError):
    """A message field is outside its legal domain."""


class MalformedMessage(ValueError):
    """Bytes are not a valid canonical encoding."""


Vec3 = tuple[float, float, float]


@dataclass(eq=True)
class BeaconMessage:
    """Periodic state/intent broadcast.

    `intent` is an advisory short-horizon plan: up to MAX_INTENT
    (waypoint, eta_ms) entries with strictly increasing etas.
    `maneuver_authority` is (max_lateral_dev_m, max_vertical_dev_m,
    max_speed_delta_mps).
    """

    sender_id: int
    seq: int
    t_issue: int
    ttl_ms: int
    position: Vec3
    velocity: Vec3
    intent: tuple[tuple[Vec3, int], ...] = ()
    observability_quality: float = 1.0
    track_count: int = 0
    nav_integrity: NavIntegrity = NavIntegrity.NOMINAL
    maneuver_authority: Vec3 = (50.0, 20.0, 5.0)
    auth_tag: bytes = b"\x00" * TAG_LEN


@dataclass(eq=True)
class CoordinationMessage:
    """Event-triggered coordination transaction message."""

    sender_id: int
    seq: int
    t_issue: int
    ttl_ms: int
    transaction_id: int
    lifecycle: Lifecycle
    function: CoordFunction
    participants: frozenset[int] = field(default_factory=frozenset)
    zone_ref: int | None = None
    validity_ms: int = 0
    payload: dict[str, float] = field(default_factory=dict)
    auth_tag: bytes = b"\x00" * TAG_LEN

    def __eq__(self, other):
        if not isinstance(other, CoordinationMessage):
            return NotImplemented
        return (
            self.sender_id == other.sender_id
            and self.seq == other.seq
            and self.t_issue == other.t_issue
            and self.ttl_ms == other.ttl_ms
            and self.transaction_id == other.transaction_id
            and self.lifecycle == other.lifecycle
            and self.function == other.function
            and self.participants == other.participants
            and self.zone_ref == other.zone_ref
            and self.validity_ms == other.validity_ms
            and self.payload == other.payload
            and self.auth_tag == other.auth_tag
        )


Message = BeaconMessage | CoordinationMessage


def _check_uint(name: str, value: int, maximum: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise EncodingDomainError(f"{name} must be an integer, got {value!r}")
    if value < 0 or value > maximum:
        raise EncodingDomainError(f"{name}={value} outside [0, {maximum}]")
    return value


def _check_vec3(name: str, value) -> Vec3:
    if len(value) != 3:
        raise EncodingDomainError(f"{name} must have 3 components")
    out = tuple(float(v) for v in value)
    if not all(math.isfinite(v) for v in out):
        raise EncodingDomainError(f"{name} has non-finite component: {out}")
    return out


def _check_common(msg: Message) -> None:
    _check_uint("sender_id", msg.sender_id, _U32_MAX)
    _check_uint("seq", msg.seq, _U64_MAX)
    _check_uint("t_issue", msg.t_issue, _U64_MAX)
    _check_uint("ttl_ms", msg.ttl_ms, _U32_MAX)
    if msg.ttl_ms <= 0:
        raise EncodingDomainError("ttl_ms must be > 0")
    if not isinstance(msg.auth_tag, (bytes, bytearray)) or len(msg.auth_tag) != TAG_LEN:
        raise EncodingDomainError(f"auth_tag must be {TAG_LEN} bytes")


def _validate_beacon(msg: BeaconMessage) -> None:
    _check_common(msg)
    _check_vec3("position", msg.position)
    _check_vec3("velocity", msg.velocity)
    if len(msg.intent) > MAX_INTENT:
        raise EncodingDomainError(f"intent length {len(msg.intent)} > {MAX_INTENT}")
    last_eta = -1
    for wp, eta in msg.intent:
        _check_vec3("intent waypoint", wp)
        _check_uint("intent eta", eta, _U64_MAX)
        if eta <= last_eta:
            raise EncodingDomainError("intent etas must be strictly increasing")
        last_eta = eta
    if not (isinstance(msg.observability_quality, (int, float))
            and math.isfinite(msg.observability_quality)
            and 0.0 <= msg.observability_quality <= 1.0):
        raise EncodingDomainError(
            f"observability_quality={msg.observability_quality} outside [0, 1]")
    _check_uint("track_count", msg.track_count, _U32_MAX)
    if msg.nav_integrity not in (0, 1, 2):
        raise EncodingDomainError(f"bad nav_integrity {msg.nav_integrity}")
    auth = _check_vec3("maneuver_authority", msg.maneuver_authority)
    if any(v < 0 for v in auth):
        raise EncodingDomainError("maneuver_authority components must be >= 0")


def _validate_coord(msg: CoordinationMessage) -> None:
    _check_common(msg)
    _check_uint("transaction_id", msg.transaction_id, _U64_MAX)
    if msg.lifecycle not in (0, 1, 2, 3):
        raise EncodingDomainError(f"bad lifecycle {msg.lifecycle}")
    if not 0 <= int(msg.function) <= 7:
        raise EncodingDomainError(f"bad function {msg.function}")
    if not msg.participants:
        raise EncodingDomainError("participants must be non-empty")
    if len(msg.participants) > MAX_PARTICIPANTS:
        raise EncodingDomainError("too many participants")
    for p in msg.participants:
        _check_uint("participant", p, _U32_MAX)
    if msg.lifecycle == Lifecycle.PROPOSE and msg.sender_id not in msg.participants:
        raise EncodingDomainError("PROPOSE must include sender in participants")
    if msg.zone_ref is not None:
        _check_uint("zone_ref", msg.zone_ref, _U32_MAX)
    _check_uint("validity_ms", msg.validity_ms, _U32_MAX)
    if msg.lifecycle == Lifecycle.COMMIT and msg.validity_ms <= 0:
        raise EncodingDomainError("COMMIT requires validity_ms > 0")
    if len(msg.payload) > MAX_PAYLOAD_ENTRIES:
        raise EncodingDomainError("too many payload entries")
    for key, value in msg.payload.items():
        if not (1 <= len(key) <= MAX_PAYLOAD_KEY) or not set(key) <= _PAYLOAD_KEY_CHARS:
            raise EncodingDomainError(f"bad payload key {key!r}")
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            raise EncodingDomainError(f"non-finite payload value for {key!r}")


def _encode_body(msg: Message) -> bytes:
    """Everything except the trailing auth tag (this is the tag input)."""
    out = bytearray()
    if isinstance(msg, BeaconMessage):
        _validate_beacon(msg)
        out += struct.pack("<BIQQI", MSG_BEACON, msg.sender_id, msg.seq,
                           msg.t_issue, msg.ttl_ms)
        out += struct.pack("<3d", *msg.position)
        out += struct.pack("<3d", *msg.velocity)
        out += struct.pack("<B", len(msg.intent))
        for wp, eta in msg.intent:
            out += struct.pack("<3dQ", wp[0], wp[1], wp[2], eta)
        out += struct.pack("<dIB", msg.observability_quality, msg.track_count,
                           int(msg.nav_integrity))
        out += struct.pack("<3d", *msg.maneuver_authority)
    elif isinstance(msg, CoordinationMessage):
        _validate_coord(msg)
        out += struct.pack("<BIQQI", MSG_COORD, msg.sender_id, msg.seq,
                           msg.t_issue, msg.ttl_ms)
        out += struct.pack("<QBB", msg.transaction_id, int(msg.lifecycle),
                           int(msg.function))
        participants = sorted(msg.participants)
        out += struct.pack("<B", len(participants))
        for p in participants:
            out += struct.pack("<I", p)
        if msg.zone_ref is None:
            out += struct.pack("<BI", 0, 0)
        else:
            out += struct.pack("<BI", 1, msg.zone_ref)
        out += struct.pack("<I", msg.validity_ms)
        keys = sorted(msg.payload)
        out += struct.pack("<B", len(keys))
        for key in keys:
            kb = key.encode("ascii")
            out += struct.pack("<B", len(kb)) + kb
            out += struct.pack("<d", float(msg.payload[key]))
    else:
        raise EncodingDomainError(f"not a message: {type(msg).__name__}")
    return bytes(out)


def encode_canonical(msg: Message) -> bytes:
    """Deterministic canonical encoding, auth tag appended last."""
    return _encode_body(msg) + bytes(msg.auth_tag)


def tag_input(msg: Message) -> bytes:
    """The byte region covered by the auth tag (everything but the tag)."""
    return _encode_body(msg)


def compute_auth_tag(key: bytes, canonical_bytes: bytes) -> bytes:
    """Keyed MAC over the canonical tag-input region (16-byte keyed BLAKE2b)."""
    if not 16 <= len(key) <= 64:
        raise ValueError("key must be 16..64 bytes")
    return hashlib.blake2b(canonical_bytes, key=key, digest_size=TAG_LEN).digest()


def sign(msg: Message, key: bytes) -> Message:
    """Return a copy of `msg` carrying a valid auth tag for `key`."""
    return replace(msg, auth_tag=compute_auth_tag(key, tag_input(msg)))


def verify(msg: Message, key: bytes) -> bool:
    return compute_auth_tag(key, tag_input(msg)) == bytes(msg.auth_tag)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise MalformedMessage("truncated message")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def take_bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedMessage("truncated message")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedMessage(
                f"{len(self.data) - self.pos} trailing bytes after message")


def _finite(*vals: float) -> None:
    if not all(math.isfinite(v) for v in vals):
        raise MalformedMessage("non-finite float field")


def decode(data: bytes) -> Message:
    """Decode a canonical encoding. Structural validation only: length
    discipline, enum ranges and canonical ordering; no auth check."""
    if len(data) == 0:
        raise MalformedMessage("empty message")
    r = _Reader(bytes(data))
    (kind,) = r.take("<B")
    if kind == MSG_BEACON:
        sender_id, seq, t_issue, ttl_ms = r.take("<IQQI")
        if ttl_ms == 0:
            raise MalformedMessage("ttl_ms must be > 0")
        position = r.take("<3d")
        velocity = r.take("<3d")
        _finite(*position, *velocity)
        (n_intent,) = r.take("<B")
        if n_intent > MAX_INTENT:
            raise MalformedMessage(f"intent count {n_intent} > {MAX_INTENT}")
        intent = []
        last_eta = -1
        for _ in range(n_intent):
            x, y, z, eta = r.take("<3dQ")
            _finite(x, y, z)
            if eta <= last_eta:
                raise MalformedMessage("intent etas not strictly increasing")
            last_eta = eta
            intent.append(((x, y, z), eta))
        obs, track_count, integ = r.take("<dIB")
        _finite(obs)
        if integ > 2:
            raise MalformedMessage(f"bad nav_integrity {integ}")
        authority = r.take("<3d")
        _finite(*authority)
        tag = r.take_bytes(TAG_LEN)
        r.done()
        return BeaconMessage(
            sender_id=sender_id, seq=seq, t_issue=t_issue, ttl_ms=ttl_ms,
            position=position, velocity=velocity, intent=tuple(intent),
            observability_quality=obs, track_count=track_count,
            nav_integrity=NavIntegrity(integ), maneuver_authority=authority,
            auth_tag=tag)
    if kind == MSG_COORD:
        sender_id, seq, t_issue, ttl_ms = r.take("<IQQI")
        if ttl_ms == 0:
            raise MalformedMessage("ttl_ms must be > 0")
        txn_id, lifecycle, function = r.take("<QBB")
        if lifecycle > 3 or function > 7:
            raise MalformedMessage("bad lifecycle/function discriminant")
        (n_part,) = r.take("<B")
        if not 1 <= n_part <= MAX_PARTICIPANTS:
            raise MalformedMessage(f"bad participant count {n_part}")
        participants = []
        for _ in range(n_part):
            (p,) = r.take("<I")
            if participants and p <= participants[-1]:
                raise MalformedMessage("participants not strictly ascending")
            participants.append(p)
        zone_flag, zone_val = r.take("<BI")
        if zone_flag > 1 or (zone_flag == 0 and zone_val != 0):
            raise MalformedMessage("non-canonical zone_ref")
        (validity_ms,) = r.take("<I")
        (n_payload,) = r.take("<B")
        if n_payload > MAX_PAYLOAD_ENTRIES:
            raise MalformedMessage("too many payload entries")
        payload = {}
        last_key = ""
        for _ in range(n_payload):
            (klen,) = r.take("<B")
            if not 1 <= klen <= MAX_PAYLOAD_KEY:
                raise MalformedMessage("bad payload key length")
            kb = r.take_bytes(klen)
            try:
                key = kb.decode("ascii")
            except UnicodeDecodeError as exc:
                raise MalformedMessage("non-ascii payload key") from exc
            if not set(key) <= _PAYLOAD_KEY_CHARS or (last_key and key <= last_key):
                raise MalformedMessage("non-canonical payload key")
            last_key = key
            (value,) = r.take("<d")
            _finite(value)
            payload[key] = value
        tag = r.take_bytes(TAG_LEN)
        r.done()
        return CoordinationMessage(
            sender_id=sender_id, seq=seq, t_issue=t_issue, ttl_ms=ttl_ms,
            transaction_id=txn_id, lifecycle=Lifecycle(lifecycle),
            function=CoordFunction(function),
            participants=frozenset(participants),
            zone_ref=zone_val if zone_flag else None,
            validity_ms=validity_ms, payload=payload, auth_tag=tag)
    raise MalformedMessage(f"unknown message discriminant 0x{kind:02x}")


# Fixed offsets of the beacon header fields (used by layout tests and docs).
BEACON_SEQ_OFFSET = 5
BEACON_SEQ_END = 13
