"""Canonical codec and auth-tag tests: round-trip identity, byte-layout
oracles, length discipline, domain errors, and tag coverage fuzz."""

import struct

import numpy as np
import pytest

from tacsim.messages import (
    BEACON_SEQ_END,
    BEACON_SEQ_OFFSET,
    BeaconMessage,
    CoordinationMessage,
    EncodingDomainError,
    Lifecycle,
    MalformedMessage,
    MSG_BEACON,
    NavIntegrity,
    TAG_LEN,
    compute_auth_tag,
    decode,
    encode_canonical,
    sign,
    tag_input,
    verify,
)

from conftest import KEY, random_beacon, random_coord


def test_encode_deterministic(rng):
    msg = random_beacon(rng, KEY)
    assert encode_canonical(msg) == encode_canonical(msg)


def test_round_trip_fully_populated(rng):
    msg = random_beacon(rng, KEY)
    assert decode(encode_canonical(msg)) == msg


def test_round_trip_random_messages(rng):
    for _ in range(300):
        msg = random_beacon(rng, KEY)
        assert decode(encode_canonical(msg)) == msg
    for _ in range(300):
        msg = random_coord(rng, KEY)
        assert decode(encode_canonical(msg)) == msg


def test_seq_field_region_byte_diff(rng):
    # byte-diff oracle over the canonical layout: messages that differ only
    # in seq (same stored tag) differ exactly inside the seq field region
    base = random_beacon(rng)
    a = encode_canonical(base)
    import dataclasses
    b = encode_canonical(dataclasses.replace(base, seq=base.seq ^ 0xFF00FF))
    assert len(a) == len(b)
    diff = {i for i, (x, y) in enumerate(zip(a, b)) if x != y}
    assert diff
    assert diff <= set(range(BEACON_SEQ_OFFSET, BEACON_SEQ_END))


def test_manual_layout_oracle():
    # independently packed bytes per the documented little-endian layout
    msg = BeaconMessage(
        sender_id=7, seq=42, t_issue=1000, ttl_ms=500,
        position=(1.0, 2.0, 3.0), velocity=(-1.0, 0.5, 0.0),
        intent=(((10.0, 20.0, 30.0), 1500),),
        observability_quality=0.75, track_count=3,
        nav_integrity=NavIntegrity.DEGRADED,
        maneuver_authority=(50.0, 20.0, 5.0),
        auth_tag=bytes(range(16)))
    expected = struct.pack("<BIQQI", MSG_BEACON, 7, 42, 1000, 500)
    expected += struct.pack("<3d", 1.0, 2.0, 3.0)
    expected += struct.pack("<3d", -1.0, 0.5, 0.0)
    expected += struct.pack("<B", 1)
    expected += struct.pack("<3dQ", 10.0, 20.0, 30.0, 1500)
    expected += struct.pack("<dIB", 0.75, 3, 1)
    expected += struct.pack("<3d", 50.0, 20.0, 5.0)
    expected += bytes(range(16))
    assert encode_canonical(msg) == expected


def test_decode_empty_and_trailing(rng):
    with pytest.raises(MalformedMessage):
        decode(b"")
    msg = random_beacon(rng, KEY)
    data = encode_canonical(msg)
    with pytest.raises(MalformedMessage):
        decode(data + b"\x00")
    with pytest.raises(MalformedMessage):
        decode(data[:-1])
    with pytest.raises(MalformedMessage):
        decode(b"\x7f" + data[1:])


def test_domain_errors(rng):
    with pytest.raises(EncodingDomainError):
        encode_canonical(random_beacon(rng, observability_quality=1.5))
    with pytest.raises(EncodingDomainError):
        encode_canonical(random_beacon(rng, ttl_ms=0))
    with pytest.raises(EncodingDomainError):
        encode_canonical(random_beacon(
            rng, intent=(((0.0, 0.0, 0.0), 100), ((1.0, 1.0, 1.0), 100))))
    with pytest.raises(EncodingDomainError):
        encode_canonical(random_coord(
            rng, lifecycle=Lifecycle.PROPOSE, sender_id=1,
            participants=frozenset({2, 3})))
    with pytest.raises(EncodingDomainError):
        encode_canonical(random_coord(
            rng, lifecycle=Lifecycle.COMMIT, validity_ms=0))
    with pytest.raises(EncodingDomainError):
        encode_canonical(random_beacon(rng, position=(float("nan"), 0.0, 0.0)))


def test_tag_deterministic_and_key_separation(rng):
    msg = random_beacon(rng)
    body = tag_input(msg)
    assert compute_auth_tag(KEY, body) == compute_auth_tag(KEY, body)
    assert len(compute_auth_tag(KEY, body)) == TAG_LEN
    # random-pair oracle: distinct keys produce distinct tags
    for _ in range(100):
        k1 = rng.bytes(32)
        k2 = rng.bytes(32)
        if k1 == k2:
            continue
        assert compute_auth_tag(k1, body) != compute_auth_tag(k2, body)


def test_tag_bit_flip_oracle(rng):
    # exhaustive-style flip oracle at small message size
    msg = random_beacon(rng, intent=())
    body = bytearray(tag_input(msg))
    baseline = compute_auth_tag(KEY, bytes(body))
    for _ in range(1000):
        i = int(rng.integers(0, len(body)))
        bit = 1 << int(rng.integers(0, 8))
        body[i] ^= bit
        assert compute_auth_tag(KEY, bytes(body)) != baseline
        body[i] ^= bit


def test_tag_covers_every_field(rng):
    # fuzz property: any mutation outside the tag region breaks
    # verification (either the tag mismatches or decode rejects)
    for _ in range(200):
        msg = random_beacon(rng, KEY) if rng.random() < 0.5 else random_coord(rng, KEY)
        data = bytearray(encode_canonical(msg))
        i = int(rng.integers(0, len(data) - TAG_LEN))
        bit = 1 << int(rng.integers(0, 8))
        data[i] ^= bit
        try:
            mutated = decode(bytes(data))
        except MalformedMessage:
            continue
        assert not verify(mutated, KEY)


def test_mutating_only_tag_fails_auth(rng):
    msg = random_beacon(rng, KEY)
    data = bytearray(encode_canonical(msg))
    data[-1] ^= 0x01
    assert not verify(decode(bytes(data)), KEY)


def test_golden_vectors(tmp_path):
    import pathlib
    vec_dir = pathlib.Path(__file__).parent / "vectors"
    for name in ("beacon_basic", "coord_commit"):
        hex_path = vec_dir / f"{name}.hex"
        data = bytes.fromhex(hex_path.read_text().strip())
        msg = decode(data)
        assert encode_canonical(msg) == data
        assert verify(msg, KEY)
