"""
Segmentation and reassembly over 8-byte CAN frames: wire format, exact
frame counts and the error paths of the reassembly state machine.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from can_pqc_sim.core.transport import (
    ReassemblyState,
    feed,
    first_frame_length,
    frame_count,
    segment,
    transmission_bit_cost,
)
from can_pqc_sim.schemas.frame import CanFrame, StuffingModel

# 1788 bytes fill sequence numbers 1..255 exactly; the next byte wraps to 0
WRAP_LENGTHS = [3 + 7 * 254, 3 + 7 * 255, 3 + 7 * 255 + 1, 3 + 7 * 256, 3 + 7 * 256 + 1]
BOUNDARY_LENGTHS = [0, 1, 2, 3, 4, 10, 11, *WRAP_LENGTHS, 65535, 65536]


def _reassemble(frames):
    state = ReassemblyState()
    results = [feed(state, frame) for frame in frames]
    assert all(r.status == "incomplete" for r in results[:-1]), "only the last frame completes the message"
    return results[-1], state


def test_first_frame_layout():
    frames = segment(bytes(range(10)), 0x123)
    assert [f.data.hex() for f in frames] == ["100000000a000102", "0103040506070809"]
    assert all(f.can_id == 0x123 for f in frames)


def test_empty_payload_is_one_padded_frame():
    frames = segment(b"", 0x010)
    assert len(frames) == 1
    assert frames[0].data == bytes([0x10, 0, 0, 0, 0, 0, 0, 0])
    assert first_frame_length(frames[0]) == 0


def test_unpadded_last_frame():
    frames = segment(b"\x01\x02", 0x010, pad=False)
    assert frames[0].data == bytes([0x10, 0, 0, 0, 2, 1, 2])
    frames = segment(bytes(12), 0x010, pad=False)
    assert [f.dlc for f in frames] == [8, 8, 3]


@pytest.mark.parametrize("length", BOUNDARY_LENGTHS)
def test_round_trip_at_boundaries(length):
    payload = bytes((i * 31 + 7) & 0xFF for i in range(length))
    frames = segment(payload, 0x011)
    assert len(frames) == frame_count(length)
    result, state = _reassemble(frames)
    assert result.complete
    assert result.payload == payload
    assert not state.errors


@settings(max_examples=100, deadline=None)
@given(payload=st.binary(max_size=4096), pad=st.booleans())
def test_round_trip(payload, pad):
    result, _ = _reassemble(segment(payload, 0x7FF, pad=pad))
    assert result.payload == payload


def test_round_trip_over_10000_random_lengths():
    rng = np.random.default_rng(2025)
    # log-uniform over [0, 65536] so every order of magnitude is covered
    lengths = np.floor(np.exp(rng.uniform(0.0, np.log(65537.0), size=10_000))).astype(np.int64) - 1
    source = rng.bytes(1 << 17)
    assert lengths.min() >= 0 and lengths.max() <= 65536
    for length in lengths.tolist():
        start = int(rng.integers(0, 1 << 16))
        payload = source[start:start + length]
        result, state = _reassemble(segment(payload, 0x123))
        assert result.payload == payload, f"length {length}"
        assert not state.errors


@given(length=st.integers(0, 1 << 20))
def test_frame_count(length):
    expected = 1 if length <= 3 else 1 + math.ceil((length - 3) / 7)
    assert frame_count(length) == expected


def test_800_byte_key_costs_115_full_frames():
    assert frame_count(800) == 115
    assert transmission_bit_cost(800, StuffingModel.none()) == 115 * 111
    assert transmission_bit_cost(32, StuffingModel.none()) == 6 * 111


def test_unpadded_bit_cost_uses_last_frame_length():
    # 0 bytes -> one 5-byte first frame
    assert transmission_bit_cost(0, StuffingModel.none(), pad=False) == 47 + 40
    # 12 bytes -> two full frames + a 3-byte consecutive frame
    assert transmission_bit_cost(12, StuffingModel.none(), pad=False) == 2 * 111 + 71


def test_sequence_number_0x10_is_not_a_restart():
    payload = bytes(range(256)) * 2
    frames = segment(payload, 0x010)
    assert frames[16].data[0] == 0x10
    result, state = _reassemble(frames)
    assert result.payload == payload
    assert not state.errors


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_dropped_interior_frame_is_a_sequence_gap(data):
    length = data.draw(st.integers(3 + 7 * 2, 65536))
    frames = segment(bytes(length), 0x020)
    dropped = data.draw(st.integers(1, len(frames) - 2))
    state = ReassemblyState()
    for frame in frames[:dropped]:
        assert feed(state, frame).status == "incomplete"
    result = feed(state, frames[dropped + 1])
    assert result.status == "error"
    assert result.error.kind == "sequence_gap"
    assert result.error.expected == dropped & 0xFF


def test_orphan_consecutive_frame():
    result = feed(ReassemblyState(), CanFrame(can_id=0x010, data=bytes([1]) + bytes(7)))
    assert result.status == "error"
    assert result.error.kind == "orphan"


def test_first_frame_mid_message_restarts():
    old = segment(bytes(100), 0x010)
    new_payload = b"fresh payload"
    state = ReassemblyState()
    for frame in old[:3]:
        feed(state, frame)
    result = None
    for frame in segment(new_payload, 0x010):
        result = feed(state, frame)
    assert result.payload == new_payload
    assert [e.kind for e in state.errors] == ["restart"]
    assert state.errors[0].expected == 100


@pytest.mark.parametrize("fed", [3, 17, 40, 200, 280])
def test_first_frame_restarts_a_long_message(fed):
    old = segment(bytes(range(256)) * 8, 0x010)
    new_payload = bytes(reversed(range(256))) * 2
    new = segment(new_payload, 0x010)
    assert len(old) == 293 and len(new) > 16

    state = ReassemblyState()
    for frame in old[:fed]:
        assert feed(state, frame).status == "incomplete"
    results = [feed(state, frame) for frame in new]
    assert all(r.status == "incomplete" for r in results[:-1])
    assert results[-1].payload == new_payload
    assert [e.kind for e in state.errors] == ["restart"]
    assert (state.errors[0].expected, state.errors[0].got) == (2048, 3 + 7 * (fed - 1))


def test_first_frame_one_sequence_ahead_reads_as_a_lost_frame():
    old = segment(bytes(1000), 0x010)
    state = ReassemblyState()
    for frame in old[:15]:
        feed(state, frame)
    result = feed(state, segment(b"fresh payload", 0x010)[0])
    assert result.status == "error"
    assert (result.error.kind, result.error.expected, result.error.got) == ("sequence_gap", 15, 0x10)


def test_messages_on_different_ids_are_independent():
    a, b = bytes(range(40)), bytes(range(100, 140))
    frames_a, frames_b = segment(a, 0x010), segment(b, 0x011)
    interleaved = [f for pair in zip(frames_a, frames_b) for f in pair]
    state = ReassemblyState()
    payloads = [r.payload for r in (feed(state, f) for f in interleaved) if r.complete]
    assert sorted(payloads) == sorted([a, b])


def test_empty_frame_is_malformed():
    result = feed(ReassemblyState(), CanFrame(can_id=0x010, data=b""))
    assert result.error.kind == "malformed"


def test_oversized_payload_rejected():
    with pytest.raises(ValueError):
        transmission_bit_cost(2 ** 32, StuffingModel.none())
