"""
Bit-time model of CAN 2.0A frames: nominal length, stuffing models and
integer-nanosecond durations.
"""

import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from can_pqc_sim.core.can_frame import (
    bits_to_ns,
    duration_for_dlc,
    frame_duration,
    nominal_bit_length,
    nominal_bits_for_dlc,
    stuffed_bit_length,
    stuffed_bits_for_dlc,
)
from can_pqc_sim.schemas.frame import BitRate, CanFrame, StuffingModel

MODELS = [StuffingModel.none(), StuffingModel.worst_case(), StuffingModel.expected(0.05), StuffingModel.expected(0.25)]


def test_nominal_length_includes_interframe_space():
    assert nominal_bits_for_dlc(0) == 47
    assert nominal_bits_for_dlc(8) == 111
    assert nominal_bit_length(CanFrame(can_id=0x123, data=bytes(8))) == 111


def test_stuffing_models():
    assert stuffed_bits_for_dlc(8, StuffingModel.none()) == 111
    # 98 stuffable bits -> at most 24 stuff bits
    assert stuffed_bits_for_dlc(8, StuffingModel.worst_case()) == 135
    # round(0.05 * 98) = 5
    assert stuffed_bits_for_dlc(8, StuffingModel.expected(0.05)) == 116
    assert stuffed_bit_length(CanFrame(can_id=1, data=b""), StuffingModel.none()) == 47


def test_durations_at_preset_rates():
    frame = CanFrame(can_id=0x010, data=bytes(8))
    none = StuffingModel.none()
    assert frame_duration(frame, BitRate.mbps_1(), none) == 111_000
    assert frame_duration(frame, BitRate.kbps_500(), none) == 222_000
    assert frame_duration(frame, BitRate.kbps_125(), none) == 888_000
    assert duration_for_dlc(8, BitRate.mbps_1(), none) == 111_000


def test_bits_to_ns_rounds_half_up():
    assert bits_to_ns(1, BitRate(bits_per_second=3)) == 333_333_333
    assert bits_to_ns(2, BitRate(bits_per_second=3)) == 666_666_667


@given(dlc=st.integers(0, 7), model=st.sampled_from(MODELS))
def test_duration_strictly_increases_with_dlc(dlc, model):
    rate = BitRate.kbps_500()
    assert duration_for_dlc(dlc, rate, model) < duration_for_dlc(dlc + 1, rate, model)


@given(dlc=st.integers(0, 8))
def test_stuffing_never_shortens_a_frame(dlc):
    nominal = nominal_bits_for_dlc(dlc)
    for model in MODELS:
        assert nominal <= stuffed_bits_for_dlc(dlc, model) <= stuffed_bits_for_dlc(dlc, StuffingModel.worst_case())


def test_frame_validation():
    with pytest.raises(ValueError, match="can_id"):
        CanFrame(can_id=0x800, data=b"")
    with pytest.raises(ValueError, match="can_id"):
        CanFrame(can_id=-1, data=b"")
    with pytest.raises(ValueError, match="data"):
        CanFrame(can_id=0x7FF, data=bytes(9))
    frame = CanFrame(can_id=0x7FF, data=bytearray(8))
    assert frame.dlc == 8 and frame.data == bytes(8)
    assert frame == CanFrame(0x7FF, bytes(8)) and hash(frame) == hash(CanFrame(0x7FF, bytes(8)))
    with pytest.raises(AttributeError):
        frame.can_id = 1
    with pytest.raises(ValidationError):
        BitRate(bits_per_second=0)


def test_stuffing_model_parsing():
    assert StuffingModel.parse("none") == StuffingModel.none()
    assert StuffingModel.parse("worst_case").fraction == 0.0
    assert StuffingModel.parse("expected:0.1") == StuffingModel.expected(0.1)
    assert StuffingModel.parse({"expected": 0.2}).fraction == pytest.approx(0.2)
    assert StuffingModel(mode="none", fraction=0.2).fraction == 0.0
    assert str(StuffingModel.expected(0.05)) == "expected:0.05"
    with pytest.raises(ValueError):
        StuffingModel.parse("sometimes")
    with pytest.raises(ValidationError):
        StuffingModel.expected(0.3)
