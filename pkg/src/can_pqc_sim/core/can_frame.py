"""
On-wire bit-time cost of CAN 2.0A data frames.

All durations are integer nanoseconds so that event ordering in the bus
simulator is exact and traces are bit-reproducible.
"""

from __future__ import annotations

import math

from can_pqc_sim.schemas.frame import BitRate, CanFrame, StuffingModel
from can_pqc_sim.utils.constants import (
    FIXED_FRAME_BITS,
    INTERFRAME_SPACE_BITS,
    STUFFABLE_FIXED_BITS,
    NS_PER_SECOND,
)


def nominal_bits_for_dlc(dlc: int) -> int:
    return FIXED_FRAME_BITS + INTERFRAME_SPACE_BITS + 8 * dlc


def stuffed_bits_for_dlc(dlc: int, model: StuffingModel) -> int:
    nominal = nominal_bits_for_dlc(dlc)
    stuffable = STUFFABLE_FIXED_BITS + 8 * dlc
    if model.mode == "none":
        return nominal
    if model.mode == "worst_case":
        return nominal + (stuffable - 1) // 4
    return nominal + math.floor(model.fraction * stuffable + 0.5)


def nominal_bit_length(frame: CanFrame) -> int:
    """
    Unstuffed frame length in bits, including the 3-bit interframe space.

    Returns:
        int: 47 + 8 * dlc.
    """
    return nominal_bits_for_dlc(frame.dlc)


def stuffed_bit_length(frame: CanFrame, model: StuffingModel) -> int:
    """
    Frame length in bits after applying the stuffing model.
    Stuffing applies from SOF through the CRC sequence (34 + 8 * dlc bits).
    """
    return stuffed_bits_for_dlc(frame.dlc, model)


def bits_to_ns(bits: int, rate: BitRate) -> int:
    """Exact bit-time in nanoseconds, rounded half up."""
    bps = rate.bits_per_second
    return (bits * NS_PER_SECOND * 2 + bps) // (2 * bps)


def frame_duration(frame: CanFrame, rate: BitRate, model: StuffingModel) -> int:
    """
    Time the frame occupies the bus, in integer nanoseconds.

    Args:
        frame (CanFrame): The frame to transmit.
        rate (BitRate): Bus bit rate.
        model (StuffingModel): Stuffing model applied to the frame.

    Returns:
        int: stuffed_bit_length / bits_per_second, in ns (round half up).
    """
    return bits_to_ns(stuffed_bit_length(frame, model), rate)


def duration_for_dlc(dlc: int, rate: BitRate, model: StuffingModel) -> int:
    return bits_to_ns(stuffed_bits_for_dlc(dlc, model), rate)
