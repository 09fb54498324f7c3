"""
Segmentation and reassembly of long payloads over 8-byte CAN frames.

Wire format (normative, bit-exact):

    first frame:       byte0 = 0x10
                       bytes1-4 = payload length, 32-bit big-endian
                       bytes5-7 = first 3 payload bytes
    consecutive frame: byte0 = sequence number mod 256, starting at 1
                       bytes1-7 = next 7 payload bytes

Frames are padded to 8 bytes with 0x00 unless `pad=False`, in which case
only the last frame may be short. There is no flow control; the message
identity is the CAN identifier, one message in flight per identifier.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict

from can_pqc_sim.core.can_frame import stuffed_bits_for_dlc
from can_pqc_sim.schemas.frame import CanFrame, StuffingModel
from can_pqc_sim.utils.constants import (
    FIRST_FRAME_MARKER,
    FIRST_FRAME_PAYLOAD,
    CONSECUTIVE_FRAME_PAYLOAD,
    MAX_PAYLOAD_LENGTH,
    MAX_DLC,
    PADDING_BYTE,
)

logger = logging.getLogger("transport")

_FIRST_HEADER = 5
_PAD = bytes([PADDING_BYTE]) * MAX_DLC


def frame_count(length: int) -> int:
    """Number of frames segment() emits for a payload of `length` bytes."""
    if length <= FIRST_FRAME_PAYLOAD:
        return 1
    return 1 + math.ceil((length - FIRST_FRAME_PAYLOAD) / CONSECUTIVE_FRAME_PAYLOAD)


def _check_length(length: int) -> None:
    if length < 0 or length > MAX_PAYLOAD_LENGTH:
        raise ValueError(f"payload length {length} does not fit the 32-bit length field")


def segment(payload: bytes, can_id: int, pad: bool = True) -> List[CanFrame]:
    """
    Split `payload` into first + consecutive frames on `can_id`.

    Raises:
        ValueError: if the payload is 2^32 bytes or longer.
    """
    length = len(payload)
    _check_length(length)
    head = bytes([FIRST_FRAME_MARKER]) + length.to_bytes(4, "big") + payload[:FIRST_FRAME_PAYLOAD]
    chunks = [head]
    seq = 1
    for offset in range(FIRST_FRAME_PAYLOAD, length, CONSECUTIVE_FRAME_PAYLOAD):
        chunks.append(bytes([seq & 0xFF]) + payload[offset:offset + CONSECUTIVE_FRAME_PAYLOAD])
        seq += 1
    last = len(chunks) - 1
    return [
        CanFrame(can_id, (data + _PAD)[:MAX_DLC] if pad or i < last else data)
        for i, data in enumerate(chunks)
    ]


def transmission_bit_cost(payload_length: int, stuffing: StuffingModel, pad: bool = True) -> int:
    """
    Total stuffed bits of every frame segment() would emit for the payload.
    """
    _check_length(payload_length)
    count = frame_count(payload_length)
    full = stuffed_bits_for_dlc(MAX_DLC, stuffing)
    if pad:
        return count * full
    if count == 1:
        last_dlc = _FIRST_HEADER + payload_length
    else:
        tail = (payload_length - FIRST_FRAME_PAYLOAD) - (count - 2) * CONSECUTIVE_FRAME_PAYLOAD
        last_dlc = 1 + tail
    return (count - 1) * full + stuffed_bits_for_dlc(last_dlc, stuffing)


class TransportError(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["sequence_gap", "orphan", "restart", "malformed"]
    can_id: int
    expected: Optional[int] = None
    got: Optional[int] = None


class FeedResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: Literal["incomplete", "complete", "error"]
    payload: Optional[bytes] = None
    error: Optional[TransportError] = None

    @property
    def complete(self) -> bool:
        return self.status == "complete"


_INCOMPLETE = FeedResult(status="incomplete")


class _Message:
    __slots__ = ("expected", "next_seq", "buffer")

    def __init__(self, expected: int) -> None:
        self.expected = expected
        self.next_seq = 1
        self.buffer = bytearray()

    @property
    def received(self) -> int:
        return len(self.buffer)


class ReassemblyState:
    """
    Per-CAN-ID reassembly buffers. Single owner; not shared across threads.

    Errors that do not end the current feed (a restart by a new first frame)
    are appended to `errors`; `feed()` returns the outcome for the frame itself.
    """

    def __init__(self) -> None:
        self.messages: Dict[int, _Message] = {}
        self.errors: List[TransportError] = []

    def reset(self, can_id: Optional[int] = None) -> None:
        if can_id is None:
            self.messages.clear()
        else:
            self.messages.pop(can_id, None)


def _error(state: ReassemblyState, error: TransportError) -> FeedResult:
    state.errors.append(error)
    logger.debug(f"[Transport] {error.kind} on 0x{error.can_id:03X} (expected={error.expected}, got={error.got})")
    return FeedResult(status="error", error=error)


def _is_first_frame(msg: Optional[_Message], data: bytes) -> bool:
    """
    Consecutive frame 16 (mod 256) also starts with 0x10. While a message is
    in progress, a 0x10 frame is a consecutive frame only when 0x10 is the
    expected sequence number or the one right after it (a single lost frame);
    any other 0x10 frame of at least 5 bytes restarts reassembly.
    """
    if data[0] != FIRST_FRAME_MARKER or len(data) < _FIRST_HEADER:
        return False
    if msg is None:
        return True
    expected = msg.next_seq & 0xFF
    return FIRST_FRAME_MARKER not in (expected, (expected + 1) & 0xFF)


def first_frame_length(frame: CanFrame) -> Optional[int]:
    """Declared payload length if `frame` can start a message, else None."""
    data = frame.data
    if len(data) < _FIRST_HEADER or data[0] != FIRST_FRAME_MARKER:
        return None
    return int.from_bytes(data[1:_FIRST_HEADER], "big")


def _take(msg: _Message, data: bytes) -> None:
    room = msg.expected - msg.received
    msg.buffer += data[:room]


def feed(state: ReassemblyState, frame: CanFrame) -> FeedResult:
    """
    Feed one frame into the reassembly state.

    Returns:
        FeedResult: incomplete, complete(payload) once the declared length is
        reached, or error(sequence_gap | orphan | malformed). A first frame
        arriving mid-message aborts the previous message, records
        error(restart) in `state.errors` and starts the new message.
    """
    data = frame.data
    can_id = frame.can_id
    if not data:
        return _error(state, TransportError(kind="malformed", can_id=can_id))

    if _is_first_frame(state.messages.get(can_id), data):
        previous = state.messages.pop(can_id, None)
        if previous is not None:
            state.errors.append(TransportError(
                kind="restart", can_id=can_id, expected=previous.expected, got=previous.received,
            ))
            logger.debug(f"[Transport] restart on 0x{can_id:03X} after {previous.received}/{previous.expected} bytes")
        msg = _Message(int.from_bytes(data[1:_FIRST_HEADER], "big"))
        _take(msg, data[_FIRST_HEADER:])
        if msg.received == msg.expected:
            return FeedResult(status="complete", payload=bytes(msg.buffer))
        state.messages[can_id] = msg
        return _INCOMPLETE

    msg = state.messages.get(can_id)
    if msg is None:
        return _error(state, TransportError(kind="orphan", can_id=can_id, got=data[0]))
    expected_seq = msg.next_seq & 0xFF
    if data[0] != expected_seq:
        del state.messages[can_id]
        return _error(state, TransportError(
            kind="sequence_gap", can_id=can_id, expected=expected_seq, got=data[0],
        ))
    msg.next_seq += 1
    _take(msg, data[1:])
    if msg.received == msg.expected:
        del state.messages[can_id]
        return FeedResult(status="complete", payload=bytes(msg.buffer))
    return _INCOMPLETE
