"""
Session schema for can_pqc_sim.
Parameters and outcome of one KEM handshake or DSA exchange between two ECUs.
"""

from __future__ import annotations
from typing import Literal, Optional
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from can_pqc_sim.utils.constants import (
    MAX_STANDARD_ID,
    DEFAULT_ALICE_ID,
    DEFAULT_BOB_ID,
    DEFAULT_RECEIVER_TIMEOUT_NS,
    DSA_MESSAGE_LENGTH,
)

FailureReason = Literal["none", "timeout", "crypto_mismatch"]


class SessionConfig(BaseModel):
    """
    Args:
        algorithm (str): Profile name.
        receiver_timeout_ns (int): How long a receiver waits for the first
            frame of a message once it starts listening.
        jitter_ns (int): J; Bob starts listening at a uniform offset in [0, J].
        alice_id (int): Identifier carrying Alice's messages.
        bob_id (int): Identifier carrying Bob's messages.
        message_length (int): Bytes of the random DSA message.
    """
    model_config = ConfigDict(frozen=True)

    algorithm: str
    receiver_timeout_ns: int = DEFAULT_RECEIVER_TIMEOUT_NS
    jitter_ns: int = 0
    alice_id: int = DEFAULT_ALICE_ID
    bob_id: int = DEFAULT_BOB_ID
    message_length: int = DSA_MESSAGE_LENGTH

    @field_validator("receiver_timeout_ns")
    @classmethod
    def _validate_timeout(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("receiver_timeout must be > 0")
        return v

    @field_validator("jitter_ns", "message_length")
    @classmethod
    def _non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("jitter and message_length must be >= 0")
        return v

    @field_validator("alice_id", "bob_id")
    @classmethod
    def _validate_id(cls, v: int) -> int:
        if not (0 <= v <= MAX_STANDARD_ID):
            raise ValueError(f"CAN identifiers must be within 0x000..0x{MAX_STANDARD_ID:03X}")
        return v

    @model_validator(mode="after")
    def _distinct_ids(self) -> "SessionConfig":
        if self.alice_id == self.bob_id:
            raise ValueError("alice_id and bob_id must differ")
        return self


class SessionResult(BaseModel):
    """
    Outcome of one session. Durations are nanoseconds; an operation that
    never ran is None. op2/op3 are encapsulate/decapsulate (KEM) or
    sign/verify (DSA); message_ns is the DSA message generation time.
    """
    model_config = ConfigDict(frozen=True)

    algorithm: str
    kind: Literal["KEM", "DSA"]
    config: str
    seed: int = 0
    success: bool
    failure_reason: FailureReason = "none"
    keygen_ns: Optional[int] = None
    op2_ns: Optional[int] = None
    op3_ns: Optional[int] = None
    message_ns: Optional[int] = None
    wall_clock_total_ns: Optional[int] = None
    crypto_only_ns: Optional[int] = None
    bytes_on_wire: int = 0
    frames_on_wire: int = 0

    @model_validator(mode="after")
    def _validate_outcome(self) -> "SessionResult":
        if self.success != (self.failure_reason == "none"):
            raise ValueError("success requires failure_reason 'none' and failure requires a reason")
        for name in ("keygen_ns", "op2_ns", "op3_ns", "message_ns", "wall_clock_total_ns",
                     "crypto_only_ns", "bytes_on_wire", "frames_on_wire"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")
        return self
