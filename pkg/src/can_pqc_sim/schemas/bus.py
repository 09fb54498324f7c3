"""
Bus simulation schema for can_pqc_sim.
Carries trace events and the background traffic generator configuration.
"""

from __future__ import annotations
from enum import Enum
from typing import Optional
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from can_pqc_sim.schemas.frame import CanFrame
from can_pqc_sim.utils.constants import (
    MAX_STANDARD_ID,
    MAX_DLC,
    BACKGROUND_ID_LOW,
    BACKGROUND_ID_HIGH,
)

# Nanoseconds since simulation start.
SimTime = int


class EventKind(str, Enum):
    TX_QUEUED = "tx_queued"
    TX_START = "tx_start"
    TX_END = "tx_end"
    RX_DELIVER = "rx_deliver"
    TIMEOUT_FIRED = "timeout_fired"


class BusEvent(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    time: SimTime
    kind: EventKind
    node: int
    frame: Optional[CanFrame] = None

    @model_validator(mode="after")
    def _frame_presence(self) -> "BusEvent":
        if self.kind is EventKind.TIMEOUT_FIRED:
            if self.frame is not None:
                raise ValueError("timeout_fired events carry no frame")
        elif self.frame is None:
            raise ValueError(f"{self.kind.value} events require a frame")
        return self

    def to_tsv(self) -> str:
        """time_ns, kind, node_id, can_id (hex), dlc, data (hex); '-' for absent fields."""
        if self.frame is None:
            return f"{self.time}\t{self.kind.value}\t{self.node}\t-\t-\t-"
        f = self.frame
        return f"{self.time}\t{self.kind.value}\t{self.node}\t{f.can_id:03x}\t{f.dlc}\t{f.data.hex()}"


class TrafficGenConfig(BaseModel):
    """
    Rate-paced background traffic: fixed-DLC frames with uniformly drawn IDs.
    """
    model_config = ConfigDict(frozen=True)

    target_load: float = 0.0
    id_low: int = BACKGROUND_ID_LOW
    id_high: int = BACKGROUND_ID_HIGH
    seed: int = 0
    dlc: int = MAX_DLC

    @field_validator("target_load")
    @classmethod
    def _validate_load(cls, v: float) -> float:
        if not (0.0 <= v <= 1.0):
            raise ValueError("target_load must be within [0, 1]")
        return v

    @field_validator("dlc")
    @classmethod
    def _validate_dlc(cls, v: int) -> int:
        if v != MAX_DLC:
            raise ValueError("background frames always carry 8 data bytes")
        return v

    @model_validator(mode="after")
    def _validate_id_range(self) -> "TrafficGenConfig":
        if not (0 <= self.id_low <= self.id_high <= MAX_STANDARD_ID):
            raise ValueError(
                f"id range must satisfy 0 <= id_low <= id_high <= 0x{MAX_STANDARD_ID:03X}"
            )
        return self
