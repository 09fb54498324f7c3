"""
CAN 2.0A frame schema for can_pqc_sim.
Defines CanFrame (a slotted value), BitRate and StuffingModel with strict validation.
"""

from __future__ import annotations
from typing import Any, Literal, Union
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from can_pqc_sim.utils.constants import (
    MAX_STANDARD_ID,
    MAX_DLC,
    MAX_STUFFING_FRACTION,
    DEFAULT_STUFFING_FRACTION,
    BIT_RATE_125K,
    BIT_RATE_500K,
    BIT_RATE_1M,
)


class CanFrame:
    """
    One standard (11-bit identifier) data frame.
    The DLC is always the data length; remote and extended frames are not modeled.

    Immutable slotted value checked on construction. One is built per wire
    frame, so it is a plain class rather than a pydantic model.

    Raises:
        ValueError: if the identifier is outside 0x000..0x7FF or the data
            is longer than 8 bytes.
    """

    __slots__ = ("can_id", "data")

    def __init__(self, can_id: int, data: bytes = b"") -> None:
        if not (0 <= can_id <= MAX_STANDARD_ID):
            raise ValueError(f"can_id must be within 0x000..0x{MAX_STANDARD_ID:03X}, got 0x{can_id:X}")
        if len(data) > MAX_DLC:
            raise ValueError(f"data must be 0..{MAX_DLC} bytes, got {len(data)}")
        object.__setattr__(self, "can_id", can_id)
        object.__setattr__(self, "data", bytes(data))

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("CanFrame is immutable")

    @property
    def dlc(self) -> int:
        return len(self.data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CanFrame):
            return NotImplemented
        return self.can_id == other.can_id and self.data == other.data

    def __hash__(self) -> int:
        return hash((self.can_id, self.data))

    def __repr__(self) -> str:
        return f"CanFrame(can_id=0x{self.can_id:03X}, data={self.data!r})"

    def __str__(self) -> str:
        return f"0x{self.can_id:03X} [{self.dlc}] {self.data.hex()}"


class BitRate(BaseModel):
    model_config = ConfigDict(frozen=True)

    bits_per_second: int

    @field_validator("bits_per_second")
    @classmethod
    def _validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("bits_per_second must be positive")
        return v

    @classmethod
    def kbps_125(cls) -> "BitRate":
        return cls(bits_per_second=BIT_RATE_125K)

    @classmethod
    def kbps_500(cls) -> "BitRate":
        return cls(bits_per_second=BIT_RATE_500K)

    @classmethod
    def mbps_1(cls) -> "BitRate":
        return cls(bits_per_second=BIT_RATE_1M)


class StuffingModel(BaseModel):
    """
    How many stuff bits to add on top of the nominal frame length.

    - none: no stuff bits
    - worst_case: one stuff bit per four bits after the first in the stuffable region
    - expected: a fixed fraction of the stuffable region, in [0, 0.25]
    """
    model_config = ConfigDict(frozen=True)

    mode: Literal["none", "worst_case", "expected"] = "expected"
    fraction: float = DEFAULT_STUFFING_FRACTION

    @field_validator("fraction")
    @classmethod
    def _validate_fraction(cls, v: float) -> float:
        if not (0.0 <= v <= MAX_STUFFING_FRACTION):
            raise ValueError(f"fraction must be within [0, {MAX_STUFFING_FRACTION}]")
        return v

    @model_validator(mode="before")
    @classmethod
    def _drop_fraction_unless_expected(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("mode", "expected") != "expected":
            data = {**data, "fraction": 0.0}
        return data

    @classmethod
    def none(cls) -> "StuffingModel":
        return cls(mode="none", fraction=0.0)

    @classmethod
    def worst_case(cls) -> "StuffingModel":
        return cls(mode="worst_case", fraction=0.0)

    @classmethod
    def expected(cls, fraction: float = DEFAULT_STUFFING_FRACTION) -> "StuffingModel":
        return cls(mode="expected", fraction=fraction)

    @classmethod
    def parse(cls, value: Union[str, dict, "StuffingModel", Any]) -> "StuffingModel":
        """
        Accept "none", "worst_case", "expected", "expected:0.1",
        {"expected": 0.1} or a mapping of the model's own fields.
        """
        if isinstance(value, StuffingModel):
            return value
        if isinstance(value, dict):
            if "mode" in value:
                return cls(**value)
            if len(value) == 1 and "expected" in value:
                return cls.expected(float(value["expected"]))
            raise ValueError(f"unrecognised stuffing mapping: {value}")
        text = str(value).strip().lower()
        if text == "none":
            return cls.none()
        if text in ("worst_case", "worst-case"):
            return cls.worst_case()
        if text == "expected":
            return cls.expected()
        if text.startswith("expected:"):
            return cls.expected(float(text.split(":", 1)[1]))
        raise ValueError(f"unrecognised stuffing model: {value!r}")

    def __str__(self) -> str:
        if self.mode == "expected":
            return f"expected:{self.fraction:g}"
        return self.mode
