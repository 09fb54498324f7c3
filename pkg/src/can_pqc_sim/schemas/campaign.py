"""
Campaign schema for can_pqc_sim.
Carries ECU configurations, the campaign definition and per-cell metrics.
"""

from __future__ import annotations
from typing import Dict, List, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from can_pqc_sim.schemas.frame import BitRate, StuffingModel
from can_pqc_sim.utils.constants import (
    BIT_RATE_125K,
    BIT_RATE_500K,
    BIT_RATE_1M,
    CPU_HZ_HIGH,
    CPU_HZ_MID,
    CPU_HZ_LOW,
    DEFAULT_RECEIVER_TIMEOUT_NS,
    ITERATIONS_DEFAULT,
    MASTER_SEED_DEFAULT,
)


class EcuConfig(BaseModel):
    """
    Processing and bus constraints shared by both ECUs of a session.
    The three presets pair 300/200/120 MHz with 1 Mbps/500 kbps/125 kbps.
    """
    model_config = ConfigDict(frozen=True)

    name: str
    cpu_hz: int
    bit_rate: int

    @field_validator("name")
    @classmethod
    def _validate_name(cls, v: str) -> str:
        v = (v or "").strip()
        if not v:
            raise ValueError("config name must be non-empty")
        return v

    @field_validator("cpu_hz", "bit_rate")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("cpu_hz and bit_rate must be positive")
        return v

    @property
    def rate(self) -> BitRate:
        return BitRate(bits_per_second=self.bit_rate)

    @classmethod
    def preset(cls, name: str) -> "EcuConfig":
        try:
            return ECU_PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown ECU preset '{name}'; expected one of {sorted(ECU_PRESETS)}") from None


ECU_PRESETS: Dict[str, EcuConfig] = {
    "high": EcuConfig(name="high", cpu_hz=CPU_HZ_HIGH, bit_rate=BIT_RATE_1M),
    "mid": EcuConfig(name="mid", cpu_hz=CPU_HZ_MID, bit_rate=BIT_RATE_500K),
    "low": EcuConfig(name="low", cpu_hz=CPU_HZ_LOW, bit_rate=BIT_RATE_125K),
}


class CampaignSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    algorithms: List[str]
    configs: List[EcuConfig] = Field(default_factory=lambda: list(ECU_PRESETS.values()))
    iterations: int = ITERATIONS_DEFAULT
    master_seed: int = MASTER_SEED_DEFAULT
    background_load: float = 0.0
    stuffing: StuffingModel = Field(default_factory=StuffingModel)
    jitter_ns: int = 0
    receiver_timeout_ns: int = DEFAULT_RECEIVER_TIMEOUT_NS
    compute_model: Literal["table_driven", "cycle_based"] = "table_driven"
    outlier_filter: Literal["none", "mad"] = "none"
    inverted_priority: bool = False
    record_trace: bool = False

    @field_validator("algorithms")
    @classmethod
    def _validate_algorithms(cls, v: List[str]) -> List[str]:
        cleaned = [a.strip() for a in v if a and a.strip()]
        if not cleaned:
            raise ValueError("algorithms must not be empty")
        return cleaned

    @field_validator("configs")
    @classmethod
    def _validate_configs(cls, v: List[EcuConfig]) -> List[EcuConfig]:
        if not v:
            raise ValueError("configs must not be empty")
        names = [c.name for c in v]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate config names: {names}")
        return v

    @field_validator("iterations")
    @classmethod
    def _validate_iterations(cls, v: int) -> int:
        if v < 1:
            raise ValueError("iterations must be >= 1")
        return v

    @field_validator("background_load")
    @classmethod
    def _validate_load(cls, v: float) -> float:
        if not (0.0 <= v <= 1.0):
            raise ValueError("background_load must be within [0, 1]")
        return v

    @field_validator("jitter_ns")
    @classmethod
    def _validate_jitter(cls, v: int) -> int:
        if v < 0:
            raise ValueError("jitter must be >= 0")
        return v

    @field_validator("receiver_timeout_ns")
    @classmethod
    def _validate_timeout(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("receiver_timeout must be > 0")
        return v


class TimingStat(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_ms: float
    std_ms: float

    def __str__(self) -> str:
        return f"{self.mean_ms:.3f} ± {self.std_ms:.3f}"


class Metrics(BaseModel):
    """
    Aggregated statistics of one (algorithm, config) cell. Timing fields are
    computed over successful sessions only and are absent when none succeeded.
    op2/op3 are encapsulation/decapsulation (KEM) or signing/verification (DSA).
    """
    model_config = ConfigDict(frozen=True)

    algorithm: str
    kind: Literal["KEM", "DSA"]
    config: str
    cpu_hz: int
    bit_rate: int
    security_level: int
    n_iterations: int
    n_successful: int
    success_rate: float
    keygen: Optional[TimingStat] = None
    op2: Optional[TimingStat] = None
    op3: Optional[TimingStat] = None
    overhead: Optional[TimingStat] = None
    crypto_only: Optional[TimingStat] = None
    wall: Optional[TimingStat] = None
    bytes_on_wire_mean: Optional[float] = None
    nominal_ms: Optional[float] = None
    crypto_share: Optional[float] = None

    @model_validator(mode="after")
    def _validate_rate(self) -> "Metrics":
        if not (0.0 <= self.success_rate <= 1.0):
            raise ValueError("success_rate must be within [0, 1]")
        if self.n_successful > self.n_iterations:
            raise ValueError("n_successful cannot exceed n_iterations")
        return self
