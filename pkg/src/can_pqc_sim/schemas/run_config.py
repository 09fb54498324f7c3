"""
Run configuration schema for can_pqc_sim.

A run config is a YAML document with three sections:

    profiles: path/to/profiles.yaml      # optional; packaged profiles otherwise
    campaign:
      algorithms: [Kyber512, hqc-128]    # optional; default timed profiles otherwise
      configs: [high, mid, low]          # preset names or {name, cpu_hz, bit_rate}
      iterations: 100
      master_seed: 2025
      background_load: 0.0
      stuffing: expected:0.05            # none | worst_case | expected[:fraction]
      jitter_ms: 0
      receiver_timeout_ms: 2000
      compute_model: table_driven        # or cycle_based
      outlier_filter: none               # or mad
      inverted_priority: false
    output:
      directory: results
      format: both                       # csv | markdown | both
      trace_dump: false

Unknown keys are rejected.
"""

from __future__ import annotations
from typing import Any, List, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, field_validator

from can_pqc_sim.schemas.campaign import ECU_PRESETS, CampaignSpec, EcuConfig
from can_pqc_sim.schemas.frame import StuffingModel
from can_pqc_sim.utils.constants import (
    DEFAULT_RECEIVER_TIMEOUT_NS,
    ITERATIONS_DEFAULT,
    MASTER_SEED_DEFAULT,
    NS_PER_MS,
)


class CampaignSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    algorithms: Optional[List[str]] = None
    configs: List[EcuConfig] = Field(default_factory=lambda: list(ECU_PRESETS.values()))
    iterations: int = ITERATIONS_DEFAULT
    master_seed: int = MASTER_SEED_DEFAULT
    background_load: float = 0.0
    stuffing: StuffingModel = Field(default_factory=StuffingModel)
    jitter_ms: float = 0.0
    receiver_timeout_ms: float = DEFAULT_RECEIVER_TIMEOUT_NS / NS_PER_MS
    compute_model: Literal["table_driven", "cycle_based"] = "table_driven"
    outlier_filter: Literal["none", "mad"] = "none"
    inverted_priority: bool = False

    @field_validator("configs", mode="before")
    @classmethod
    def _presets(cls, v: Any) -> Any:
        if isinstance(v, list):
            return [EcuConfig.preset(c) if isinstance(c, str) else c for c in v]
        return v

    @field_validator("stuffing", mode="before")
    @classmethod
    def _parse_stuffing(cls, v: Any) -> Any:
        if isinstance(v, StuffingModel):
            return v
        return StuffingModel.parse(v)

    @field_validator("jitter_ms", "receiver_timeout_ms")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("durations must be >= 0")
        return v

    def to_spec(self, default_algorithms: List[str], record_trace: bool = False) -> CampaignSpec:
        """
        Raises:
            pydantic.ValidationError: if the resulting campaign is invalid.
        """
        return CampaignSpec(
            algorithms=self.algorithms if self.algorithms else default_algorithms,
            configs=self.configs,
            iterations=self.iterations,
            master_seed=self.master_seed,
            background_load=self.background_load,
            stuffing=self.stuffing,
            jitter_ns=int(round(self.jitter_ms * NS_PER_MS)),
            receiver_timeout_ns=int(round(self.receiver_timeout_ms * NS_PER_MS)),
            compute_model=self.compute_model,
            outlier_filter=self.outlier_filter,
            inverted_priority=self.inverted_priority,
            record_trace=record_trace,
        )


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    directory: str = "results"
    format: Literal["csv", "markdown", "both"] = "both"
    trace_dump: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    profiles: Optional[str] = None
    campaign: CampaignSection = Field(default_factory=CampaignSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @field_validator("profiles")
    @classmethod
    def _validate_profiles(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not v.strip():
            raise ValueError("profiles path must be non-empty when given")
        return v
