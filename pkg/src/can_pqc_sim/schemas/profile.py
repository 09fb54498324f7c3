"""
Algorithm profile schema for can_pqc_sim.
Defines sizes, compute-time models and published reference values for one
post-quantum parameter set.
"""

from __future__ import annotations
from typing import Dict, Literal, Optional, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from can_pqc_sim.utils.constants import KEM_OPS, DSA_OPS, OPTIONAL_OPS


class OpTiming(BaseModel):
    """Mean and standard deviation of one operation, in milliseconds."""
    model_config = ConfigDict(frozen=True)

    mean_ms: float
    std_ms: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _from_pair(cls, data):
        if isinstance(data, (list, tuple)):
            if len(data) != 2:
                raise ValueError("timing pairs must be [mean_ms, std_ms]")
            return {"mean_ms": data[0], "std_ms": data[1]}
        if isinstance(data, (int, float)):
            return {"mean_ms": data, "std_ms": 0.0}
        return data

    @field_validator("mean_ms", "std_ms")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("timings must be >= 0")
        return v


class TableDrivenModel(BaseModel):
    """
    Per-ECU-config timing tables: {config: {op: OpTiming}}.

    sampling:
        calibrated: normal distribution censored at zero, with location and
                    scale solved so the censored draws keep mean_ms/std_ms.
        raw:        normal(mean_ms, std_ms) clamped at zero.
    """
    model_config = ConfigDict(frozen=True)

    model: Literal["table_driven"] = "table_driven"
    sampling: Literal["calibrated", "raw"] = "calibrated"
    timings: Dict[str, Dict[str, OpTiming]]

    @model_validator(mode="before")
    @classmethod
    def _from_flat(cls, data):
        # profile files list config tables directly next to `sampling`
        if isinstance(data, dict) and "timings" not in data:
            flat = dict(data)
            nested = {k: flat.pop(k) for k in list(flat) if k not in ("model", "sampling")}
            flat["timings"] = nested
            return flat
        return data

    @field_validator("timings")
    @classmethod
    def _non_empty(cls, v: Dict[str, Dict[str, OpTiming]]) -> Dict[str, Dict[str, OpTiming]]:
        if not v:
            raise ValueError("timing table must list at least one config")
        return v

    def configs(self) -> Tuple[str, ...]:
        return tuple(self.timings)


class CycleBasedModel(BaseModel):
    """Work cycles per operation; duration = work_cycles / cpu_hz."""
    model_config = ConfigDict(frozen=True)

    model: Literal["cycle_based"] = "cycle_based"
    work_cycles: Dict[str, int]

    @field_validator("work_cycles")
    @classmethod
    def _non_negative(cls, v: Dict[str, int]) -> Dict[str, int]:
        for op, cycles in v.items():
            if cycles < 0:
                raise ValueError(f"work_cycles for '{op}' must be >= 0")
        return v


ComputeTimeModel = Union[TableDrivenModel, CycleBasedModel]


class ProfileSizes(BaseModel):
    model_config = ConfigDict(frozen=True)

    public_key: int
    secret_key: int
    ciphertext: Optional[int] = None
    shared_secret: Optional[int] = None
    signature: Optional[int] = None

    @model_validator(mode="after")
    def _non_negative(self) -> "ProfileSizes":
        for name in ("public_key", "secret_key", "ciphertext", "shared_secret", "signature"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} size must be >= 0")
        return self


class ReferenceValues(BaseModel):
    """Published results for one ECU config; reporting only, never simulated."""
    model_config = ConfigDict(frozen=True)

    overhead: Optional[OpTiming] = None
    nominal: Optional[OpTiming] = None
    success_rate: Optional[float] = None

    @field_validator("success_rate")
    @classmethod
    def _rate(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (0.0 <= v <= 1.0):
            raise ValueError("success_rate must be within [0, 1]")
        return v


class AlgorithmProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: Literal["KEM", "DSA"]
    family: str = ""
    security_level: Literal[1, 2, 3, 5]
    sizes: ProfileSizes
    size_source: str = ""
    timing_source: str = ""
    campaign_default: bool = True
    timings: Optional[TableDrivenModel] = None
    cycles: Optional[CycleBasedModel] = None
    reference: Dict[str, ReferenceValues] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _validate_name(cls, v: str) -> str:
        v = (v or "").strip()
        if not v:
            raise ValueError("name must be a non-empty string")
        return v

    @model_validator(mode="after")
    def _validate_kind_sizes(self) -> "AlgorithmProfile":
        s = self.sizes
        if self.kind == "KEM":
            if s.ciphertext is None or s.shared_secret is None:
                raise ValueError("KEM profiles require ciphertext and shared_secret sizes")
            if s.signature is not None:
                raise ValueError("KEM profiles carry no signature size")
        else:
            if s.signature is None:
                raise ValueError("DSA profiles require a signature size")
            if s.ciphertext is not None or s.shared_secret is not None:
                raise ValueError("DSA profiles carry no ciphertext or shared_secret size")
        allowed = set(self.operations) | set(OPTIONAL_OPS)
        for model_ops in self._declared_ops():
            unknown = set(model_ops) - allowed
            if unknown:
                raise ValueError(f"operations {sorted(unknown)} are not valid for {self.kind}")
        return self

    def _declared_ops(self):
        if self.timings is not None:
            for table in self.timings.timings.values():
                yield table.keys()
        if self.cycles is not None:
            yield self.cycles.work_cycles.keys()

    @property
    def operations(self) -> Tuple[str, ...]:
        return KEM_OPS if self.kind == "KEM" else DSA_OPS
