"""
Compute-time models and crypto backends for can_pqc_sim.

The backend contract follows the NIST PQC API shape (keygen, encapsulate,
decapsulate, sign, verify). The bundled MockBackend produces pseudorandom
outputs of exactly the profile's sizes while keeping KEM correctness and
signature verification consistent, so protocol success is decided by the
same checks a real library would face. An adapter to a real PQC library
only has to implement CryptoBackend.
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import math
from functools import lru_cache
from typing import Dict, Literal, Optional, Protocol, Tuple

import numpy as np

from can_pqc_sim.schemas.campaign import EcuConfig
from can_pqc_sim.schemas.profile import (
    AlgorithmProfile,
    ComputeTimeModel,
    CycleBasedModel,
    OpTiming,
)
from can_pqc_sim.utils.constants import NS_PER_MS, NS_PER_SECOND, OPTIONAL_OPS

logger = logging.getLogger("crypto_model")

_NONCE_BYTES = 16
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# Below this coefficient of variation censoring at zero moves the mean by < 1e-4 std.
_CALIBRATION_CV = 0.25

Fault = Optional[Literal["mismatched_keypair", "tampered_signature"]]


class ComputeModelError(ValueError):
    """Raised when an (operation, config) pair has no timing in the model."""
    pass


class CryptoBackend(Protocol):
    def keygen(self) -> Tuple[bytes, bytes]:
        ...

    def encapsulate(self, pk: bytes) -> Tuple[bytes, bytes]:
        ...

    def decapsulate(self, sk: bytes, ct: bytes) -> bytes:
        ...

    def sign(self, sk: bytes, msg: bytes) -> bytes:
        ...

    def verify(self, pk: bytes, msg: bytes, sig: bytes) -> bool:
        ...


def _expand(label: bytes, seed: bytes, size: int) -> bytes:
    if size <= 0:
        return b""
    return hashlib.shake_256(label + seed).digest(size)


class MockBackend:
    """
    Size-faithful stand-in for a PQC library.

    Shared secrets are a function of (key-pair nonce, ciphertext nonce);
    signatures are bound to (key-pair nonce, SHA-256 of the message).
    Decapsulating an unknown ciphertext or with an unknown key yields an
    implicit-rejection secret that never matches.

    Args:
        profile (AlgorithmProfile): Sizes of every output.
        rng (np.random.Generator): Stream for key and ciphertext nonces.
        fault: Optional injected fault, "mismatched_keypair" (decapsulation
            uses an unrelated key) or "tampered_signature" (one signature
            byte flipped after signing).
    """

    def __init__(self, profile: AlgorithmProfile, rng: np.random.Generator, fault: Fault = None) -> None:
        self.profile = profile
        self.rng = rng
        self.fault = fault
        self._pk_nonce: Dict[bytes, bytes] = {}
        self._sk_nonce: Dict[bytes, bytes] = {}
        self._ct_nonce: Dict[bytes, bytes] = {}

    def keygen(self) -> Tuple[bytes, bytes]:
        nonce = self.rng.bytes(_NONCE_BYTES)
        sizes = self.profile.sizes
        pk = _expand(b"pk", nonce, sizes.public_key)
        sk = _expand(b"sk", nonce, sizes.secret_key)
        self._pk_nonce[pk] = nonce
        self._sk_nonce[sk] = nonce
        return pk, sk

    def encapsulate(self, pk: bytes) -> Tuple[bytes, bytes]:
        self._require("KEM", "encapsulate")
        kp = self._pk_nonce.get(pk) or _expand(b"unknown-pk", pk, _NONCE_BYTES)
        ct_nonce = self.rng.bytes(_NONCE_BYTES)
        ct = _expand(b"ct", ct_nonce, self.profile.sizes.ciphertext or 0)
        self._ct_nonce[ct] = ct_nonce
        return ct, _expand(b"ss", kp + ct_nonce, self.profile.sizes.shared_secret or 0)

    def decapsulate(self, sk: bytes, ct: bytes) -> bytes:
        self._require("KEM", "decapsulate")
        size = self.profile.sizes.shared_secret or 0
        kp = self._sk_nonce.get(sk)
        ct_nonce = self._ct_nonce.get(ct)
        if kp is None or ct_nonce is None:
            return _expand(b"reject", sk + ct, size)
        if self.fault == "mismatched_keypair":
            kp = _expand(b"mismatch", kp, _NONCE_BYTES)
        return _expand(b"ss", kp + ct_nonce, size)

    def sign(self, sk: bytes, msg: bytes) -> bytes:
        self._require("DSA", "sign")
        kp = self._sk_nonce.get(sk) or _expand(b"unknown-sk", sk, _NONCE_BYTES)
        sig = self._signature(kp, msg)
        if self.fault == "tampered_signature" and sig:
            sig = sig[:-1] + bytes([sig[-1] ^ 0x01])
        return sig

    def verify(self, pk: bytes, msg: bytes, sig: bytes) -> bool:
        self._require("DSA", "verify")
        kp = self._pk_nonce.get(pk)
        if kp is None or len(sig) != (self.profile.sizes.signature or 0):
            return False
        return hmac.compare_digest(sig, self._signature(kp, msg))

    def _signature(self, kp: bytes, msg: bytes) -> bytes:
        return _expand(b"sig", kp + hashlib.sha256(msg).digest(), self.profile.sizes.signature or 0)

    def _require(self, kind: str, op: str) -> None:
        if self.profile.kind != kind:
            raise ComputeModelError(f"{op} is not an operation of {self.profile.kind} profile '{self.profile.name}'")


def _censored_moments(t: float) -> Tuple[float, float]:
    """First and second moment of max(0, Z + t), Z standard normal."""
    cdf = 0.5 * math.erfc(-t / _SQRT2)
    pdf = _INV_SQRT_2PI * math.exp(-0.5 * t * t)
    first = t * cdf + pdf
    second = (t * t + 1.0) * cdf + t * pdf
    return first, second


def _censored_cv(t: float) -> float:
    first, second = _censored_moments(t)
    return math.sqrt(max(second - first * first, 0.0)) / first


@lru_cache(maxsize=4096)
def censored_normal_params(mean: float, std: float) -> Tuple[float, float]:
    """
    Location and scale of a normal whose draws, clamped at zero, have the
    given mean and standard deviation.
    """
    if mean <= 0.0 or std <= 0.0:
        return mean, std
    cv = std / mean
    if cv <= _CALIBRATION_CV:
        return mean, std
    lo, hi = -8.0, 8.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _censored_cv(mid) > cv:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    scale = mean / _censored_moments(t)[0]
    logger.debug(f"[Crypto] censored normal for {mean}±{std} ms: loc={t * scale:.6f}, scale={scale:.6f}")
    return t * scale, scale


def _draw_ms(timing: OpTiming, sampling: str, rng: np.random.Generator) -> float:
    if timing.std_ms == 0.0:
        return timing.mean_ms
    if sampling == "calibrated":
        loc, scale = censored_normal_params(timing.mean_ms, timing.std_ms)
    else:
        loc, scale = timing.mean_ms, timing.std_ms
    return max(0.0, float(rng.normal(loc, scale)))


def sample_op_time(
        profile: AlgorithmProfile,
        op: str,
        config: EcuConfig,
        rng: np.random.Generator,
        model: Optional[ComputeTimeModel] = None,
) -> int:
    """
    Duration of one cryptographic operation, in nanoseconds.

    Args:
        profile (AlgorithmProfile): Algorithm being timed.
        op (str): keygen/encapsulate/decapsulate (KEM), keygen/sign/verify (DSA),
            or the optional "message" generation step.
        config (EcuConfig): ECU configuration; table lookups use its name,
            cycle-based models its cpu_hz.
        rng (np.random.Generator): Stream used for table-driven draws.
        model: Compute model; defaults to the profile's timing table.

    Raises:
        ComputeModelError: if the op is invalid for the profile kind or the
            model has no entry for (op, config).
    """
    if op not in profile.operations and op not in OPTIONAL_OPS:
        raise ComputeModelError(f"'{op}' is not an operation of {profile.kind} profile '{profile.name}'")
    model = model if model is not None else profile.timings
    if model is None:
        raise ComputeModelError(f"profile '{profile.name}' has no timing table")

    if isinstance(model, CycleBasedModel):
        cycles = model.work_cycles.get(op)
        if cycles is None:
            if op in OPTIONAL_OPS:
                return 0
            raise ComputeModelError(f"no work_cycles for '{op}' in profile '{profile.name}'")
        return (cycles * NS_PER_SECOND * 2 + config.cpu_hz) // (2 * config.cpu_hz)

    table = model.timings.get(config.name)
    if table is None:
        raise ComputeModelError(f"profile '{profile.name}' has no timings for config '{config.name}'")
    timing = table.get(op)
    if timing is None:
        if op in OPTIONAL_OPS:
            return 0
        raise ComputeModelError(f"profile '{profile.name}' has no '{op}' timing for config '{config.name}'")
    return int(_draw_ms(timing, model.sampling, rng) * NS_PER_MS + 0.5)


def cycles_from_table(
        profile: AlgorithmProfile,
        reference: EcuConfig,
) -> CycleBasedModel:
    """
    Derive a cycle-based model from the timing table: work_cycles(op) =
    mean_ms(op, reference) * reference.cpu_hz / 1000.

    Raises:
        ComputeModelError: if the profile has no table entry for the reference config.
    """
    if profile.cycles is not None:
        return profile.cycles
    if profile.timings is None or reference.name not in profile.timings.timings:
        raise ComputeModelError(
            f"profile '{profile.name}' has neither work_cycles nor a '{reference.name}' timing table"
        )
    table = profile.timings.timings[reference.name]
    return CycleBasedModel(work_cycles={
        op: int(timing.mean_ms * reference.cpu_hz / 1000 + 0.5) for op, timing in table.items()
    })


def resolve_compute_model(
        profile: AlgorithmProfile,
        kind: Literal["table_driven", "cycle_based"],
        reference: EcuConfig,
) -> ComputeTimeModel:
    """Pick the compute model a campaign asked for."""
    if kind == "cycle_based":
        return cycles_from_table(profile, reference)
    if profile.timings is None:
        raise ComputeModelError(
            f"profile '{profile.name}' carries sizes only; use the cycle_based model with work_cycles"
        )
    return profile.timings


class ComputeSampler:
    """
    Compute model bound to one ECU config and one random stream; the form in
    which protocol sessions consume compute times.
    """

    def __init__(
            self,
            profile: AlgorithmProfile,
            config: EcuConfig,
            rng: np.random.Generator,
            model: Optional[ComputeTimeModel] = None,
    ) -> None:
        self.profile = profile
        self.config = config
        self.rng = rng
        self.model = model

    def duration(self, op: str) -> int:
        return sample_op_time(self.profile, op, self.config, self.rng, self.model)
