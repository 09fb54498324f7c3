"""
Shared fixtures: the packaged profiles and builders for synthetic profiles
with fixed (zero-variance) operation timings.
"""

from typing import Dict, Optional

import pytest

from can_pqc_sim.config.config import default_profiles_path
from can_pqc_sim.core.profiles import index_profiles, load_profiles
from can_pqc_sim.schemas.profile import AlgorithmProfile, OpTiming, ProfileSizes, TableDrivenModel


def _table(ops: Dict[str, float], configs) -> TableDrivenModel:
    return TableDrivenModel(timings={
        config: {op: OpTiming(mean_ms=ms) for op, ms in ops.items()} for config in configs
    })


def make_kem(
        name: str = "TestKEM",
        pk: int = 800,
        ct: int = 768,
        ss: int = 32,
        keygen: float = 0.05,
        encapsulate: float = 0.06,
        decapsulate: float = 0.03,
        configs=("high", "mid", "low"),
) -> AlgorithmProfile:
    return AlgorithmProfile(
        name=name,
        kind="KEM",
        security_level=1,
        sizes=ProfileSizes(public_key=pk, secret_key=pk * 2, ciphertext=ct, shared_secret=ss),
        timings=_table({"keygen": keygen, "encapsulate": encapsulate, "decapsulate": decapsulate}, configs),
    )


def make_dsa(
        name: str = "TestDSA",
        pk: int = 1312,
        sig: int = 2420,
        keygen: float = 0.07,
        sign: float = 0.14,
        verify: float = 0.11,
        message: Optional[float] = None,
        configs=("high", "mid", "low"),
) -> AlgorithmProfile:
    ops = {"keygen": keygen, "sign": sign, "verify": verify}
    if message is not None:
        ops["message"] = message
    return AlgorithmProfile(
        name=name,
        kind="DSA",
        security_level=2,
        sizes=ProfileSizes(public_key=pk, secret_key=pk * 2, signature=sig),
        timings=_table(ops, configs),
    )


@pytest.fixture(scope="session")
def packaged_profiles() -> Dict[str, AlgorithmProfile]:
    return index_profiles(load_profiles(default_profiles_path()))


@pytest.fixture
def kem_factory():
    return make_kem


@pytest.fixture
def dsa_factory():
    return make_dsa
