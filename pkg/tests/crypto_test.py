"""
Compute-time models and the size-faithful mock backend.

The calibration check draws 1000 durations for every timed (profile,
config, operation) entry of the packaged profile file and compares the
sample mean with the table mean.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from can_pqc_sim.core.crypto import (
    ComputeModelError,
    ComputeSampler,
    MockBackend,
    censored_normal_params,
    cycles_from_table,
    resolve_compute_model,
    sample_op_time,
)
from can_pqc_sim.schemas.campaign import EcuConfig
from can_pqc_sim.schemas.profile import CycleBasedModel, OpTiming, TableDrivenModel
from can_pqc_sim.utils.constants import NS_PER_MS
from conftest import make_dsa, make_kem

HIGH = EcuConfig.preset("high")


def test_kem_backend_agrees_on_shared_secret():
    kem = make_kem(pk=800, ct=768, ss=32)
    backend = MockBackend(kem, np.random.default_rng(1))
    pk, sk = backend.keygen()
    assert (len(pk), len(sk)) == (800, 1600)
    ct, ss_bob = backend.encapsulate(pk)
    assert len(ct) == 768 and len(ss_bob) == 32
    assert backend.decapsulate(sk, ct) == ss_bob


def test_kem_faults_and_implicit_rejection():
    kem = make_kem()
    faulty = MockBackend(kem, np.random.default_rng(1), fault="mismatched_keypair")
    pk, sk = faulty.keygen()
    ct, ss = faulty.encapsulate(pk)
    assert faulty.decapsulate(sk, ct) != ss

    backend = MockBackend(kem, np.random.default_rng(2))
    pk, sk = backend.keygen()
    ct, ss = backend.encapsulate(pk)
    corrupted = bytes([ct[0] ^ 0xFF]) + ct[1:]
    assert backend.decapsulate(sk, corrupted) != ss


def test_dsa_backend_signs_and_verifies():
    dsa = make_dsa(pk=1312, sig=2420)
    backend = MockBackend(dsa, np.random.default_rng(3))
    pk, sk = backend.keygen()
    message = b"m" * 32
    sig = backend.sign(sk, message)
    assert len(sig) == 2420
    assert backend.verify(pk, message, sig)
    assert not backend.verify(pk, b"x" * 32, sig)
    assert not backend.verify(pk, message, sig[:-1])

    tampered = MockBackend(dsa, np.random.default_rng(3), fault="tampered_signature")
    pk, sk = tampered.keygen()
    assert not tampered.verify(pk, message, tampered.sign(sk, message))


def test_backend_rejects_operations_of_the_other_kind():
    with pytest.raises(ComputeModelError):
        MockBackend(make_dsa(), np.random.default_rng(0)).encapsulate(b"")
    with pytest.raises(ComputeModelError):
        MockBackend(make_kem(), np.random.default_rng(0)).sign(b"", b"")


def test_zero_std_is_exact():
    kem = make_kem(keygen=0.045)
    rng = np.random.default_rng(0)
    assert {sample_op_time(kem, "keygen", HIGH, rng) for _ in range(10)} == {45_000}


def test_invalid_operation_or_config():
    kem = make_kem(configs=("high",))
    rng = np.random.default_rng(0)
    with pytest.raises(ComputeModelError):
        sample_op_time(kem, "sign", HIGH, rng)
    with pytest.raises(ComputeModelError):
        sample_op_time(kem, "keygen", EcuConfig.preset("low"), rng)


def test_missing_message_step_takes_no_time():
    assert sample_op_time(make_dsa(), "message", HIGH, np.random.default_rng(0)) == 0
    assert sample_op_time(make_dsa(message=0.2), "message", HIGH, np.random.default_rng(0)) == 200_000


def test_cycle_based_durations_scale_with_clock():
    kem = make_kem()
    model = CycleBasedModel(work_cycles={"keygen": 300_000, "encapsulate": 0, "decapsulate": 1})
    assert sample_op_time(kem, "keygen", HIGH, np.random.default_rng(0), model) == 1_000_000
    low = EcuConfig.preset("low")
    assert sample_op_time(kem, "keygen", low, np.random.default_rng(0), model) == 2_500_000
    assert sample_op_time(kem, "decapsulate", low, np.random.default_rng(0), model) == 8


def test_cycles_derived_from_reference_table():
    kem = make_kem(keygen=0.045)
    model = cycles_from_table(kem, HIGH)
    assert model.work_cycles["keygen"] == 13_500
    assert resolve_compute_model(kem, "cycle_based", HIGH) == model
    assert resolve_compute_model(kem, "table_driven", HIGH) is kem.timings


def test_sizes_only_profile_needs_cycles(packaged_profiles):
    mceliece = packaged_profiles["mceliece348864"]
    assert mceliece.timings is None
    with pytest.raises(ComputeModelError):
        resolve_compute_model(mceliece, "table_driven", HIGH)
    with pytest.raises(ComputeModelError):
        resolve_compute_model(mceliece, "cycle_based", HIGH)


def test_censored_params_keep_low_cv_untouched():
    assert censored_normal_params(1.0, 0.2) == (1.0, 0.2)
    loc, scale = censored_normal_params(0.093, 0.140)
    assert loc < 0.093 and scale > 0.0


def test_raw_sampling_clamps_at_zero():
    kem = make_kem()
    model = TableDrivenModel(sampling="raw", timings={"high": {
        "keygen": OpTiming(mean_ms=0.01, std_ms=1.0),
        "encapsulate": OpTiming(mean_ms=0.01), "decapsulate": OpTiming(mean_ms=0.01),
    }})
    rng = np.random.default_rng(5)
    draws = [sample_op_time(kem, "keygen", HIGH, rng, model) for _ in range(200)]
    assert min(draws) == 0


def test_calibrated_sampling_preserves_table_means(packaged_profiles):
    n = 1000
    rng = np.random.default_rng(2025)
    checked = 0
    for profile in packaged_profiles.values():
        if profile.timings is None:
            continue
        for config, table in profile.timings.timings.items():
            sampler = ComputeSampler(profile, EcuConfig.preset(config), rng)
            for op, timing in table.items():
                if timing.std_ms == 0.0:
                    continue
                draws = np.array([sampler.duration(op) for _ in range(n)]) / NS_PER_MS
                se = timing.std_ms / math.sqrt(n)
                assert abs(draws.mean() - timing.mean_ms) < 3 * se + 1e-6, \
                    f"{profile.name}/{config}/{op}: {draws.mean():.4f} vs {timing.mean_ms}"
                checked += 1
    assert checked >= 18 * 3 * 3


@settings(max_examples=50, deadline=None)
@given(pk=st.integers(1, 4096), ct=st.integers(1, 4096), ss=st.integers(1, 64), seed=st.integers(0, 2**32 - 1))
def test_kem_backend_output_sizes_and_agreement(pk, ct, ss, seed):
    backend = MockBackend(make_kem(pk=pk, ct=ct, ss=ss), np.random.default_rng(seed))
    public, secret = backend.keygen()
    ciphertext, shared = backend.encapsulate(public)
    assert (len(public), len(ciphertext), len(shared)) == (pk, ct, ss)
    assert backend.decapsulate(secret, ciphertext) == shared


@settings(max_examples=50, deadline=None)
@given(sig=st.integers(16, 8192), message=st.binary(min_size=1, max_size=64), seed=st.integers(0, 2**32 - 1))
def test_dsa_backend_binds_signature_to_message(sig, message, seed):
    backend = MockBackend(make_dsa(sig=sig), np.random.default_rng(seed))
    public, secret = backend.keygen()
    signature = backend.sign(secret, message)
    assert len(signature) == sig
    assert backend.verify(public, message, signature)
    assert not backend.verify(public, message + b"\x00", signature)
