"""
KEM handshake and DSA exchange on a simulated bus.

Synthetic profiles use zero-variance timings, so with stuffing "none" the
expected wall-clock times follow directly from the frame counts:
an 8-byte frame takes 111 us at 1 Mbps.
"""

import numpy as np
import pytest

from can_pqc_sim.core.bus import create_bus
from can_pqc_sim.core.crypto import ComputeSampler, MockBackend
from can_pqc_sim.core.protocol import (
    SESSION_CSV_HEADER,
    dsa_overhead,
    kem_overhead,
    nominal_message_time,
    run_dsa_session,
    run_kem_session,
    session_record,
)
from can_pqc_sim.schemas.bus import EventKind, TrafficGenConfig
from can_pqc_sim.schemas.campaign import EcuConfig
from can_pqc_sim.schemas.frame import BitRate, StuffingModel
from can_pqc_sim.schemas.session import SessionConfig
from conftest import make_dsa, make_kem

NONE = StuffingModel.none()
HIGH = EcuConfig.preset("high")
LOW = EcuConfig.preset("low")


class _FixedDraw:
    """Stand-in random stream pinning Bob's listen offset to a fraction of J."""

    def __init__(self, u: float) -> None:
        self.u = u

    def random(self) -> float:
        return self.u

    def bytes(self, n: int) -> bytes:
        return bytes(n)


def _run(profile, config=HIGH, stuffing=NONE, fault=None, rng=None, load=0.0, load_id_high=0x7FF, **session):
    bus = create_bus(config.rate, stuffing, seed=1)
    if load:
        bus.attach_traffic_generator(TrafficGenConfig(target_load=load, id_high=load_id_high, seed=2))
    cfg = SessionConfig(algorithm=profile.name, **session)
    backend = MockBackend(profile, np.random.default_rng(3), fault=fault)
    sampler = ComputeSampler(profile, config, np.random.default_rng(4))
    runner = run_kem_session if profile.kind == "KEM" else run_dsa_session
    return runner(bus, cfg, backend, sampler, rng if rng is not None else np.random.default_rng(5)), bus


def test_kem_handshake_timeline():
    result, _ = _run(make_kem(pk=800, ct=768))
    assert result.success and result.failure_reason == "none"
    assert result.frames_on_wire == 115 + 111
    assert result.bytes_on_wire == 800 + 768
    # keygen + 115 frames + encaps + 111 frames + decaps
    assert result.wall_clock_total_ns == 50_000 + 115 * 111_000 + 60_000 + 111 * 111_000 + 30_000
    assert result.crypto_only_ns == 140_000
    assert kem_overhead(result) == result.wall_clock_total_ns


def test_zero_compute_zero_length_handshake_is_two_frames():
    kem = make_kem(pk=0, ct=0, keygen=0.0, encapsulate=0.0, decapsulate=0.0)
    result, _ = _run(kem)
    assert result.success
    assert result.wall_clock_total_ns == 2 * 111_000


@pytest.mark.parametrize("config", [EcuConfig.preset("high"), EcuConfig.preset("mid"), LOW])
def test_zero_compute_time_scales_with_bit_rate(config):
    kem = make_kem(keygen=0.0, encapsulate=0.0, decapsulate=0.0)
    result, _ = _run(kem, config=config)
    assert result.wall_clock_total_ns == 226 * 111_000 * 1_000_000 // config.bit_rate


def test_late_listener_times_out():
    result, bus = _run(make_kem(), rng=_FixedDraw(0.9), jitter_ns=5_000_000_000)
    assert not result.success
    assert result.failure_reason == "timeout"
    assert result.wall_clock_total_ns is None and result.crypto_only_ns is None
    assert kem_overhead(result) is None
    assert any(e.kind is EventKind.TIMEOUT_FIRED for e in bus.trace)


def test_listener_within_first_frame_succeeds():
    # listens before the first pk frame completes at 161 us
    result, _ = _run(make_kem(), rng=_FixedDraw(0.1), jitter_ns=1_000_000)
    assert result.success


def test_mismatched_keypair_fails_handshake():
    result, _ = _run(make_kem(), fault="mismatched_keypair")
    assert result.failure_reason == "crypto_mismatch"


def test_tampered_signature_fails_verification():
    result, _ = _run(make_dsa(), fault="tampered_signature")
    assert result.failure_reason == "crypto_mismatch"


def test_dsa_exchange_timeline():
    result, _ = _run(make_dsa(pk=1312, sig=2420))
    assert result.success
    assert result.bytes_on_wire == 1312 + 32 + 2420
    assert result.frames_on_wire == 188 + 351
    assert result.wall_clock_total_ns == 70_000 + (188 + 351) * 111_000 + 110_000
    nominal = nominal_message_time(BitRate.mbps_1(), NONE)
    assert nominal == 666_000
    assert dsa_overhead(result, nominal) == result.wall_clock_total_ns - 666_000


def test_dilithium2_overhead_near_published(packaged_profiles):
    profile = packaged_profiles["Dilithium2"]
    stuffing = StuffingModel.expected(0.05)
    result, _ = _run(profile, stuffing=stuffing)
    overhead_ms = dsa_overhead(result, nominal_message_time(BitRate.mbps_1(), stuffing)) / 1e6
    assert overhead_ms == pytest.approx(61.275, rel=0.30)


def test_long_signature_outlives_the_receive_timeout():
    dsa = make_dsa(pk=32, sig=17088, keygen=0.0, sign=0.0, verify=0.0)
    result, _ = _run(dsa, config=LOW)
    assert result.success
    assert result.wall_clock_total_ns > 2_000_000_000


@pytest.mark.parametrize("profile", [make_kem(decapsulate=5000.0), make_dsa(verify=5000.0)],
                         ids=["decapsulate", "verify"])
def test_slow_final_operation_completes(profile):
    result, _ = _run(profile)
    assert result.success and result.failure_reason == "none"
    assert result.op3_ns == 5_000_000_000
    assert result.wall_clock_total_ns > 5_000_000_000


def test_background_load_with_lower_priority_ids():
    result, _ = _run(make_kem(), stuffing=StuffingModel.expected(0.05), load=0.88)
    assert result.success


def test_starved_session_reports_timeout():
    kem = make_kem(pk=0, ct=0)
    result, _ = _run(kem, load=1.0, load_id_high=0x7EF, alice_id=0x7F0, bob_id=0x7F1, receiver_timeout_ns=100_000_000)
    assert result.failure_reason == "timeout"


def test_kind_mismatch_rejected():
    bus = create_bus(1_000_000)
    kem = make_kem()
    with pytest.raises(ValueError):
        run_dsa_session(bus, SessionConfig(algorithm=kem.name), MockBackend(kem, np.random.default_rng(0)),
                        ComputeSampler(kem, HIGH, np.random.default_rng(0)), np.random.default_rng(0))


def test_session_record_leaves_failed_values_empty():
    result, _ = _run(make_kem(), rng=_FixedDraw(0.9), jitter_ns=5_000_000_000)
    record = session_record(result)
    assert tuple(record) == SESSION_CSV_HEADER
    assert record["success"] == "false"
    assert record["failure_reason"] == "timeout"
    assert record["overhead_ms"] == "" and record["wall_ms"] == ""


def test_session_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(algorithm="x", alice_id=0x10, bob_id=0x10)
    with pytest.raises(ValueError):
        SessionConfig(algorithm="x", receiver_timeout_ns=0)
    with pytest.raises(ValueError):
        SessionConfig(algorithm="x", bob_id=0x800)
