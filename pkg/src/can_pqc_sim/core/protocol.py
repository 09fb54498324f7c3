"""
KEM handshake and DSA exchange between two simulated ECUs.

Both flows are event-driven on a CanBus: compute steps are delays, messages
travel as transport-segmented frames, and receivers drop whatever arrives
before they start listening.

Receive timers: a receiver arms its timer when it starts listening for a
message and cancels it when that message's first frame arrives, so a long
message may finish reassembling after the deadline. The sender never times
out. Bob starts listening at t0 + floor(u * J), u uniform in [0, 1).
"""

from __future__ import annotations

import hmac
import logging
from typing import Callable, Dict, Optional

import numpy as np

from can_pqc_sim.core.bus import CanBus, NodeHandle, Timer, accept_ids
from can_pqc_sim.core.can_frame import bits_to_ns
from can_pqc_sim.core.crypto import ComputeSampler, CryptoBackend
from can_pqc_sim.core.transport import (
    ReassemblyState,
    feed,
    first_frame_length,
    frame_count,
    segment,
    transmission_bit_cost,
)
from can_pqc_sim.schemas.bus import SimTime
from can_pqc_sim.schemas.frame import BitRate, CanFrame, StuffingModel
from can_pqc_sim.schemas.session import FailureReason, SessionConfig, SessionResult
from can_pqc_sim.utils.constants import DSA_MESSAGE_LENGTH, NS_PER_MS

logger = logging.getLogger("protocol")

# Hard stop for a session that can never finish (e.g. protocol frames starved
# by higher-priority traffic at full load), as a multiple of its bare wire time.
_STARVATION_FACTOR = 16

PayloadCallback = Callable[[bytes, SimTime], None]


class _Receiver:
    """Listens on one identifier for one message of a known length."""

    def __init__(
            self,
            session: "_Session",
            node: NodeHandle,
            can_id: int,
            expected_length: int,
            on_complete: PayloadCallback,
    ) -> None:
        self.session = session
        self.node = node
        self.can_id = can_id
        self.expected_length = expected_length
        self.on_complete = on_complete
        self.state = ReassemblyState()
        self.listening = False
        self.started = False
        self.finished = False
        self.timer: Optional[Timer] = None

    def listen(self, t: SimTime) -> None:
        if self.session.done:
            return
        self.listening = True
        self.timer = self.session.bus.schedule(
            t + self.session.cfg.receiver_timeout_ns, self.node, self._on_timeout, timeout=True,
        )

    def on_frame(self, frame: CanFrame, t: SimTime) -> bool:
        """Returns True if the frame belonged to this receiver's message."""
        if not self.listening or self.finished or frame.can_id != self.can_id:
            return False
        if not self.started:
            # a message joined mid-way is lost; wait for a matching first frame
            if first_frame_length(frame) != self.expected_length:
                return False
            self.started = True
            self.state.reset()
            if self.timer is not None:
                self.timer.cancel()
        result = feed(self.state, frame)
        if result.complete:
            self.finished = True
            self.on_complete(result.payload or b"", t)
        elif result.status == "error":
            logger.debug(f"[Protocol] {result.error.kind} on 0x{self.can_id:03X}; listening again")
            self.started = False
            self.listen(t)
        return True

    def _on_timeout(self) -> None:
        self.session.finish("timeout")


class _Session:
    def __init__(
            self,
            bus: CanBus,
            cfg: SessionConfig,
            backend: CryptoBackend,
            compute: ComputeSampler,
            rng: np.random.Generator,
    ) -> None:
        self.bus = bus
        self.cfg = cfg
        self.backend = backend
        self.compute = compute
        self.rng = rng
        self.profile = compute.profile
        self.t0 = bus.now
        self.alice = bus.attach_node(accept_ids(cfg.bob_id))
        self.bob = bus.attach_node(accept_ids(cfg.alice_id))
        self.done = False
        self.success = False
        self.failure_reason: FailureReason = "none"
        self.t_end: Optional[SimTime] = None
        self.durations: Dict[str, Optional[int]] = {"keygen": None, "op2": None, "op3": None, "message": None}
        self.bytes_on_wire = 0
        self.frames_on_wire = 0
        self._receivers: Dict[NodeHandle, list] = {self.alice: [], self.bob: []}
        self.alice.on_receive = lambda frame, t: self._dispatch(self.alice, frame, t)
        self.bob.on_receive = lambda frame, t: self._dispatch(self.bob, frame, t)
        self.listen_start = self.t0 + (int(self.rng.random() * cfg.jitter_ns) if cfg.jitter_ns else 0)

    def receiver(self, node: NodeHandle, can_id: int, length: int, on_complete: PayloadCallback) -> _Receiver:
        receiver = _Receiver(self, node, can_id, length, on_complete)
        self._receivers[node].append(receiver)
        return receiver

    def send(self, node: NodeHandle, can_id: int, payload: bytes, at: SimTime) -> int:
        """Queue a message; returns its frame count."""
        frames = segment(payload, can_id)
        node.queue_frames(frames, at)
        self.bytes_on_wire += len(payload)
        self.frames_on_wire += len(frames)
        return len(frames)

    def finish(self, reason: FailureReason, t: Optional[SimTime] = None) -> None:
        if self.done:
            return
        self.done = True
        self.success = reason == "none"
        self.failure_reason = reason
        self.t_end = t if t is not None else self.bus.now
        for receivers in self._receivers.values():
            for receiver in receivers:
                if receiver.timer is not None:
                    receiver.timer.cancel()

    def deadline(self, payload_bytes: int) -> SimTime:
        wire_ns = bits_to_ns(transmission_bit_cost(payload_bytes, self.bus.stuffing), self.bus.rate)
        compute_ns = sum(v for v in self.durations.values() if v is not None)
        return (self.listen_start + compute_ns + 2 * self.cfg.receiver_timeout_ns
                + _STARVATION_FACTOR * (wire_ns + NS_PER_MS))

    def run(self, payload_bytes: int) -> SessionResult:
        # op2 and op3 are sampled mid-run; each one pushes the hard stop out
        deadline = self.deadline(payload_bytes)
        while True:
            self.bus.run_until(deadline, stop=lambda: self.done)
            extended = self.deadline(payload_bytes)
            if self.done or extended <= deadline:
                break
            deadline = extended
        if not self.done:
            logger.warning(
                f"[Protocol] {self.profile.name} session unfinished at {deadline} ns "
                f"(protocol frames starved); reporting timeout"
            )
            self.finish("timeout", deadline)
        return self.result()

    def result(self) -> SessionResult:
        d = self.durations
        crypto_only = None
        if self.success:
            crypto_only = (d["keygen"] or 0) + (d["op2"] or 0) + (d["op3"] or 0)
        return SessionResult(
            algorithm=self.profile.name,
            kind=self.profile.kind,
            config=self.compute.config.name,
            success=self.success,
            failure_reason=self.failure_reason,
            keygen_ns=d["keygen"],
            op2_ns=d["op2"],
            op3_ns=d["op3"],
            message_ns=d["message"],
            wall_clock_total_ns=(self.t_end - self.t0) if self.success and self.t_end is not None else None,
            crypto_only_ns=crypto_only,
            bytes_on_wire=self.bytes_on_wire,
            frames_on_wire=self.frames_on_wire,
        )

    def _dispatch(self, node: NodeHandle, frame: CanFrame, t: SimTime) -> None:
        if self.done:
            return
        for receiver in self._receivers[node]:
            if receiver.on_frame(frame, t):
                break


class _KemSession(_Session):
    def start(self) -> SessionResult:
        sizes = self.profile.sizes
        d = self.durations
        d["keygen"] = self.compute.duration("keygen")
        pk, self.sk = self.backend.keygen()
        self.ss_bob: Optional[bytes] = None

        pk_frames = frame_count(len(pk))
        sent = {"n": 0}

        def _alice_sent(frame: CanFrame, t: SimTime) -> None:
            sent["n"] += 1
            if sent["n"] == pk_frames:
                self.ct_receiver.listen(t)

        self.alice.on_transmitted = _alice_sent
        self.pk_receiver = self.receiver(self.bob, self.cfg.alice_id, sizes.public_key, self._bob_got_pk)
        self.ct_receiver = self.receiver(self.alice, self.cfg.bob_id, sizes.ciphertext or 0, self._alice_got_ct)
        self.bus.schedule(self.listen_start, self.bob, lambda: self.pk_receiver.listen(self.listen_start))
        self.send(self.alice, self.cfg.alice_id, pk, self.t0 + d["keygen"])
        return self.run(sizes.public_key + (sizes.ciphertext or 0))

    def _bob_got_pk(self, pk: bytes, t: SimTime) -> None:
        encaps = self.durations["op2"] = self.compute.duration("encapsulate")
        ct, self.ss_bob = self.backend.encapsulate(pk)
        self.send(self.bob, self.cfg.bob_id, ct, t + encaps)

    def _alice_got_ct(self, ct: bytes, t: SimTime) -> None:
        decaps = self.durations["op3"] = self.compute.duration("decapsulate")
        end = t + decaps

        def _decapsulated() -> None:
            ss_alice = self.backend.decapsulate(self.sk, ct)
            agreed = self.ss_bob is not None and hmac.compare_digest(ss_alice, self.ss_bob)
            self.finish("none" if agreed else "crypto_mismatch", end)

        self.bus.schedule(end, self.alice, _decapsulated)


class _DsaSession(_Session):
    def start(self) -> SessionResult:
        sizes = self.profile.sizes
        d = self.durations
        message = self.rng.bytes(self.cfg.message_length)
        d["keygen"] = self.compute.duration("keygen")
        d["message"] = self.compute.duration("message")
        d["op2"] = self.compute.duration("sign")
        pk, sk = self.backend.keygen()
        signature = self.backend.sign(sk, message)
        self.pk: Optional[bytes] = None

        signed_length = self.cfg.message_length + (sizes.signature or 0)
        self.pk_receiver = self.receiver(self.bob, self.cfg.alice_id, sizes.public_key, self._bob_got_pk)
        self.sig_receiver = self.receiver(self.bob, self.cfg.alice_id, signed_length, self._bob_got_signed)
        self.bus.schedule(self.listen_start, self.bob, lambda: self.pk_receiver.listen(self.listen_start))

        t_pk = self.t0 + d["keygen"]
        self.send(self.alice, self.cfg.alice_id, pk, t_pk)
        self.send(self.alice, self.cfg.alice_id, message + signature, t_pk + d["message"] + d["op2"])
        return self.run(sizes.public_key + signed_length)

    def _bob_got_pk(self, pk: bytes, t: SimTime) -> None:
        self.pk = pk
        self.sig_receiver.listen(t)

    def _bob_got_signed(self, payload: bytes, t: SimTime) -> None:
        verify = self.durations["op3"] = self.compute.duration("verify")
        end = t + verify
        message, signature = payload[:self.cfg.message_length], payload[self.cfg.message_length:]

        def _verified() -> None:
            ok = self.pk is not None and self.backend.verify(self.pk, message, signature)
            self.finish("none" if ok else "crypto_mismatch", end)

        self.bus.schedule(end, self.bob, _verified)


def _check_kind(compute: ComputeSampler, kind: str) -> None:
    if compute.profile.kind != kind:
        raise ValueError(f"profile '{compute.profile.name}' is a {compute.profile.kind}, not a {kind}")


def run_kem_session(
        bus: CanBus,
        cfg: SessionConfig,
        backend: CryptoBackend,
        compute_model: ComputeSampler,
        rng: np.random.Generator,
) -> SessionResult:
    """
    Run one KEM handshake starting at the bus's current time.

    Alice generates a key pair and sends pk on alice_id; Bob encapsulates and
    sends ct on bob_id; Alice decapsulates. Alice and Bob are attached to the
    bus as two new nodes, each filtering on the other's identifier.

    Args:
        bus (CanBus): Bus to run on; may already carry background traffic.
        cfg (SessionConfig): Identifiers, timeout and jitter.
        backend (CryptoBackend): Produces keys, ciphertexts and secrets.
        compute_model (ComputeSampler): Operation durations for the session's ECU config.
        rng (np.random.Generator): Stream for Bob's listen-start offset.

    Returns:
        SessionResult: success only if both shared secrets agree.

    Raises:
        ValueError: if the profile is not a KEM.
    """
    _check_kind(compute_model, "KEM")
    result = _KemSession(bus, cfg, backend, compute_model, rng).start()
    logger.debug(f"[Protocol] KEM {result.algorithm}/{result.config}: {result.failure_reason}")
    return result


def run_dsa_session(
        bus: CanBus,
        cfg: SessionConfig,
        backend: CryptoBackend,
        compute_model: ComputeSampler,
        rng: np.random.Generator,
) -> SessionResult:
    """
    Run one DSA exchange starting at the bus's current time.

    Alice generates a key pair and sends pk, generates a random message,
    signs it and sends message || signature as one transport message; Bob
    verifies. Bob listens for the signed message as soon as pk is complete.

    Raises:
        ValueError: if the profile is not a DSA.
    """
    _check_kind(compute_model, "DSA")
    result = _DsaSession(bus, cfg, backend, compute_model, rng).start()
    logger.debug(f"[Protocol] DSA {result.algorithm}/{result.config}: {result.failure_reason}")
    return result


def kem_overhead(result: SessionResult) -> Optional[int]:
    """Keygen start to decapsulation end, in ns; None for failed sessions."""
    if not result.success:
        return None
    return result.wall_clock_total_ns


def dsa_overhead(result: SessionResult, nominal: int) -> Optional[int]:
    """Total session time minus the nominal message time, in ns; None for failed sessions."""
    if not result.success or result.wall_clock_total_ns is None:
        return None
    return result.wall_clock_total_ns - nominal


def nominal_message_time(
        rate: BitRate,
        stuffing: Optional[StuffingModel] = None,
        length: int = DSA_MESSAGE_LENGTH,
) -> int:
    """Wire time of a bare message of `length` bytes on an otherwise idle bus, in ns."""
    stuffing = stuffing if stuffing is not None else StuffingModel()
    return bits_to_ns(transmission_bit_cost(length, stuffing), rate)


def session_overhead(result: SessionResult, nominal: Optional[int] = None) -> Optional[int]:
    if result.kind == "KEM":
        return kem_overhead(result)
    return dsa_overhead(result, nominal or 0)


SESSION_CSV_HEADER = (
    "algorithm", "config", "seed", "success", "failure_reason", "keygen_ms", "op2_ms",
    "op3_ms", "overhead_ms", "wall_ms", "bytes_on_wire",
)


def _ms(ns: Optional[int]) -> str:
    return "" if ns is None else f"{ns / NS_PER_MS:.6f}"


def session_record(result: SessionResult, nominal: Optional[int] = None) -> Dict[str, str]:
    """One per-session CSV record; empty cells for values a failed session lacks."""
    return {
        "algorithm": result.algorithm,
        "config": result.config,
        "seed": str(result.seed),
        "success": "true" if result.success else "false",
        "failure_reason": result.failure_reason,
        "keygen_ms": _ms(result.keygen_ns),
        "op2_ms": _ms(result.op2_ns),
        "op3_ms": _ms(result.op3_ns),
        "overhead_ms": _ms(session_overhead(result, nominal)),
        "wall_ms": _ms(result.wall_clock_total_ns),
        "bytes_on_wire": str(result.bytes_on_wire),
    }
