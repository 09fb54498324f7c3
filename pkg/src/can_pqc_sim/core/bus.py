"""
Discrete-event simulation of a single shared CAN bus.

The engine keeps one heap of pending actions ordered by
(time, phase, node_id, per-node sequence). Phases order what happens at
one instant: frame completions and deliveries first, then timers and
newly queued frames, and arbitration last, so every frame queued at an
instant contends in that instant's arbitration.

A bus instance is single-threaded: never drive one bus from two threads.
Independent buses may run in parallel.
"""

from __future__ import annotations

import heapq
import logging
from collections import deque
from typing import Callable, Deque, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from can_pqc_sim.core.can_frame import duration_for_dlc
from can_pqc_sim.schemas.bus import BusEvent, EventKind, SimTime, TrafficGenConfig
from can_pqc_sim.schemas.frame import BitRate, CanFrame, StuffingModel
from can_pqc_sim.utils.constants import MAX_DLC

logger = logging.getLogger("bus_sim")

PHASE_DELIVERY = 0
PHASE_CALLBACK = 1
PHASE_ARBITRATION = 2

BUS_NODE_ID = 0

FrameFilter = Callable[[int], bool]
# (earliest contention time, frame)
PendingFrame = Tuple[SimTime, CanFrame]
ReceiveCallback = Callable[[CanFrame, SimTime], None]


def accept_all(can_id: int) -> bool:
    return True


def reject_all(can_id: int) -> bool:
    return False


def accept_ids(*can_ids: int) -> FrameFilter:
    """Filter passing only the listed identifiers."""
    wanted = frozenset(can_ids)

    def _accept(can_id: int) -> bool:
        return can_id in wanted

    return _accept


class Timer:
    """Handle to a scheduled callback due at `time`; cancelling makes it a no-op when due."""

    __slots__ = ("time", "cancelled")

    def __init__(self, time: SimTime) -> None:
        self.time = time
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class NodeHandle:
    """
    One attached ECU: an inbound identifier filter and a FIFO outbound queue.

    `on_receive(frame, time)` is called for every delivered frame passing the
    filter; `on_transmitted(frame, time)` when one of the node's own frames
    finishes transmitting.
    """

    def __init__(self, bus: "CanBus", node_id: int, frame_filter: FrameFilter) -> None:
        self.bus = bus
        self.node_id = node_id
        self.frame_filter = frame_filter
        self.outbound: Deque[PendingFrame] = deque()
        self.on_receive: Optional[ReceiveCallback] = None
        self.on_transmitted: Optional[ReceiveCallback] = None
        self._seq = 0

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def queue_frame(self, frame: CanFrame, earliest: Optional[SimTime] = None) -> None:
        self.bus.queue_frame(self, frame, earliest)

    def queue_frames(self, frames: Iterable[CanFrame], earliest: Optional[SimTime] = None) -> None:
        self.bus.queue_frames(self, frames, earliest)

    def __repr__(self) -> str:
        return f"NodeHandle(node_id={self.node_id}, pending={len(self.outbound)})"


class CanBus:
    """
    Shared broadcast bus with lower-ID-wins arbitration.

    Args:
        rate (BitRate): Bus bit rate.
        stuffing (StuffingModel): Stuffing model applied to every frame.
        seed (int): Root seed mixed into the streams of attached generators.
        record_trace (bool): Keep every BusEvent in `trace`. Campaign runs
            switch this off unless a trace dump is requested.
    """

    def __init__(
            self,
            rate: BitRate,
            stuffing: Optional[StuffingModel] = None,
            seed: int = 0,
            record_trace: bool = True,
    ) -> None:
        self.rate = rate
        self.stuffing = stuffing if stuffing is not None else StuffingModel()
        self.seed = seed
        self.record_trace = record_trace
        self.trace: List[BusEvent] = []
        self.nodes: List[NodeHandle] = []
        self.busy_ns = 0
        self._now: SimTime = 0
        self._busy_until: SimTime = 0
        self._heap: List[Tuple[SimTime, int, int, int, Callable[[], None]]] = []
        self._bus_seq = 0
        self._arbitration_times = set()
        self._durations = [duration_for_dlc(dlc, rate, self.stuffing) for dlc in range(MAX_DLC + 1)]

    @property
    def now(self) -> SimTime:
        return self._now

    def attach_node(self, frame_filter: Optional[FrameFilter] = None) -> NodeHandle:
        """
        Attach a node receiving every frame whose identifier passes `frame_filter`
        (accept-all when omitted). Node ids start at 1 in attach order.
        """
        node = NodeHandle(self, len(self.nodes) + 1, frame_filter or accept_all)
        self.nodes.append(node)
        return node

    def queue_frame(self, node: NodeHandle, frame: CanFrame, earliest: Optional[SimTime] = None) -> None:
        """
        Queue a frame to contend for the bus no earlier than `earliest`.
        A node's frames always leave in the order they were queued.
        """
        self.queue_frames(node, (frame,), earliest)

    def queue_frames(self, node: NodeHandle, frames: Iterable[CanFrame], earliest: Optional[SimTime] = None) -> None:
        """
        Queue a batch of frames behind the node's pending ones. The batch costs
        a single heap action; the frames still leave one by one in order.
        """
        t = self._now if earliest is None else max(self._now, earliest)
        batch = list(frames)
        if not batch:
            return
        node.outbound.extend((t, frame) for frame in batch)
        self._push(t, PHASE_CALLBACK, node.node_id, node.next_seq(),
                   lambda: self._on_queued(node, batch, t))

    def schedule(
            self,
            time: SimTime,
            node: Optional[NodeHandle],
            callback: Callable[[], None],
            timeout: bool = False,
    ) -> Timer:
        """
        Run `callback` at `time`. With timeout=True a timeout_fired event is
        traced for `node` when the timer fires uncancelled.
        """
        t = max(self._now, time)
        timer = Timer(t)
        node_id = node.node_id if node is not None else BUS_NODE_ID
        seq = node.next_seq() if node is not None else self._next_bus_seq()

        def _fire() -> None:
            if timer.cancelled:
                return
            if timeout:
                self._record(t, EventKind.TIMEOUT_FIRED, node_id, None)
            callback()

        self._push(t, PHASE_CALLBACK, node_id, seq, _fire)
        return timer

    def run_until(self, t_end: SimTime, stop: Optional[Callable[[], bool]] = None) -> List[BusEvent]:
        """
        Process every action due at or before `t_end` in deterministic order.

        If `stop` is given it is checked after each action and the run halts
        as soon as it returns True, leaving the clock at that action's time.

        Returns:
            list[BusEvent]: the trace events recorded during this call.
        """
        if t_end < self._now:
            raise ValueError(f"t_end {t_end} precedes the current time {self._now}")
        start = len(self.trace)
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            entry = heapq.heappop(heap)
            self._now = entry[0]
            entry[4]()
            if stop is not None and stop():
                break
        else:
            self._now = t_end
        return self.trace[start:]

    def attach_traffic_generator(self, cfg: TrafficGenConfig) -> Optional[NodeHandle]:
        """
        Attach a rate-paced background load generator.

        Returns:
            Optional[NodeHandle]: the generator's node, or None when target_load is 0.
        """
        if cfg.target_load == 0.0:
            logger.debug("[Bus] background generator disabled (target_load=0)")
            return None
        node = self.attach_node(reject_all)
        generator = _TrafficGenerator(self, node, cfg)
        generator.start()
        logger.debug(
            f"[Bus] background generator on node {node.node_id}: load={cfg.target_load:.3f}, "
            f"ids=0x{cfg.id_low:03X}..0x{cfg.id_high:03X}, gap={generator.gap_ns} ns"
        )
        return node

    def _next_bus_seq(self) -> int:
        self._bus_seq += 1
        return self._bus_seq

    def _push(self, time: SimTime, phase: int, node_id: int, seq: int, action: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (time, phase, node_id, seq, action))

    def _record(self, time: SimTime, kind: EventKind, node_id: int, frame: Optional[CanFrame]) -> None:
        if self.record_trace:
            self.trace.append(BusEvent(time=time, kind=kind, node=node_id, frame=frame))

    def _request_arbitration(self, t: SimTime) -> None:
        if t in self._arbitration_times:
            return
        self._arbitration_times.add(t)
        self._push(t, PHASE_ARBITRATION, BUS_NODE_ID, self._next_bus_seq(), lambda: self._arbitrate_at(t))

    def _on_queued(self, node: NodeHandle, frames: List[CanFrame], t: SimTime) -> None:
        if self.record_trace:
            for frame in frames:
                self._record(t, EventKind.TX_QUEUED, node.node_id, frame)
        self._request_arbitration(t)

    def _arbitrate_at(self, t: SimTime) -> None:
        self._arbitration_times.discard(t)
        if self._busy_until > t:
            return
        pending = [
            (node, node.outbound[0][1])
            for node in self.nodes
            if node.outbound and node.outbound[0][0] <= t
        ]
        if not pending:
            return
        winner, frame = pending[0] if len(pending) == 1 else arbitrate(pending)
        winner.outbound.popleft()
        duration = self._durations[len(frame.data)]
        end = t + duration
        self._busy_until = end
        self.busy_ns += duration
        self._record(t, EventKind.TX_START, winner.node_id, frame)
        self._push(end, PHASE_DELIVERY, winner.node_id, winner.next_seq(),
                   lambda: self._on_tx_end(winner, frame, end))

    def _on_tx_end(self, sender: NodeHandle, frame: CanFrame, t: SimTime) -> None:
        tracing = self.record_trace
        if tracing:
            self._record(t, EventKind.TX_END, sender.node_id, frame)
        can_id = frame.can_id
        for node in self.nodes:
            if node is sender or not node.frame_filter(can_id):
                continue
            if tracing:
                self._record(t, EventKind.RX_DELIVER, node.node_id, frame)
            if node.on_receive is not None:
                node.on_receive(frame, t)
        if sender.on_transmitted is not None:
            sender.on_transmitted(frame, t)
        heap = self._heap
        # nothing else is due at t: arbitrate now instead of through the heap
        if (not heap or heap[0][0] > t) and t not in self._arbitration_times:
            self._arbitrate_at(t)
        else:
            self._request_arbitration(t)


def arbitrate(pending: Sequence[Tuple[NodeHandle, CanFrame]]) -> Tuple[NodeHandle, CanFrame]:
    """
    Pick the frame that wins the bus: numerically smallest identifier,
    ties between nodes broken by the smallest node_id (logged as a warning;
    a real bus would flag this as an error).
    """
    if not pending:
        raise ValueError("arbitration requires at least one pending frame")
    winner = min(pending, key=lambda entry: (entry[1].can_id, entry[0].node_id))
    contenders = [node.node_id for node, frame in pending if frame.can_id == winner[1].can_id]
    if len(contenders) > 1:
        logger.warning(
            f"[Bus] same-ID arbitration tie on 0x{winner[1].can_id:03X} between nodes "
            f"{contenders}; node {winner[0].node_id} wins"
        )
    return winner


def create_bus(
        rate: Union[BitRate, int],
        stuffing: Optional[StuffingModel] = None,
        seed: int = 0,
        record_trace: bool = True,
) -> CanBus:
    """
    Build an empty bus at t=0. An integer rate is taken as bits per second.

    Raises:
        pydantic.ValidationError: if the rate is not positive.
    """
    if not isinstance(rate, BitRate):
        rate = BitRate(bits_per_second=rate)
    return CanBus(rate, stuffing, seed, record_trace)


def bus_utilization(trace: Sequence[BusEvent], window: Tuple[SimTime, SimTime]) -> float:
    """
    Fraction of `window` during which a frame occupied the bus.

    Raises:
        ValueError: if the window is empty.
    """
    start, end = window
    if end <= start:
        raise ValueError(f"empty window [{start}, {end})")
    busy = 0
    tx_start: Optional[SimTime] = None
    for event in trace:
        if event.kind is EventKind.TX_START:
            tx_start = event.time
        elif event.kind is EventKind.TX_END:
            begin = tx_start if tx_start is not None else start
            tx_start = None
            lo, hi = max(begin, start), min(event.time, end)
            if hi > lo:
                busy += hi - lo
    if tx_start is not None and tx_start < end:
        busy += end - max(tx_start, start)
    return busy / (end - start)


def dump_trace(trace: Iterable[BusEvent]) -> List[str]:
    """Tab-separated trace lines, stable across runs for diffing."""
    return [event.to_tsv() for event in trace]


class _TrafficGenerator:
    """
    Paced loader: queues one frame per gap, blocking while its previous frame
    is still waiting for the bus. The next frame is queued at
    max(previous queue time + gap, previous tx_end).
    """

    def __init__(self, bus: CanBus, node: NodeHandle, cfg: TrafficGenConfig) -> None:
        self.bus = bus
        self.node = node
        self.cfg = cfg
        self.rng = np.random.default_rng([bus.seed, cfg.seed])
        self.frame_ns = duration_for_dlc(cfg.dlc, bus.rate, bus.stuffing)
        self.gap_ns = max(self.frame_ns, int(self.frame_ns / cfg.target_load + 0.5))
        self._last_queued: SimTime = 0
        node.on_transmitted = self._on_transmitted

    def start(self) -> None:
        offset = int(self.rng.integers(0, self.gap_ns))
        self.bus.schedule(self.bus.now + offset, self.node, self._emit)

    def _emit(self) -> None:
        can_id = int(self.rng.integers(self.cfg.id_low, self.cfg.id_high + 1))
        frame = CanFrame(can_id=can_id, data=self.rng.bytes(self.cfg.dlc))
        self._last_queued = self.bus.now
        self.bus.queue_frame(self.node, frame, self.bus.now)

    def _on_transmitted(self, frame: CanFrame, t: SimTime) -> None:
        self.bus.schedule(max(self._last_queued + self.gap_ns, t), self.node, self._emit)
