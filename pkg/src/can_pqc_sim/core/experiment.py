"""
Campaign runner for can_pqc_sim.

A campaign sweeps algorithms x ECU configs; every (algorithm, config) cell
runs `iterations` independent sessions, each on a fresh bus seeded from

    sub_seed = first 8 bytes (big-endian) of
               BLAKE2b(f"{master_seed}|{algorithm}|{config}|{iteration}")

and numpy SeedSequence(sub_seed) spawns the session streams in the fixed
order (compute, backend, jitter, background). Nothing is shared between
cells, so results do not depend on execution order or on --jobs, and
lowering `iterations` keeps the prefix of sessions unchanged.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from can_pqc_sim.core.bus import create_bus, dump_trace
from can_pqc_sim.core.crypto import ComputeSampler, Fault, MockBackend, resolve_compute_model
from can_pqc_sim.core.profiles import get_profile
from can_pqc_sim.core.protocol import (
    nominal_message_time,
    run_dsa_session,
    run_kem_session,
    session_overhead,
    session_record,
)
from can_pqc_sim.core.transport import transmission_bit_cost
from can_pqc_sim.core.can_frame import bits_to_ns
from can_pqc_sim.schemas.bus import TrafficGenConfig
from can_pqc_sim.schemas.campaign import ECU_PRESETS, CampaignSpec, EcuConfig, Metrics, TimingStat
from can_pqc_sim.schemas.frame import StuffingModel
from can_pqc_sim.schemas.profile import AlgorithmProfile, ComputeTimeModel
from can_pqc_sim.schemas.session import SessionConfig, SessionResult
from can_pqc_sim.utils.constants import (
    BACKGROUND_ID_HIGH,
    BACKGROUND_ID_LOW,
    DEFAULT_ALICE_ID,
    DEFAULT_BOB_ID,
    DSA_MESSAGE_LENGTH,
    INVERTED_ALICE_ID,
    INVERTED_BACKGROUND_ID_HIGH,
    INVERTED_BOB_ID,
    MAD_Z_THRESHOLD,
    NS_PER_MS,
    SCALING_TOLERANCE,
)

logger = logging.getLogger("experiment")

# reference config for deriving cycle counts from timing tables
CYCLE_REFERENCE_CONFIG = "high"


class CampaignError(RuntimeError):
    """Raised when one or more campaign cells failed to run."""

    def __init__(self, failures: Sequence[Tuple[str, str, str]]) -> None:
        self.failures = list(failures)
        detail = "; ".join(f"{alg}/{cfg}: {msg}" for alg, cfg, msg in self.failures)
        super().__init__(f"{len(self.failures)} campaign cell(s) failed: {detail}")


class CellResult(BaseModel):
    """
    Outcome of one (algorithm, config) cell; `error` is set instead of metrics on failure.
    `sessions` holds one per-session CSV record per iteration, in iteration order.
    """
    model_config = ConfigDict(frozen=True)

    algorithm: str
    config: str
    metrics: Optional[Metrics] = None
    trace: List[str] = []
    sessions: List[Dict[str, str]] = []
    error: Optional[str] = None


def derive_subseed(master_seed: int, algorithm: str, config: str, iteration: int) -> int:
    key = f"{master_seed}|{algorithm}|{config}|{iteration}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key).digest()[:8], "big")


def _session_ids(inverted: bool) -> Tuple[int, int, int]:
    if inverted:
        return INVERTED_ALICE_ID, INVERTED_BOB_ID, INVERTED_BACKGROUND_ID_HIGH
    return DEFAULT_ALICE_ID, DEFAULT_BOB_ID, BACKGROUND_ID_HIGH


def run_session(
        profile: AlgorithmProfile,
        config: EcuConfig,
        spec: CampaignSpec,
        iteration: int,
        model: Optional[ComputeTimeModel] = None,
        record_trace: bool = False,
        fault: Fault = None,
) -> Tuple[SessionResult, List[str]]:
    """
    Run iteration `iteration` of a cell on a fresh bus.

    Returns:
        tuple: the SessionResult (seed set to the sub-seed) and the bus trace
        as TSV lines (empty unless record_trace).
    """
    sub_seed = derive_subseed(spec.master_seed, profile.name, config.name, iteration)
    compute_ss, backend_ss, jitter_ss, background_ss = np.random.SeedSequence(sub_seed).spawn(4)

    bus = create_bus(config.rate, spec.stuffing, seed=sub_seed, record_trace=record_trace)
    alice_id, bob_id, background_high = _session_ids(spec.inverted_priority)
    bus.attach_traffic_generator(TrafficGenConfig(
        target_load=spec.background_load,
        id_low=BACKGROUND_ID_LOW,
        id_high=background_high,
        seed=int(background_ss.generate_state(1)[0]),
    ))

    cfg = SessionConfig(
        algorithm=profile.name,
        receiver_timeout_ns=spec.receiver_timeout_ns,
        jitter_ns=spec.jitter_ns,
        alice_id=alice_id,
        bob_id=bob_id,
    )
    backend = MockBackend(profile, np.random.default_rng(backend_ss), fault=fault)
    compute = ComputeSampler(profile, config, np.random.default_rng(compute_ss), model)
    runner = run_kem_session if profile.kind == "KEM" else run_dsa_session
    result = runner(bus, cfg, backend, compute, np.random.default_rng(jitter_ss))
    return result.model_copy(update={"seed": sub_seed}), dump_trace(bus.trace) if record_trace else []


def _stat(values: Sequence[int]) -> Optional[TimingStat]:
    if not values:
        return None
    ms = np.asarray(values, dtype=np.float64) / NS_PER_MS
    std = float(np.std(ms, ddof=1)) if ms.size > 1 else 0.0
    return TimingStat(mean_ms=float(np.mean(ms)), std_ms=std)


def mad_filter(values: Sequence[float], threshold: float = MAD_Z_THRESHOLD) -> np.ndarray:
    """
    Boolean keep-mask: False where the modified z-score
    0.6745 * |x - median| / MAD exceeds `threshold`. Keeps everything when MAD is 0.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return np.ones(0, dtype=bool)
    median = np.median(x)
    mad = np.median(np.abs(x - median))
    if mad == 0:
        return np.ones(x.size, dtype=bool)
    return 0.6745 * np.abs(x - median) / mad <= threshold


def aggregate(
        results: Sequence[SessionResult],
        profile: AlgorithmProfile,
        config: EcuConfig,
        nominal_ns: Optional[int] = None,
        outlier_filter: str = "none",
) -> Metrics:
    """
    Cell statistics: sample mean and std (n - 1 denominator, 0.0 for a single
    value) of every duration over successful sessions; success rate over all.

    Raises:
        ValueError: if `results` is empty or mixes algorithms or configs.
    """
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    cells = {(r.algorithm, r.config) for r in results}
    if len(cells) != 1:
        raise ValueError(f"results span several cells: {sorted(cells)}")

    ok = [r for r in results if r.success]
    overheads = [session_overhead(r, nominal_ns) for r in ok]
    if ok and outlier_filter == "mad":
        keep = mad_filter(overheads)
        dropped = len(ok) - int(keep.sum())
        if dropped:
            logger.info(f"[Experiment] MAD filter dropped {dropped} of {len(ok)} sessions for "
                        f"{profile.name}/{config.name}")
        ok = [r for r, k in zip(ok, keep) if k]
        overheads = [o for o, k in zip(overheads, keep) if k]

    overhead = _stat(overheads)
    crypto_only = _stat([r.crypto_only_ns for r in ok])
    share = None
    if overhead is not None and crypto_only is not None and overhead.mean_ms > 0:
        share = crypto_only.mean_ms / overhead.mean_ms

    return Metrics(
        algorithm=profile.name,
        kind=profile.kind,
        config=config.name,
        cpu_hz=config.cpu_hz,
        bit_rate=config.bit_rate,
        security_level=profile.security_level,
        n_iterations=len(results),
        n_successful=len(ok),
        success_rate=sum(1 for r in results if r.success) / len(results),
        keygen=_stat([r.keygen_ns for r in ok]),
        op2=_stat([r.op2_ns for r in ok]),
        op3=_stat([r.op3_ns for r in ok]),
        overhead=overhead,
        crypto_only=crypto_only,
        wall=_stat([r.wall_clock_total_ns for r in ok]),
        bytes_on_wire_mean=float(np.mean([r.bytes_on_wire for r in ok])) if ok else None,
        nominal_ms=nominal_ns / NS_PER_MS if profile.kind == "DSA" and nominal_ns is not None else None,
        crypto_share=share,
    )


def run_cell(
        profile: AlgorithmProfile,
        config: EcuConfig,
        spec: CampaignSpec,
) -> CellResult:
    """Run every iteration of one cell; the first iteration's trace is kept when spec.record_trace."""
    model = resolve_compute_model(profile, spec.compute_model, ECU_PRESETS[CYCLE_REFERENCE_CONFIG])
    nominal = nominal_message_time(config.rate, spec.stuffing) if profile.kind == "DSA" else None
    results: List[SessionResult] = []
    trace: List[str] = []
    for i in range(spec.iterations):
        result, lines = run_session(profile, config, spec, i, model, record_trace=spec.record_trace and i == 0)
        results.append(result)
        if lines:
            trace = lines
    metrics = aggregate(results, profile, config, nominal, spec.outlier_filter)
    sessions = [session_record(r, nominal) for r in results]
    return CellResult(algorithm=profile.name, config=config.name, metrics=metrics, trace=trace, sessions=sessions)


def _run_cell_task(task: Tuple[AlgorithmProfile, EcuConfig, CampaignSpec]) -> CellResult:
    profile, config, spec = task
    try:
        return run_cell(profile, config, spec)
    except Exception as e:
        logger.error(f"[Experiment] cell {profile.name}/{config.name} failed: {e}")
        return CellResult(algorithm=profile.name, config=config.name, error=str(e))


def run_cells(
        spec: CampaignSpec,
        profiles: Dict[str, AlgorithmProfile],
        jobs: int = 1,
        on_cell: Optional[Callable[[int, int, CellResult], None]] = None,
) -> List[CellResult]:
    """
    Run every cell of the campaign in deterministic (algorithm, config) order.

    Cells that raise are returned with `error` set; the rest still complete.

    Args:
        spec (CampaignSpec): The campaign.
        profiles (dict): Loaded profiles by name.
        jobs (int): Worker processes; 1 runs inline.
        on_cell: Called as (index, total, cell) when each cell's result is collected.

    Raises:
        UnknownProfileError: if the campaign names a profile that is not loaded.
    """
    selected = [get_profile(profiles, name) for name in spec.algorithms]
    tasks = [(profile, config, spec) for profile in selected for config in spec.configs]
    total = len(tasks)
    logger.info(f"[Experiment] {len(selected)} algorithm(s) x {len(spec.configs)} config(s) x "
                f"{spec.iterations} iteration(s), jobs={jobs}")

    cells: List[CellResult] = []
    if jobs <= 1 or total <= 1:
        results: Iterable[CellResult] = map(_run_cell_task, tasks)
        for i, cell in enumerate(results, start=1):
            cells.append(cell)
            if on_cell is not None:
                on_cell(i, total, cell)
        return cells

    with ProcessPoolExecutor(max_workers=min(jobs, total)) as pool:
        for i, cell in enumerate(pool.map(_run_cell_task, tasks), start=1):
            cells.append(cell)
            if on_cell is not None:
                on_cell(i, total, cell)
    return cells


def run_campaign(
        spec: CampaignSpec,
        profiles: Dict[str, AlgorithmProfile],
        jobs: int = 1,
) -> List[Metrics]:
    """
    One Metrics per (algorithm, config) cell, in campaign order.

    Raises:
        UnknownProfileError: if the campaign names a profile that is not loaded.
        CampaignError: if any cell failed (e.g. no timings for a config).
    """
    cells = run_cells(spec, profiles, jobs)
    failures = [(c.algorithm, c.config, c.error) for c in cells if c.error is not None]
    if failures:
        raise CampaignError(failures)
    return [c.metrics for c in cells]


class ScalingEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: str
    overhead_ratio: float
    bit_rate_ratio: float
    relative_error: float
    within_tolerance: bool


class ScalingReport(BaseModel):
    """Overhead ratios against the fastest-bus config, next to the inverse bit-rate ratios."""
    model_config = ConfigDict(frozen=True)

    algorithm: str
    reference_config: str
    entries: List[ScalingEntry]
    communication_dominated: bool

    def __str__(self) -> str:
        parts = [f"{e.config}/{self.reference_config} {e.overhead_ratio:.3f} vs {e.bit_rate_ratio:.3f}"
                 for e in self.entries]
        verdict = "communication-dominated" if self.communication_dominated else "not communication-dominated"
        return f"{self.algorithm}: {', '.join(parts)} ({verdict})"


def scaling_check(metrics: Sequence[Metrics], tolerance: float = SCALING_TOLERANCE) -> ScalingReport:
    """
    Compare overhead ratios between configs with the inverse bit-rate ratios.

    Raises:
        ValueError: with fewer than two configs carrying an overhead, or
            metrics of more than one algorithm.
    """
    usable = [m for m in metrics if m.overhead is not None]
    algorithms = {m.algorithm for m in metrics}
    if len(algorithms) > 1:
        raise ValueError(f"scaling_check takes one algorithm, got {sorted(algorithms)}")
    if len(usable) < 2:
        raise ValueError("scaling_check needs at least two configs with a successful session")

    reference = max(usable, key=lambda m: m.bit_rate)
    entries = []
    for m in usable:
        if m is reference:
            continue
        ratio = m.overhead.mean_ms / reference.overhead.mean_ms
        expected = reference.bit_rate / m.bit_rate
        error = abs(ratio / expected - 1.0)
        entries.append(ScalingEntry(
            config=m.config,
            overhead_ratio=ratio,
            bit_rate_ratio=expected,
            relative_error=error,
            within_tolerance=error <= tolerance,
        ))
    return ScalingReport(
        algorithm=reference.algorithm,
        reference_config=reference.config,
        entries=entries,
        communication_dominated=all(e.within_tolerance for e in entries),
    )


class ReferenceComparison(BaseModel):
    """
    Simulated cell next to the published values for the same cell.

    op_sum_ms is the sum of the published per-operation means; crypto_only_z
    is (crypto_only mean - op_sum) over its standard error. wire_floor_ms is
    the bare wire time of the session's messages at the cell's bit rate
    without stuffing.
    """
    model_config = ConfigDict(frozen=True)

    algorithm: str
    kind: str
    config: str
    overhead_ms: Optional[float] = None
    crypto_only_ms: Optional[float] = None
    published_overhead_ms: Optional[float] = None
    published_overhead_std_ms: Optional[float] = None
    published_success_rate: Optional[float] = None
    success_rate: float
    op_sum_ms: Optional[float] = None
    crypto_only_z: Optional[float] = None
    wire_floor_ms: float
    overhead_ratio: Optional[float] = None
    crypto_only_ratio: Optional[float] = None
    wire_floor_exceeds_published: bool = False


def _wire_floor_ns(profile: AlgorithmProfile, config: EcuConfig) -> int:
    none = StuffingModel.none()
    if profile.kind == "KEM":
        lengths = [profile.sizes.public_key, profile.sizes.ciphertext or 0]
    else:
        lengths = [profile.sizes.public_key, DSA_MESSAGE_LENGTH + (profile.sizes.signature or 0)]
    return sum(bits_to_ns(transmission_bit_cost(n, none), config.rate) for n in lengths)


def compare_with_reference(
        metrics: Sequence[Metrics],
        profiles: Dict[str, AlgorithmProfile],
) -> List[ReferenceComparison]:
    """
    Line up simulated cells with the published reference block of each profile.
    Cells whose profile or config has no reference are still listed with the
    published fields empty.

    Raises:
        UnknownProfileError: if a metrics row names a profile that is not loaded.
    """
    rows = []
    for m in metrics:
        profile = get_profile(profiles, m.algorithm)
        ref = profile.reference.get(m.config)
        if m.bit_rate > 0 and m.cpu_hz > 0:
            config = EcuConfig(name=m.config, cpu_hz=m.cpu_hz, bit_rate=m.bit_rate)
        else:
            config = EcuConfig.preset(m.config)
        floor_ms = _wire_floor_ns(profile, config) / NS_PER_MS

        op_sum = z = None
        table = profile.timings.timings.get(m.config) if profile.timings is not None else None
        if table is not None and all(op in table for op in profile.operations):
            timings = [table[op] for op in profile.operations]
            op_sum = sum(t.mean_ms for t in timings)
            if m.crypto_only is not None and m.n_successful > 0:
                se = math.sqrt(sum(t.std_ms ** 2 for t in timings) / m.n_successful)
                z = (m.crypto_only.mean_ms - op_sum) / se if se > 0 else 0.0

        published = ref.overhead if ref is not None else None
        overhead_ms = m.overhead.mean_ms if m.overhead is not None else None
        crypto_ms = m.crypto_only.mean_ms if m.crypto_only is not None else None
        rows.append(ReferenceComparison(
            algorithm=m.algorithm,
            kind=m.kind,
            config=m.config,
            overhead_ms=overhead_ms,
            crypto_only_ms=crypto_ms,
            published_overhead_ms=published.mean_ms if published is not None else None,
            published_overhead_std_ms=published.std_ms if published is not None else None,
            published_success_rate=ref.success_rate if ref is not None else None,
            success_rate=m.success_rate,
            op_sum_ms=op_sum,
            crypto_only_z=z,
            wire_floor_ms=floor_ms,
            overhead_ratio=(overhead_ms / published.mean_ms
                            if published is not None and overhead_ms is not None and published.mean_ms > 0 else None),
            crypto_only_ratio=(crypto_ms / published.mean_ms
                               if published is not None and crypto_ms is not None and published.mean_ms > 0 else None),
            wire_floor_exceeds_published=published is not None and floor_ms > published.mean_ms,
        ))
    return rows
