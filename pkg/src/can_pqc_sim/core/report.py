"""
Result files for can_pqc_sim: the per-cell CSV and its markdown rendering.

CSV schema (one row per (algorithm, config) cell, header always present):

    algorithm, kind, config, security_level, n_iterations, success_rate,
    keygen_mean_ms, keygen_std_ms, op2_mean_ms, op2_std_ms, op3_mean_ms,
    op3_std_ms, overhead_mean_ms, overhead_std_ms, crypto_only_mean_ms,
    bytes_on_wire_mean,
    cpu_hz, bit_rate, n_successful, crypto_only_std_ms, wall_mean_ms,
    wall_std_ms, nominal_ms, crypto_share

Floats are written with 6 decimals; absent values are empty cells. The
first block of columns is required when reading, the second is optional.
The markdown report is a pure function of the CSV.

sessions.csv carries one row per session (SESSION_CSV_HEADER) for
per-iteration analysis; it is written but never read back.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from pydantic import ValidationError

from can_pqc_sim.core.experiment import ReferenceComparison
from can_pqc_sim.core.protocol import SESSION_CSV_HEADER
from can_pqc_sim.schemas.campaign import Metrics, TimingStat

logger = logging.getLogger("report")

REQUIRED_COLUMNS = (
    "algorithm", "kind", "config", "security_level", "n_iterations", "success_rate",
    "keygen_mean_ms", "keygen_std_ms", "op2_mean_ms", "op2_std_ms", "op3_mean_ms", "op3_std_ms",
    "overhead_mean_ms", "overhead_std_ms", "crypto_only_mean_ms", "bytes_on_wire_mean",
)
EXTRA_COLUMNS = (
    "cpu_hz", "bit_rate", "n_successful", "crypto_only_std_ms", "wall_mean_ms", "wall_std_ms",
    "nominal_ms", "crypto_share",
)
CSV_COLUMNS = REQUIRED_COLUMNS + EXTRA_COLUMNS

_STATS = ("keygen", "op2", "op3", "overhead", "crypto_only", "wall")


class ReportError(ValueError):
    """Raised when a results file does not match the CSV schema."""
    pass


def _f(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def metrics_row(m: Metrics) -> Dict[str, str]:
    row = {
        "algorithm": m.algorithm,
        "kind": m.kind,
        "config": m.config,
        "security_level": str(m.security_level),
        "n_iterations": str(m.n_iterations),
        "success_rate": _f(m.success_rate),
        "bytes_on_wire_mean": _f(m.bytes_on_wire_mean),
        "cpu_hz": str(m.cpu_hz),
        "bit_rate": str(m.bit_rate),
        "n_successful": str(m.n_successful),
        "nominal_ms": _f(m.nominal_ms),
        "crypto_share": _f(m.crypto_share),
    }
    for name in _STATS:
        stat: Optional[TimingStat] = getattr(m, name)
        row[f"{name}_mean_ms"] = _f(stat.mean_ms if stat is not None else None)
        row[f"{name}_std_ms"] = _f(stat.std_ms if stat is not None else None)
    return {column: row[column] for column in CSV_COLUMNS}


def metrics_to_csv(metrics: Sequence[Metrics]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
    writer.writeheader()
    for m in metrics:
        writer.writerow(metrics_row(m))
    return buffer.getvalue()


def write_metrics_csv(metrics: Sequence[Metrics], path: Union[str, Path]) -> Path:
    """Write the CSV, creating parent directories. Raises OSError if unwritable."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(metrics_to_csv(metrics), encoding="utf-8")
    logger.info(f"[Report] wrote {len(metrics)} row(s) to {path}")
    return path


def write_sessions_csv(records: Iterable[Dict[str, str]], path: Union[str, Path]) -> Path:
    """Write per-session records, header first, in the order given. Raises OSError if unwritable."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(SESSION_CSV_HEADER), lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow(record)
            count += 1
    logger.info(f"[Report] wrote {count} session row(s) to {path}")
    return path


def _opt_float(value: Optional[str]) -> Optional[float]:
    if value is None or value == "":
        return None
    return float(value)


def _stat_from(row: Dict[str, str], name: str) -> Optional[TimingStat]:
    mean = _opt_float(row.get(f"{name}_mean_ms"))
    if mean is None:
        return None
    return TimingStat(mean_ms=mean, std_ms=_opt_float(row.get(f"{name}_std_ms")) or 0.0)


def _metrics_from_row(row: Dict[str, str]) -> Metrics:
    n_iterations = int(row["n_iterations"])
    success_rate = float(row["success_rate"])
    n_successful = row.get("n_successful")
    return Metrics(
        algorithm=row["algorithm"],
        kind=row["kind"],
        config=row["config"],
        cpu_hz=int(row.get("cpu_hz") or 0),
        bit_rate=int(row.get("bit_rate") or 0),
        security_level=int(row["security_level"]),
        n_iterations=n_iterations,
        n_successful=int(n_successful) if n_successful else round(success_rate * n_iterations),
        success_rate=success_rate,
        keygen=_stat_from(row, "keygen"),
        op2=_stat_from(row, "op2"),
        op3=_stat_from(row, "op3"),
        overhead=_stat_from(row, "overhead"),
        crypto_only=_stat_from(row, "crypto_only"),
        wall=_stat_from(row, "wall"),
        bytes_on_wire_mean=_opt_float(row.get("bytes_on_wire_mean")),
        nominal_ms=_opt_float(row.get("nominal_ms")),
        crypto_share=_opt_float(row.get("crypto_share")),
    )


def parse_metrics_csv(text: str, source: str = "<csv>") -> List[Metrics]:
    """
    Raises:
        ReportError: if required columns are missing or a row does not parse.
    """
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ReportError(f"{source}: missing columns {missing}")
    metrics = []
    for line, row in enumerate(reader, start=2):
        try:
            metrics.append(_metrics_from_row(row))
        except (ValueError, ValidationError, TypeError) as e:
            raise ReportError(f"{source}:{line}: {e}") from e
    return metrics


def read_metrics_csv(path: Union[str, Path]) -> List[Metrics]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ReportError(f"cannot read {path}: {e.strerror or e}") from e
    return parse_metrics_csv(text, source=str(path))


def _cell(stat: Optional[TimingStat]) -> str:
    return "-" if stat is None else f"{stat.mean_ms:.3f} ± {stat.std_ms:.3f}"


def _overhead_key(m: Metrics):
    return (m.overhead is None, m.overhead.mean_ms if m.overhead is not None else 0.0, m.algorithm, m.config)


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(headers)]
    lines = ["| " + " | ".join(h.ljust(w) for h, w in zip(headers, widths)) + " |",
             "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    for r in rows:
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |")
    return lines


def render_markdown(metrics: Sequence[Metrics]) -> str:
    """
    KEM and DSA results as separate aligned markdown tables, each sorted by
    ascending mean overhead (cells without successful sessions last).
    """
    sections: List[str] = []
    kem = sorted((m for m in metrics if m.kind == "KEM"), key=_overhead_key)
    dsa = sorted((m for m in metrics if m.kind == "DSA"), key=_overhead_key)

    if kem:
        headers = ["Algorithm", "Config", "Keygen [ms]", "Encaps [ms]", "Decaps [ms]",
                   "Overhead [ms]", "Crypto-only [ms]", "Success", "Level"]
        rows = [[m.algorithm, m.config, _cell(m.keygen), _cell(m.op2), _cell(m.op3), _cell(m.overhead),
                 _cell(m.crypto_only), f"{m.success_rate:.2f}", str(m.security_level)] for m in kem]
        sections.append("\n".join(["### KEM", ""] + _table(headers, rows)))
    if dsa:
        headers = ["Algorithm", "Config", "Nominal [ms]", "Keygen [ms]", "Sign [ms]", "Verify [ms]",
                   "Overhead [ms]", "Success", "Level"]
        rows = [[m.algorithm, m.config, "-" if m.nominal_ms is None else f"{m.nominal_ms:.3f}",
                 _cell(m.keygen), _cell(m.op2), _cell(m.op3), _cell(m.overhead),
                 f"{m.success_rate:.2f}", str(m.security_level)] for m in dsa]
        sections.append("\n".join(["### DSA", ""] + _table(headers, rows)))
    if not sections:
        return "_no results_\n"
    return "\n\n".join(sections) + "\n"


def write_markdown(metrics: Sequence[Metrics], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_markdown(metrics), encoding="utf-8")
    return path


def _opt(value: Optional[float], fmt: str = ".3f") -> str:
    return "-" if value is None else format(value, fmt)


def render_comparison(rows: Sequence[ReferenceComparison]) -> str:
    """Simulated vs published overhead per cell, flagging cells whose bare wire time exceeds the published value."""
    if not rows:
        return "_no results_\n"
    headers = ["Algorithm", "Config", "Wall overhead [ms]", "Crypto-only [ms]", "Published [ms]",
               "Wall/pub", "Crypto/pub", "Op sum [ms]", "Crypto z", "Wire floor [ms]", "Flag"]
    body = []
    for r in rows:
        body.append([
            r.algorithm, r.config, _opt(r.overhead_ms), _opt(r.crypto_only_ms), _opt(r.published_overhead_ms),
            _opt(r.overhead_ratio, ".2f"), _opt(r.crypto_only_ratio, ".2f"), _opt(r.op_sum_ms),
            _opt(r.crypto_only_z, ".2f"), _opt(r.wire_floor_ms),
            "wire floor > published" if r.wire_floor_exceeds_published else "",
        ])
    return "\n".join(_table(headers, body)) + "\n"
