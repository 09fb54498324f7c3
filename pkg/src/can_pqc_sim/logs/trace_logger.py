"""
Bus trace logger for can_pqc_sim.

Collects event-trace lines of recorded sessions in memory and writes one
TSV file per trace under `<output>/traces/` for debugging and diffing runs.
"""

import os
from typing import Dict, Iterable, List

TRACE_HEADER = "time_ns\tkind\tnode\tcan_id\tdlc\tdata"


class TraceLogger:
    """
    A lightweight logger that stores trace lines in memory and saves each
    named trace to `<log_dir>/<name>.tsv`.
    """

    def __init__(self, log_dir: str = "traces") -> None:
        """
        Args:
            log_dir (str): Directory where traces are saved.
                           Defaults to "traces".
        """
        self.traces: Dict[str, List[str]] = {}
        self.log_dir = log_dir

    def log(self, name: str, lines: Iterable[str]) -> None:
        """
        Append trace lines under `name` (e.g. "Kyber512_high").

        Args:
            name (str): Trace name; becomes the file name.
            lines (Iterable[str]): TSV lines as produced by dump_trace().
        """
        self.traces.setdefault(_safe_name(name), []).extend(lines)

    def save(self) -> List[str]:
        """
        Write every accumulated trace and clear the in-memory buffer.

        Returns:
            list[str]: paths of the written files.
        """
        if not self.traces:
            return []

        os.makedirs(self.log_dir, exist_ok=True)
        written = []
        for name, lines in self.traces.items():
            filename = os.path.join(self.log_dir, f"{name}.tsv")
            with open(filename, "w", encoding="utf-8") as f:
                f.write(TRACE_HEADER + "\n")
                for line in lines:
                    f.write(line + "\n")
            written.append(filename)

        self.traces.clear()
        return written


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
