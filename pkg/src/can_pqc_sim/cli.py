"""
Command-line entry point for can_pqc_sim.

    can-pqc-sim run --config PATH [--jobs N] [--seed S] [--out DIR]
    can-pqc-sim report --input CSV [--format csv|markdown|both]
    can-pqc-sim compare --input CSV [--profiles PATH]
    can-pqc-sim list-algorithms [--profiles PATH] [--all]
    can-pqc-sim validate-config --config PATH

Data goes to files or standard output; progress and diagnostics go to
standard error. Exit status: 0 on success, 1 on any run or configuration
error, 2 on usage errors.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

from pydantic import ValidationError

from can_pqc_sim import __version__
from can_pqc_sim.config.config import ConfigurationError, get_log_level, get_profiles_path, load_run_config
from can_pqc_sim.core.experiment import CellResult, compare_with_reference, run_cells
from can_pqc_sim.core.profiles import ProfileError, default_campaign_algorithms, index_profiles, load_profiles
from can_pqc_sim.core.report import (
    ReportError,
    metrics_to_csv,
    read_metrics_csv,
    render_comparison,
    render_markdown,
    write_markdown,
    write_metrics_csv,
    write_sessions_csv,
)
from can_pqc_sim.logs.default_logger import configure_logging
from can_pqc_sim.logs.trace_logger import TraceLogger
from can_pqc_sim.schemas.profile import AlgorithmProfile
from can_pqc_sim.validators.config_validator import validate_run_config

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_ERROR = 1


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def _load_profiles(path: Optional[str], relative_to: Optional[Path] = None) -> Dict[str, AlgorithmProfile]:
    configured = Path(path) if path else None
    if configured is not None and relative_to is not None and not configured.is_absolute():
        configured = relative_to / configured
    return index_profiles(load_profiles(get_profiles_path(configured)))


def _describe(profile: AlgorithmProfile) -> str:
    sizes = profile.sizes
    second = f"ct={sizes.ciphertext}" if profile.kind == "KEM" else f"sig={sizes.signature}"
    timed = "" if profile.timings is not None else "  (sizes only)"
    return f"{profile.name:<20} {profile.kind}  L{profile.security_level}  pk={sizes.public_key}  {second}{timed}"


def cmd_list_algorithms(args: argparse.Namespace) -> int:
    """One line per profile: name, kind, security level, pk and ct/sig sizes."""
    profiles = load_profiles(Path(args.profiles) if args.profiles else get_profiles_path())
    shown = profiles if args.all else [p for p in profiles if p.campaign_default and p.timings is not None]
    for profile in shown:
        print(_describe(profile))
    return EXIT_OK


def _progress(index: int, total: int, cell: CellResult) -> None:
    if cell.error is not None:
        logger.error(f"[Campaign] {index}/{total} {cell.algorithm}/{cell.config} FAILED: {cell.error}")
        return
    m = cell.metrics
    overhead = f"{m.overhead.mean_ms:.3f} ms" if m.overhead is not None else "-"
    logger.info(f"[Campaign] {index}/{total} {cell.algorithm}/{cell.config} "
                f"success={m.success_rate:.2f} overhead={overhead}")


def cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    config = load_run_config(config_path)
    profiles = _load_profiles(config.profiles, relative_to=config_path.parent)

    campaign = config.campaign
    if args.seed is not None:
        campaign = campaign.model_copy(update={"master_seed": args.seed})
    out_dir = Path(args.out or config.output.directory)
    spec = campaign.to_spec(default_campaign_algorithms(profiles.values()), record_trace=config.output.trace_dump)

    cells = run_cells(spec, profiles, jobs=args.jobs, on_cell=_progress)
    metrics = [c.metrics for c in cells if c.metrics is not None]

    fmt = config.output.format
    if fmt in ("csv", "both"):
        write_metrics_csv(metrics, out_dir / "results.csv")
        write_sessions_csv((record for cell in cells for record in cell.sessions), out_dir / "sessions.csv")
    if fmt in ("markdown", "both"):
        write_markdown(metrics, out_dir / "results.md")
    if config.output.trace_dump:
        traces = TraceLogger(str(out_dir / "traces"))
        for cell in cells:
            if cell.trace:
                traces.log(f"{cell.algorithm}_{cell.config}", cell.trace)
        for path in traces.save():
            logger.debug(f"[Campaign] trace written to {path}")

    failed = [c for c in cells if c.error is not None]
    if failed:
        for cell in failed:
            print(f"error: cell {cell.algorithm}/{cell.config}: {cell.error}", file=sys.stderr)
        return EXIT_ERROR
    logger.info(f"[Campaign] {len(metrics)} cell(s) written to {out_dir}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    metrics = read_metrics_csv(args.input)
    if args.format in ("csv", "both"):
        sys.stdout.write(metrics_to_csv(metrics))
    if args.format == "both":
        sys.stdout.write("\n")
    if args.format in ("markdown", "both"):
        sys.stdout.write(render_markdown(metrics))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    metrics = read_metrics_csv(args.input)
    profiles = index_profiles(load_profiles(Path(args.profiles) if args.profiles else get_profiles_path()))
    sys.stdout.write(render_comparison(compare_with_reference(metrics, profiles)))
    return EXIT_OK


def cmd_validate_config(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    config = load_run_config(config_path)
    profiles = _load_profiles(config.profiles, relative_to=config_path.parent)
    problems = validate_run_config(config, profiles)
    for problem in problems:
        print(f"error: {problem}", file=sys.stderr)
    if problems:
        return EXIT_ERROR
    print(f"{config_path}: OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="can-pqc-sim",
        description="Simulate post-quantum KEM and signature exchanges over a CAN bus.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign and write results")
    run.add_argument("--config", required=True, help="run config (YAML)")
    run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="worker processes (default: number of processors)")
    run.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="override the master seed")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.set_defaults(handler=cmd_run)

    report = sub.add_parser("report", help="render a results CSV")
    report.add_argument("--input", required=True, help="results CSV")
    report.add_argument("--format", choices=("csv", "markdown", "both"), default="markdown")
    report.set_defaults(handler=cmd_report)

    compare = sub.add_parser("compare", help="compare results with the published reference values")
    compare.add_argument("--input", required=True, help="results CSV")
    compare.add_argument("--profiles", default=None, help="profile file (default: packaged profiles)")
    compare.set_defaults(handler=cmd_compare)

    listing = sub.add_parser("list-algorithms", help="list algorithm profiles")
    listing.add_argument("--profiles", default=None, help="profile file (default: packaged profiles)")
    listing.add_argument("--all", action="store_true", help="include size-only profiles")
    listing.set_defaults(handler=cmd_list_algorithms)

    validate = sub.add_parser("validate-config", help="check a run config without running it")
    validate.add_argument("--config", required=True, help="run config (YAML)")
    validate.set_defaults(handler=cmd_validate_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")

    try:
        configure_logging(get_log_level())
        return args.handler(args)
    except (ConfigurationError, ProfileError, ReportError) as e:
        return _fail(str(e))
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "<root>"
        return _fail(f"invalid campaign: {field}: {first['msg']}")
    except OSError as e:
        return _fail(f"{e.strerror or e}: {getattr(e, 'filename', '') or ''}".rstrip(": "))


if __name__ == "__main__":
    sys.exit(main())
