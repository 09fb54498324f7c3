"""
Run configuration validation for can_pqc_sim.
Checks a parsed run config against the loaded profiles before any session runs.
"""

import logging
import os
from pathlib import Path
from typing import Dict, List

from can_pqc_sim.core.crypto import ComputeModelError, resolve_compute_model
from can_pqc_sim.core.experiment import CYCLE_REFERENCE_CONFIG
from can_pqc_sim.core.profiles import UnknownProfileError, default_campaign_algorithms, get_profile
from can_pqc_sim.schemas.campaign import ECU_PRESETS
from can_pqc_sim.schemas.profile import AlgorithmProfile
from can_pqc_sim.schemas.run_config import RunConfig

logger = logging.getLogger("config_validator")


def _output_writable(directory: Path) -> bool:
    existing = directory
    while not existing.exists():
        if existing.parent == existing:
            return False
        existing = existing.parent
    return existing.is_dir() and os.access(existing, os.W_OK)


def validate_run_config(config: RunConfig, profiles: Dict[str, AlgorithmProfile]) -> List[str]:
    """
    Validate a run config against the loaded profiles.

    Args:
        config (RunConfig): Parsed run config.
        profiles (dict): Loaded profiles by name.

    Returns:
        list[str]: one message per problem; empty when the config can run.
    """
    problems: List[str] = []
    campaign = config.campaign
    names = campaign.algorithms or default_campaign_algorithms(profiles.values())
    if not names:
        problems.append("no algorithms selected and no default timed profiles loaded")

    for name in names:
        try:
            profile = get_profile(profiles, name)
        except UnknownProfileError as e:
            problems.append(str(e))
            continue
        try:
            model = resolve_compute_model(profile, campaign.compute_model, ECU_PRESETS[CYCLE_REFERENCE_CONFIG])
        except ComputeModelError as e:
            problems.append(str(e))
            continue
        if campaign.compute_model == "table_driven":
            missing = [c.name for c in campaign.configs if c.name not in model.timings]
            if missing:
                problems.append(f"profile '{profile.name}' has no timings for config(s) {missing}")

    if not _output_writable(Path(config.output.directory)):
        problems.append(f"output directory '{config.output.directory}' is not writable")

    for problem in problems:
        logger.warning(f"[Validator] {problem}")
    if not problems:
        logger.info(f"[Validator] run config OK: {len(names)} algorithm(s) x {len(campaign.configs)} config(s)")
    return problems
