"""
Logging setup for the simulator and its command-line front end.

Records go to standard error so results printed on standard output stay
machine-readable. The simulator's components log under their own short
names (see SIMULATOR_LOGGERS); only those follow the requested level,
third-party libraries stay at WARNING.
"""

import logging
import sys

SIMULATOR_LOGGERS = (
    "bus_sim",
    "transport",
    "protocol",
    "crypto_model",
    "experiment",
    "profiles",
    "report",
    "config_validator",
    "cli",
)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def configure_logging(level: int = logging.INFO, force: bool = False) -> None:
    """
    Send simulator logs at `level` and above to standard error.

    Campaign workers are forked from the configured parent and inherit the
    handler. DEBUG is per frame and slows a campaign down considerably.

    Args:
        level (int): Level for the simulator loggers. Defaults to logging.INFO.
        force (bool): Replace handlers already installed on the root logger.
                      Defaults to False, which leaves an existing setup alone.
    """
    root_logger = logging.getLogger()

    if root_logger.hasHandlers():
        if not force:
            return
        root_logger.handlers.clear()

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(handler)
    root_logger.setLevel(logging.WARNING)

    for name in SIMULATOR_LOGGERS:
        logging.getLogger(name).setLevel(level)
