"""
Run configs, environment overrides, pre-run validation and trace files.
"""

import logging
from pathlib import Path

import pytest

from can_pqc_sim.config.config import (
    ConfigurationError,
    default_profiles_path,
    get_log_level,
    get_profiles_path,
    get_seed_override,
    load_run_config,
    parse_run_config,
)
from can_pqc_sim.logs.default_logger import SIMULATOR_LOGGERS, configure_logging
from can_pqc_sim.logs.trace_logger import TRACE_HEADER, TraceLogger
from can_pqc_sim.validators.config_validator import validate_run_config
from conftest import make_kem

CONFIG = """\
campaign:
  algorithms: [Kyber512]
  configs: [high, {name: bench, cpu_hz: 100000000, bit_rate: 250000}]
  iterations: 5
  stuffing: none
  jitter_ms: 1.5
output:
  directory: OUT
"""


def _config_text(out):
    return CONFIG.replace("OUT", str(out))


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("PQCAN_PROFILES", "PQCAN_SEED", "PQCAN_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def test_parse_run_config(tmp_path):
    config = parse_run_config(_config_text(tmp_path))
    spec = config.campaign.to_spec(["ignored"])
    assert spec.algorithms == ["Kyber512"]
    assert [c.name for c in spec.configs] == ["high", "bench"]
    assert spec.configs[1].bit_rate == 250_000
    assert spec.stuffing.mode == "none"
    assert spec.jitter_ns == 1_500_000
    assert spec.receiver_timeout_ns == 2_000_000_000
    assert spec.master_seed == 2025


def test_empty_config_uses_defaults():
    config = parse_run_config("")
    spec = config.campaign.to_spec(["Kyber512", "Dilithium2"])
    assert spec.algorithms == ["Kyber512", "Dilithium2"]
    assert [c.name for c in spec.configs] == ["high", "mid", "low"]
    assert spec.iterations == 100
    assert config.output.format == "both"


@pytest.mark.parametrize("text, fragment", [
    ("campaign:\n  iteratons: 5\n", "iteratons"),
    ("campaign:\n  configs: [fastest]\n", "configs"),
    ("campaign:\n  stuffing: sometimes\n", "stuffing"),
    ("campaign:\n  jitter_ms: -1\n", "jitter_ms"),
    ("output:\n  format: pdf\n", "format"),
    ("campaign: [unclosed\n", "YAML error"),
    ("- just\n- a list\n", "mapping"),
])
def test_invalid_configs(text, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        parse_run_config(text, source="run.yaml")


def test_seed_override_from_environment(monkeypatch):
    monkeypatch.setenv("PQCAN_SEED", "0x10")
    assert get_seed_override() == 16
    assert parse_run_config("campaign:\n  master_seed: 1\n").campaign.master_seed == 16
    monkeypatch.setenv("PQCAN_SEED", "abc")
    with pytest.raises(ConfigurationError):
        get_seed_override()


def test_profiles_path_precedence(monkeypatch, tmp_path):
    assert get_profiles_path() == default_profiles_path()
    assert get_profiles_path(tmp_path / "p.yaml") == tmp_path / "p.yaml"
    monkeypatch.setenv("PQCAN_PROFILES", str(tmp_path / "env.yaml"))
    assert get_profiles_path(tmp_path / "p.yaml") == tmp_path / "env.yaml"


def test_log_level(monkeypatch):
    assert get_log_level() == logging.INFO
    monkeypatch.setenv("PQCAN_LOG_LEVEL", "debug")
    assert get_log_level() == logging.DEBUG
    monkeypatch.setenv("PQCAN_LOG_LEVEL", "loud")
    with pytest.raises(ConfigurationError):
        get_log_level()


@pytest.fixture
def _restore_logging():
    root = logging.getLogger()
    saved = (root.handlers[:], root.level, {name: logging.getLogger(name).level for name in SIMULATOR_LOGGERS})
    yield
    root.handlers[:], root.level = saved[0], saved[1]
    for name, level in saved[2].items():
        logging.getLogger(name).setLevel(level)


def test_configure_logging_scopes_level_to_simulator_loggers(_restore_logging):
    configure_logging(logging.DEBUG, force=True)
    root = logging.getLogger()
    assert len(root.handlers) == 1
    assert root.level == logging.WARNING
    assert logging.getLogger("bus_sim").isEnabledFor(logging.DEBUG)
    assert not logging.getLogger("urllib3").isEnabledFor(logging.INFO)

    # already configured: a second call without force changes nothing
    configure_logging(logging.ERROR)
    assert len(root.handlers) == 1
    assert logging.getLogger("transport").level == logging.DEBUG


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_run_config(tmp_path / "missing.yaml")


def test_validator_accepts_runnable_config(tmp_path, packaged_profiles):
    config = parse_run_config(_config_text(tmp_path).replace(", {name: bench, cpu_hz: 100000000, bit_rate: 250000}", ""))
    assert validate_run_config(config, packaged_profiles) == []


def test_validator_lists_every_problem(tmp_path, packaged_profiles):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    text = (
        "campaign:\n  algorithms: [Kyber9999, mceliece348864, Kyber512]\n"
        "  configs: [high, {name: bench, cpu_hz: 100000000, bit_rate: 250000}]\n"
        f"output:\n  directory: {blocker / 'sub'}\n"
    )
    problems = validate_run_config(parse_run_config(text), packaged_profiles)
    assert len(problems) == 4
    assert "Kyber9999" in problems[0]
    assert "sizes only" in problems[1]
    assert "bench" in problems[2]
    assert "not writable" in problems[3]


def test_validator_cycle_based_needs_reference_timings(tmp_path):
    kem = make_kem(configs=("mid",))
    config = parse_run_config(f"campaign:\n  algorithms: [TestKEM]\n  compute_model: cycle_based\n"
                              f"output:\n  directory: {tmp_path}\n")
    problems = validate_run_config(config, {kem.name: kem})
    assert len(problems) == 1 and "'high'" in problems[0]


def test_trace_logger_writes_one_file_per_trace(tmp_path):
    traces = TraceLogger(str(tmp_path / "traces"))
    assert traces.save() == []
    traces.log("SPHINCS+-SHA2-128f_high", ["0\ttx_queued\t1\t010\t8\t00"])
    paths = traces.save()
    assert [Path(p).name for p in paths] == ["SPHINCS_-SHA2-128f_high.tsv"]
    assert Path(paths[0]).read_text().splitlines() == [TRACE_HEADER, "0\ttx_queued\t1\t010\t8\t00"]
    assert traces.traces == {}
