"""
Unit tests for run configuration and settings.
"""
import json
from pathlib import Path

import pytest

from src.krflow.commands.config_loader import load_run_config, read_config_file, resolve_output_dir
from src.krflow.errors import ConfigError
from src.krflow.models.config import RunConfig, ScheduleConfig
from src.krflow.settings import get_settings, reset_settings


class TestValidation:
    """Tests for the strict config schema."""

    def test_unknown_key_is_named(self):
        """Test a misspelled key is rejected with its dotted path."""
        with pytest.raises(ConfigError) as excinfo:
            load_run_config({}, base={"scenario": {"gird_N": 16}})
        assert "scenario.gird_N" in str(excinfo.value)

    def test_N_power_of_two(self):
        """Test grid sizes must be powers of two."""
        with pytest.raises(ConfigError, match="scenario.N"):
            load_run_config({"N": 24})
        assert load_run_config({"N": 32}).scenario.N == 32

    def test_unknown_scenario(self):
        """Test unknown scenario names are rejected."""
        with pytest.raises(ConfigError):
            load_run_config({"scenario": "sphere"})

    def test_unknown_monitor(self):
        """Test monitor names are checked."""
        with pytest.raises(ConfigError, match="monitors"):
            load_run_config({"monitors": ["identities", "ricci_soliton"]})

    def test_defaults(self):
        """Test the default configuration."""
        config = RunConfig()
        assert config.scenario.name == "generic_ample"
        assert config.flow.dt_max == 0.02
        assert config.certificates.C_u == "auto"
        assert config.seed == 7


class TestLoading:
    """Tests for config files and flag overrides."""

    def test_json_file_with_overrides(self, tmp_path):
        """Test flags win over the file."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"scenario": {"name": "homogeneous", "n": 1, "N": 8}, "seed": 3}))
        config = load_run_config({"config": str(path), "N": 16, "C_v": 20.0})
        assert config.scenario.name == "homogeneous"
        assert config.scenario.N == 16
        assert config.certificates.C_v == 20.0
        assert config.seed == 3

    def test_toml_file(self, tmp_path):
        """Test TOML configs are read by suffix."""
        path = tmp_path / "run.toml"
        path.write_text('[scenario]\nname = "ke_fixed_point"\nn = 1\nN = 8\n\n[flow]\nsigma = 0.5\n')
        config = load_run_config({"config": str(path)})
        assert config.scenario.name == "ke_fixed_point"
        assert config.flow.sigma == 0.5

    def test_unreadable_files(self, tmp_path):
        """Test missing and malformed files raise ConfigError."""
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(ConfigError):
            read_config_file(broken)
        listed = tmp_path / "list.json"
        listed.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            read_config_file(listed)

    def test_base_is_not_mutated(self):
        """Test overrides leave the base mapping untouched."""
        base = {"scenario": {"name": "homogeneous", "n": 1, "N": 8}}
        load_run_config({"N": 16}, base=base)
        assert base["scenario"]["N"] == 8

    def test_times_replace_dt_out(self):
        """Test explicit times switch off the uniform schedule."""
        config = load_run_config({"times": [0.0, 1.0, 2.5]})
        assert config.schedule.dt_out is None
        assert config.schedule.times == [0.0, 1.0, 2.5]


class TestSchedule:
    """Tests for snapshot schedules."""

    def test_uniform(self):
        """Test uniform spacing ends exactly at t_end."""
        assert ScheduleConfig(dt_out=0.5).resolve(1.0) == [0.0, 0.5, 1.0]
        assert ScheduleConfig(dt_out=0.4).resolve(1.0) == pytest.approx([0.0, 0.4, 0.8, 1.0])

    def test_explicit_times_truncated(self):
        """Test explicit times past t_end are dropped."""
        assert ScheduleConfig(dt_out=None, times=[0.0, 1.0, 3.0]).resolve(2.0) == [0.0, 1.0]

    def test_invalid(self):
        """Test empty or decreasing schedules are rejected."""
        with pytest.raises(ValueError):
            ScheduleConfig(dt_out=None, times=[1.0, 0.5])
        with pytest.raises(ValueError):
            ScheduleConfig(dt_out=None, times=None)


class TestSettings:
    """Tests for environment settings."""

    def test_output_root_from_env(self, monkeypatch, tmp_path):
        """Test KRFLOW_OUTPUT_ROOT drives the default output directory."""
        monkeypatch.setenv("KRFLOW_OUTPUT_ROOT", str(tmp_path))
        reset_settings()
        try:
            config = RunConfig.model_validate({"scenario": {"name": "fibration", "N": 8}})
            assert resolve_output_dir(config) == tmp_path / "fibration_n2_N8"
        finally:
            reset_settings()

    def test_explicit_output_dir(self, tmp_path):
        """Test an explicit output_dir wins."""
        config = RunConfig(output_dir=tmp_path / "here")
        assert resolve_output_dir(config) == Path(tmp_path / "here")

    def test_log_level_validated(self, monkeypatch):
        """Test the log level comes from KRFLOW_LOG_LEVEL."""
        monkeypatch.setenv("KRFLOW_LOG_LEVEL", "debug")
        reset_settings()
        try:
            assert get_settings().log_level == "DEBUG"
        finally:
            reset_settings()
