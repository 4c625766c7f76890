"""
Run configuration loading: config file (JSON or TOML) plus command-line overrides.
"""
import copy
import json
import logging
import tomllib
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from src.krflow.errors import ConfigError
from src.krflow.models.config import RunConfig
from src.krflow.settings import get_settings

logger = logging.getLogger(__name__)

# command-line flag -> dotted config key
FLAG_KEYS = {
    "scenario": "scenario.name",
    "n": "scenario.n",
    "N": "scenario.N",
    "t_end": "scenario.t_end",
    "a": "scenario.a",
    "b": "scenario.b",
    "T": "scenario.T",
    "amplitude": "scenario.amplitude",
    "scenario_seed": "scenario.seed",
    "dt_out": "schedule.dt_out",
    "times": "schedule.times",
    "monitors": "monitors",
    "C_u": "certificates.C_u",
    "C_v": "certificates.C_v",
    "sigma": "flow.sigma",
    "dt_max": "flow.dt_max",
    "dt_fixed": "flow.dt_fixed",
    "eps_T": "flow.eps_T",
    "checkpoint_every": "checkpoint_every",
    "output_dir": "output_dir",
    "seed": "seed",
}


def read_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a JSON or TOML config file (chosen by suffix).

    Raises:
        ConfigError: if the file is missing, unparsable or not a mapping
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping at the top level")
    return data


def set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    """Set data[a][b][c] = value for key 'a.b.c', creating nested mappings."""
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set '{key}': '{part}' is not a section")
        node = child
    node[parts[-1]] = value


def format_validation_error(error: ValidationError) -> str:
    """One line per problem, naming the dotted key path."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return "\n".join(lines)


def validate_config(data: Dict[str, Any]) -> RunConfig:
    """
    Validate a config mapping against the strict schema.

    Raises:
        ConfigError: listing every offending key
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration:\n{format_validation_error(e)}") from e


def load_run_config(arguments: Dict[str, Any], base: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build the run configuration from an optional file and flag overrides.

    Args:
        arguments: Parsed command-line arguments; 'config' names the file
        base: Starting mapping (used when re-running a stored config)

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: on unreadable files or schema violations
    """
    data: Dict[str, Any] = copy.deepcopy(base or {})
    if arguments.get("config"):
        data.update(read_config_file(Path(arguments["config"])))
    for flag, key in FLAG_KEYS.items():
        value = arguments.get(flag)
        if value is not None:
            set_dotted(data, key, value)
    if arguments.get("times") is not None:
        set_dotted(data, "schedule.dt_out", None)
    return validate_config(data)


def resolve_output_dir(config: RunConfig) -> Path:
    """Configured output directory, or <output_root>/<scenario>_n<n>_N<N>."""
    if config.output_dir is not None:
        return Path(config.output_dir)
    sc = config.scenario
    return get_settings().output_root / f"{sc.name}_n{sc.n}_N{sc.N}"
