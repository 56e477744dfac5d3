"""
Run configuration: built-in defaults, an optional TOML file, then flags.

The TOML file groups keys by section:

    [dispo]
    alpha = 1.6
    [train]
    epochs = 3
    [synth]
    n = 10000
    [eval]
    thresholds = [1, 25, 200, 750, 2500]
    [model]
    kind = "linear"
"""

import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace

from ..analyzer.sweeps import ModelSettings
from ..dataset.synth import SynthConfig
from ..router.dispo import DispoConfig
from ..router.trainer import TrainConfig
from .errors import UsageError, ValidationError
from .geo import ThresholdSet

CONFIG_ENV_VAR = "GEOROUTER_CONFIG"

SECTIONS = {
    "dispo": DispoConfig,
    "train": TrainConfig,
    "synth": SynthConfig,
    "model": ModelSettings,
}


@dataclass(frozen=True)
class RunConfig:
    dispo: DispoConfig = field(default_factory=DispoConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ModelSettings = field(default_factory=ModelSettings)
    thresholds: ThresholdSet = field(default_factory=ThresholdSet)


def _section(cls, values, name):
    if not isinstance(values, dict):
        raise UsageError(f"config section [{name}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config key {name}.{unknown[0]}")
    return values


def load_run_config(config_path=None):
    """
    Load the configuration file named by ``config_path`` or ``$GEOROUTER_CONFIG``.

    Returns:
        RunConfig: defaults overridden by the file, if any
    """
    config_path = config_path or os.environ.get(CONFIG_ENV_VAR)
    if not config_path:
        return RunConfig()
    if not os.path.exists(config_path):
        raise UsageError(f"config file not found: {config_path}")
    try:
        with open(config_path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"{config_path}: invalid TOML: {e}")
    return apply_overrides(RunConfig(), data)


def apply_overrides(run_config, data):
    """
    Merge ``{section: {key: value}}`` overrides into a RunConfig.

    ``None`` values are ignored so unset command-line flags leave the file and
    default values in place.
    """
    updates = {}
    for name, values in data.items():
        if name == "eval":
            values = _section(ThresholdSet, values, name)
            if values.get("thresholds") is not None:
                try:
                    updates["thresholds"] = ThresholdSet(tuple(values["thresholds"]))
                except (ValidationError, TypeError, ValueError) as e:
                    raise UsageError(f"eval.{e}")
            continue
        if name not in SECTIONS:
            raise UsageError(f"unknown config section [{name}]")
        values = {
            k: v for k, v in _section(SECTIONS[name], values, name).items() if v is not None
        }
        if values:
            try:
                updates[name] = replace(getattr(run_config, name), **values)
            except (ValidationError, TypeError) as e:
                raise UsageError(f"{name}.{e}")
    return replace(run_config, **updates)
