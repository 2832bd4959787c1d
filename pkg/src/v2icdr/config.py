"""Experiment configuration: defaults, validation and file loading.

Config files are YAML mappings whose keys are the fields of
:class:`ExperimentConfig`.  A run manifest (JSON, which is also YAML) is
accepted too; its ``config`` section is used.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .scheduler import DEFAULT_USER_CAP, CapExceededError, check_user_cap

SCHEDULER_MODES = ("single_flow", "multi_flow", "both")
RELAY_MODES = ("AF", "DF")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    n_users: int = 4
    street_spacing: float = 30.0
    map_extent: float = 90.0
    disk_radius: float = 65.0
    speed: float = 10.0
    # fixed values used by the sweep over the other axis
    go_straight_prob: float = 0.5
    gamma_o_db: float = 10.0
    go_straight_prob_values: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    gamma_o_db_values: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 1000
    master_seed: int = 20240601
    relay_modes: tuple = RELAY_MODES
    scheduler_mode: str = "both"
    path_loss_exponent: float = 3.0
    reference_distance: float = 1.0
    rayleigh_fading: bool = True
    noise_power: float = 1.0
    n_background: int = 0
    beta: float = 1.0
    user_cap: int = DEFAULT_USER_CAP
    allow_large_n: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_INT_KEYS = {"n_users", "trials", "master_seed", "n_background", "user_cap"}
_BOOL_KEYS = {"rayleigh_fading", "allow_large_n"}
_LIST_KEYS = {"go_straight_prob_values", "gamma_o_db_values", "relay_modes"}


def _coerce(key: str, value):
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if key in _LIST_KEYS:
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"{key}: expected a non-empty list, got {value!r}")
        if key == "relay_modes":
            out = tuple(str(v).upper() for v in value)
            bad = [v for v in out if v not in RELAY_MODES]
            if bad:
                raise ConfigError(f"{key}: unknown relay mode(s) {bad}")
            return out
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}") from None
    if key == "scheduler_mode":
        if value not in SCHEDULER_MODES:
            raise ConfigError(f"{key}: must be one of {SCHEDULER_MODES}, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Range checks; raises :class:`ConfigError` or :class:`CapExceededError`."""
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"{key}: {msg} (got {getattr(cfg, key)!r})")

    need(cfg.n_users >= 1, "n_users", "must be >= 1")
    need(cfg.trials >= 1, "trials", "must be >= 1")
    need(cfg.master_seed >= 0, "master_seed", "must be >= 0")
    need(cfg.n_background >= 0, "n_background", "must be >= 0")
    need(cfg.user_cap >= 1, "user_cap", "must be >= 1")
    for key in ("street_spacing", "map_extent", "disk_radius", "path_loss_exponent",
                "reference_distance", "noise_power"):
        need(getattr(cfg, key) > 0, key, "must be positive")
    need(cfg.speed >= 0, "speed", "must be non-negative")
    need(cfg.beta >= 0, "beta", "must be non-negative")
    k = cfg.map_extent / cfg.street_spacing
    need(math.isfinite(k) and abs(k - round(k)) < 1e-9, "map_extent",
         "must be an integer multiple of street_spacing")
    need(0.0 <= cfg.go_straight_prob <= 1.0, "go_straight_prob", "must lie in [0, 1]")
    need(all(0.0 <= p <= 1.0 for p in cfg.go_straight_prob_values),
         "go_straight_prob_values", "every value must lie in [0, 1]")
    need(all(math.isfinite(g) for g in cfg.gamma_o_db_values), "gamma_o_db_values",
         "values must be finite")
    need(math.isfinite(cfg.gamma_o_db), "gamma_o_db", "must be finite")
    check_user_cap(cfg.n_users, cfg.user_cap, cfg.allow_large_n)
    return cfg


def config_from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in data.items()}
    return validate(ExperimentConfig(**values))


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "config" in data and "version" in data:
        data = data["config"]
    return config_from_dict(data)


__all__ = [
    "CapExceededError",
    "ConfigError",
    "ExperimentConfig",
    "config_from_dict",
    "parse_config",
    "validate",
]
