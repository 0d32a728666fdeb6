"""Scenario configuration: flat key = value text files.

Blank lines and ``#`` comments are ignored. Relative paths (network, demand)
resolve against the config file's directory. All problems found during
validation are reported together before anything runs.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

MODES = ("centralized", "distributed")
AXES = ("search_level", "fleet_size", "share", "flexibility")


class ConfigError(ValueError):
    """Raised for unparsable or invalid scenario configuration."""


@dataclass
class ScenarioConfig:
    network: str
    demand: str
    fleet_size: int
    name: str = "run"
    share: float = 0.2
    flexibility_s: float = 300.0
    seed: int = 0
    delta_s: float = 60.0
    tick_s: float = 1.0
    capacity: int = 2
    alpha: float = 0.5
    beta: float = 0.5
    psi_time_unit_s: float = 60.0
    min_vtts_s: float | None = None
    mode: str = "centralized"
    search_level: int = 3
    singleton_assign: bool = True
    load_period_s: float | None = None
    background_traffic: bool = True
    v_min_mps: float = 1.0

    def validate(self):
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.share <= 1.0:
            problems.append(f"share must be in [0, 1], got {self.share}")
        if self.fleet_size < 0:
            problems.append(f"fleet_size must be >= 0, got {self.fleet_size}")
        if self.flexibility_s <= 0:
            problems.append(f"flexibility_s must be positive, got {self.flexibility_s}")
        if self.delta_s <= 0:
            problems.append(f"delta_s must be positive, got {self.delta_s}")
        if self.tick_s <= 0:
            problems.append(f"tick_s must be positive, got {self.tick_s}")
        elif self.tick_s > self.delta_s:
            problems.append("tick_s must not exceed delta_s")
        elif abs(self.delta_s / self.tick_s - round(self.delta_s / self.tick_s)) > 1e-9:
            problems.append("delta_s must be an integer multiple of tick_s")
        if self.capacity != 2:
            problems.append(f"capacity must be 2, got {self.capacity}")
        if self.alpha < 0 or self.beta < 0 or abs(self.alpha + self.beta - 1.0) > 1e-9:
            problems.append(f"alpha and beta must be non-negative and sum to 1, "
                            f"got {self.alpha} + {self.beta}")
        if self.psi_time_unit_s <= 0:
            problems.append(f"psi_time_unit_s must be positive, got {self.psi_time_unit_s}")
        if not 0 <= self.search_level <= 3:
            problems.append(f"search_level must be in 0..3, got {self.search_level}")
        if self.load_period_s is not None and self.load_period_s <= 0:
            problems.append(f"load_period_s must be positive, got {self.load_period_s}")
        if self.v_min_mps <= 0:
            problems.append(f"v_min_mps must be positive, got {self.v_min_mps}")
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(**d).validate()


_BOOL_KEYS = {"singleton_assign", "background_traffic"}
_INT_KEYS = {"fleet_size", "seed", "capacity", "search_level"}
_FLOAT_KEYS = {"share", "flexibility_s", "delta_s", "tick_s", "alpha", "beta",
               "psi_time_unit_s", "v_min_mps"}
_OPT_FLOAT_KEYS = {"min_vtts_s", "load_period_s"}
_STR_KEYS = {"network", "demand", "mode", "name"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _OPT_FLOAT_KEYS | _STR_KEYS


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {raw!r}")


def _coerce(key: str, val: str):
    if key not in _ALL_KEYS:
        raise ConfigError(f"unknown key {key!r}")
    if key in _BOOL_KEYS:
        return _parse_bool(val)
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return float(val)
    if key in _OPT_FLOAT_KEYS:
        return None if val.lower() == "none" else float(val)
    return val


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Parse and validate a scenario config file.

    ``overrides`` are applied after parsing, keyed by field name; string
    values are coerced the same way file values are, anything else is taken
    as already typed. The sweep runner and the CLI ``--set`` flag use this.
    """
    values = {}
    base_dir = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = _coerce(key, val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    for req in ("network", "demand", "fleet_size"):
        if req not in values:
            raise ConfigError(f"{path}: missing required key {req!r}")
    for pkey in ("network", "demand"):
        if not os.path.isabs(values[pkey]):
            values[pkey] = os.path.normpath(os.path.join(base_dir, values[pkey]))
    values.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    for key, val in (overrides or {}).items():
        try:
            values[key] = _coerce(key, val) if isinstance(val, str) else val
        except ValueError as exc:
            raise ConfigError(f"bad override for {key}: {exc}") from None
    return ScenarioConfig(**values).validate()


def axis_field(axis: str) -> str:
    """Map a sweep axis name to its config field."""
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {AXES}, got {axis!r}")
    return "flexibility_s" if axis == "flexibility" else axis
