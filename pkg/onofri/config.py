from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping

import yaml

from .constants import (
    COMMANDS,
    CONFIG_FILE,
    DEFAULT_SETTINGS,
    DEFAULT_TOLERANCES,
    default_output_dir,
)


@dataclass
class ExperimentConfig:
    command: str
    n: int
    R: List[float]
    resolution: int
    angular_resolution: int
    seed: int
    trials: int
    large_radius: float
    t_final: float
    dt: float
    tolerances: Dict[str, float]
    output_dir: Path
    plot: bool = False
    xlsx: bool = False
    source: Path | None = None
    unknown_keys: List[str] = field(default_factory=list)

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "n": self.n,
            "R": list(self.R),
            "resolution": self.resolution,
            "angular_resolution": self.angular_resolution,
            "seed": self.seed,
            "trials": self.trials,
            "large_radius": self.large_radius,
            "t_final": self.t_final,
            "dt": self.dt,
            "tolerances": dict(sorted(self.tolerances.items())),
            "plot": self.plot,
            "xlsx": self.xlsx,
            "source": str(self.source) if self.source else None,
        }


def _as_int(value: object, key: str) -> int:
    if isinstance(value, bool):
        raise ValueError(f"{key} must be an integer, got {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{key} must be an integer, got {value!r}") from None
    if not number.is_integer():
        raise ValueError(f"{key} must be an integer, got {value!r}")
    return int(number)


def _as_float(value: object, key: str) -> float:
    if isinstance(value, bool):
        raise ValueError(f"{key} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{key} must be a number, got {value!r}") from None


def _as_radii(value: object) -> List[float]:
    if isinstance(value, (list, tuple)):
        if not value:
            raise ValueError("R must list at least one radius")
        return [_as_float(item, "R") for item in value]
    return [_as_float(value, "R")]


def _as_bool(value: object, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in {"true", "yes", "1", "false", "no", "0"}:
        return value.strip().lower() in {"true", "yes", "1"}
    raise ValueError(f"{key} must be true or false, got {value!r}")


def _read_config_file(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ValueError(f"Config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ValueError(f"Malformed config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"Config file {path} must contain a mapping")
    return raw


def parse_tolerance_overrides(items: List[str] | None) -> Dict[str, float]:
    """KEY=VALUE strings from the command line."""
    overrides: Dict[str, float] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"Tolerance override must look like KEY=VALUE, got {item!r}")
        overrides[key.strip()] = _as_float(value.strip(), f"tolerance {key.strip()}")
    return overrides


def load_config(
    path: Path | None = None,
    command: str = "identities",
    overrides: Mapping[str, Any] | None = None,
) -> ExperimentConfig:
    """Resolve flags > config file > defaults into an ExperimentConfig."""
    if command not in COMMANDS:
        raise ValueError(f"Unknown command: {command}")
    source = path
    if path is None and CONFIG_FILE.exists():
        source = CONFIG_FILE
    raw = _read_config_file(source) if source is not None else {}

    settings: Dict[str, Any] = dict(DEFAULT_SETTINGS)
    tolerances: Dict[str, Any] = dict(DEFAULT_TOLERANCES)
    unknown: List[str] = []

    sections = [{k: v for k, v in raw.items() if k not in COMMANDS}]
    section = raw.get(command)
    if section is not None:
        if not isinstance(section, dict):
            raise ValueError(f"Section {command} must be a mapping")
        sections.append(section)
    for block in sections:
        for key, value in block.items():
            if key == "tolerances":
                if not isinstance(value, dict):
                    raise ValueError("tolerances must be a mapping")
                tolerances.update(value)
            elif key in settings or key == "output_dir":
                settings[key] = value
            else:
                unknown.append(str(key))

    overrides = dict(overrides or {})
    tolerances.update(overrides.pop("tolerances", None) or {})
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value

    output_dir = settings.get("output_dir")
    return ExperimentConfig(
        command=command,
        n=_as_int(settings["n"], "n"),
        R=_as_radii(settings["R"]),
        resolution=_as_int(settings["resolution"], "resolution"),
        angular_resolution=_as_int(settings["angular_resolution"], "angular_resolution"),
        seed=_as_int(settings["seed"], "seed"),
        trials=_as_int(settings["trials"], "trials"),
        large_radius=_as_float(settings["large_radius"], "large_radius"),
        t_final=_as_float(settings["t_final"], "t_final"),
        dt=_as_float(settings["dt"], "dt"),
        tolerances={str(k): _as_float(v, f"tolerance {k}") for k, v in tolerances.items()},
        output_dir=Path(output_dir) if output_dir else default_output_dir(),
        plot=_as_bool(settings["plot"], "plot"),
        xlsx=_as_bool(settings["xlsx"], "xlsx"),
        source=source,
        unknown_keys=unknown,
    )
