from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Mapping, Tuple

from .config import ExperimentConfig, load_config
from .constants import DEFAULT_TOLERANCES, MANY_TRIALS, MIN_RESOLUTION, SLOW_RESOLUTION


@dataclass
class ValidationResult:
    errors: List[str]
    warnings: List[str]


class ValidationError(Exception):
    def __init__(self, result: ValidationResult) -> None:
        super().__init__("Validation failed")
        self.result = result


def validate_experiment(
    command: str,
    config_path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> Tuple[ValidationResult, ExperimentConfig]:
    try:
        config = load_config(config_path, command, overrides)
    except ValueError as exc:
        raise ValidationError(ValidationResult([str(exc)], [])) from exc
    return validate_config(config), config


def validate_config(config: ExperimentConfig) -> ValidationResult:
    errors: List[str] = []
    warnings: List[str] = []

    if config.n < 2:
        errors.append(f"n must be >= 2, got {config.n}")
    for radius in config.R:
        if not radius > 0:
            errors.append(f"R must be > 0, got {radius}")
    if not config.large_radius > 0:
        errors.append(f"large_radius must be > 0, got {config.large_radius}")

    for key in ("resolution", "angular_resolution"):
        value = getattr(config, key)
        if value < MIN_RESOLUTION:
            errors.append(f"{key} must be >= {MIN_RESOLUTION}, got {value}")
        elif value > SLOW_RESOLUTION:
            warnings.append(f"{key} {value} exceeds {SLOW_RESOLUTION}; runs will be slow")

    if config.trials < 1:
        errors.append(f"trials must be >= 1, got {config.trials}")
    elif config.trials > MANY_TRIALS:
        warnings.append(f"trials {config.trials} exceeds {MANY_TRIALS}; runs will be slow")

    if not config.t_final > 0:
        errors.append(f"t_final must be > 0, got {config.t_final}")
    if not config.dt > 0:
        errors.append(f"dt must be > 0, got {config.dt}")

    for key, value in sorted(config.tolerances.items()):
        if key not in DEFAULT_TOLERANCES:
            errors.append(f"Unknown tolerance key: {key}")
        elif value < 0:
            errors.append(f"Tolerance {key} must be >= 0, got {value}")

    for key in config.unknown_keys:
        errors.append(f"Unknown config key: {key}")

    if config.command in {"fd-evolve", "minimize", "sphere"} and config.n != 2:
        errors.append(f"{config.command} is only defined for n = 2")

    return ValidationResult(errors, warnings)
