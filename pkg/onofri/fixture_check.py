from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List

import yaml

from .constants import COMMANDS, FIXTURES_DIR, default_output_dir
from .report import CheckRow
from .runner import run_suite, write_outputs
from .validate import ValidationError, validate_experiment


@dataclass(frozen=True)
class Fixture:
    name: str
    data_dir: Path
    expected_path: Path
    command: str

    @property
    def config_path(self) -> Path:
        return self.data_dir / "config.yaml"


@dataclass(frozen=True)
class FixtureRunResult:
    issues: List[str]
    output_dir: Path | None = None
    warnings: List[str] = field(default_factory=list)
    written: List[Path] = field(default_factory=list)


def load_fixture(expected_path: Path) -> Fixture:
    data_dir = expected_path.parent
    expected = _load_expected(expected_path)
    command = expected.get("command")
    if not command:
        raise ValueError(f"Missing command in {expected_path}")
    if command not in COMMANDS:
        raise ValueError(f"Unknown command {command!r} in {expected_path}")
    return Fixture(
        name=data_dir.name,
        data_dir=data_dir,
        expected_path=expected_path,
        command=str(command),
    )


def find_fixtures(fixtures_root: Path | None = None) -> List[Fixture]:
    root = fixtures_root or FIXTURES_DIR
    return [load_fixture(path) for path in sorted(root.rglob("expected_values.yaml"))]


def fixture_output_dir(fixture: Fixture, base: Path | None = None) -> Path:
    return (base or default_output_dir()) / "fixtures" / fixture.name


def run_fixture(fixture: Fixture, output_root: Path | None = None) -> FixtureRunResult:
    issues: List[str] = []
    warnings: List[str] = []
    expected = _load_expected(fixture.expected_path)
    doc_issues, doc_warnings = _check_expected_docs(fixture.expected_path)
    issues.extend(doc_issues)
    warnings.extend(doc_warnings)

    expect = expected.get("expect", {}) or {}
    expected_validation = expect.get("validation", {}) or {}
    expected_errors = _as_list(expected_validation.get("errors", []))
    expected_warnings = _as_list(expected_validation.get("warnings", []))
    expected_exit = int(expect.get("exit_code", 0))

    output_dir = fixture_output_dir(fixture, output_root)
    config_path = fixture.config_path if fixture.config_path.exists() else None
    try:
        result, config = validate_experiment(
            fixture.command, config_path, overrides={"output_dir": output_dir}
        )
    except ValidationError as exc:
        result, config = exc.result, None
    issues.extend(_compare_lists("validation errors", expected_errors, result.errors))
    issues.extend(_compare_lists("validation warnings", expected_warnings, result.warnings))

    if result.errors or config is None:
        if expected_exit != 1:
            issues.append(f"Exit code expected {expected_exit} got 1 (validation failed)")
        return FixtureRunResult(issues, warnings=warnings)

    suite = run_suite(config)
    written = write_outputs(suite, config)
    exit_code = 1 if suite.failures else 0
    if exit_code != expected_exit:
        issues.append(f"Exit code expected {expected_exit} got {exit_code}")
        issues.extend(
            f"Check {row.check} (R={row.R:g}) failed: difference {row.difference:.3e}, "
            f"tolerance {row.tolerance:.3e}"
            for row in suite.failures
        )

    for entry in expect.get("values", []) or []:
        issues.extend(_check_value(suite.rows, entry))

    return FixtureRunResult(issues, output_dir, warnings=warnings, written=written)


def _load_expected(path: Path) -> Dict[str, Any]:
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"Invalid expected_values.yaml in {path}")
    return data


def _as_list(value: Iterable[Any]) -> List[str]:
    return [str(item) for item in value]


def _compare_lists(label: str, expected: List[str], actual: List[str]) -> List[str]:
    if sorted(expected) == sorted(actual):
        return []
    return [f"Mismatch in {label}. expected={sorted(expected)} actual={sorted(actual)}"]


def _check_expected_docs(expected_path: Path) -> tuple[List[str], List[str]]:
    issues: List[str] = []
    warnings: List[str] = []
    md_path = expected_path.parent / "expected_values.md"
    if not md_path.exists():
        issues.append(f"Missing {md_path}")
        return issues, warnings
    if not md_path.read_text().strip():
        issues.append(f"{md_path} is empty")
    if md_path.stat().st_mtime < expected_path.stat().st_mtime:
        warnings.append(f"{md_path.name} is older than expected_values.yaml")
    return issues, warnings


def _check_value(rows: List[CheckRow], entry: Dict[str, Any]) -> List[str]:
    """Compare one field of every row named by `check` (optionally one radius)."""
    check = entry.get("check")
    column = entry.get("field", "lhs")
    matches = [row for row in rows if row.check == check]
    if "R" in entry:
        matches = [row for row in matches if math.isclose(row.R, float(entry["R"]), rel_tol=1e-12)]
    where = f"{check}" + (f" (R={entry['R']})" if "R" in entry else "")
    if not matches:
        return [f"No rows for {where}"]

    issues: List[str] = []
    for row in matches:
        actual = float(getattr(row, column))
        if "equals" in entry:
            expected = float(entry["equals"])
            tolerance = float(entry.get("tolerance", 1e-6))
            if not abs(actual - expected) <= tolerance:
                issues.append(f"{where} {column} expected {expected} got {actual}")
        if "at_least" in entry and not actual >= float(entry["at_least"]):
            issues.append(f"{where} {column} expected >= {entry['at_least']} got {actual}")
        if "at_most" in entry and not actual <= float(entry["at_most"]):
            issues.append(f"{where} {column} expected <= {entry['at_most']} got {actual}")
    return issues
