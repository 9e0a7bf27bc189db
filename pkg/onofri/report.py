"""Check rows and the single writer for CSV / JSON-lines outputs.

Files carry the resolved configuration in their first line and no timestamps,
so a fixed config and seed always produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

ROW_FIELDS = [
    "check",
    "kind",
    "n",
    "R",
    "seed",
    "lhs",
    "rhs",
    "difference",
    "tolerance",
    "passed",
]


@dataclass(frozen=True)
class CheckRow:
    check: str
    kind: str
    n: int
    R: float
    seed: int | None
    lhs: float
    rhs: float
    difference: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def equality(
    check: str,
    n: int,
    R: float,
    lhs: float,
    rhs: float,
    tolerance: float,
    seed: int | None = None,
    relative: bool = False,
) -> CheckRow:
    difference = float(lhs) - float(rhs)
    allowed = tolerance * max(1.0, abs(float(rhs))) if relative else tolerance
    passed = math.isfinite(difference) and abs(difference) <= allowed
    return CheckRow(check, "equality", n, float(R), seed, float(lhs), float(rhs), difference, allowed, passed)


def inequality(
    check: str,
    n: int,
    R: float,
    lhs: float,
    rhs: float,
    tolerance: float,
    seed: int | None = None,
) -> CheckRow:
    """lhs >= rhs up to tolerance."""
    difference = float(lhs) - float(rhs)
    passed = math.isfinite(difference) and difference >= -tolerance
    return CheckRow(check, "inequality", n, float(R), seed, float(lhs), float(rhs), difference, tolerance, passed)


def failed(rows: Iterable[CheckRow]) -> List[CheckRow]:
    return [row for row in rows if not row.passed]


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialise {type(value).__name__}")


def dumps(value: Any) -> str:
    return json.dumps(value, sort_keys=True, default=_json_default)


class ReportWriter:
    """Serialises every file a run produces into one output directory."""

    def __init__(self, output_dir: Path, config: Dict[str, Any]) -> None:
        self.output_dir = Path(output_dir)
        self.config = config
        self.written: List[Path] = []

    def _prepare(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / name
        self.written.append(path)
        return path

    def write_rows(self, name: str, rows: Sequence[CheckRow]) -> Path:
        path = self._prepare(name)
        with path.open("w", newline="") as f:
            f.write(f"# config: {dumps(self.config)}\n")
            writer = csv.DictWriter(f, fieldnames=ROW_FIELDS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row.to_dict())
        return path

    def write_table(self, name: str, fieldnames: Sequence[str], records: Iterable[Dict[str, Any]]) -> Path:
        path = self._prepare(name)
        with path.open("w", newline="") as f:
            f.write(f"# config: {dumps(self.config)}\n")
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for record in records:
                writer.writerow(record)
        return path

    def write_records(self, name: str, records: Iterable[Dict[str, Any]]) -> Path:
        path = self._prepare(name)
        with path.open("w") as f:
            f.write(dumps({"config": self.config}) + "\n")
            for record in records:
                f.write(dumps(record) + "\n")
        return path

    def path_for(self, name: str) -> Path:
        """Path for a file written by another library (plots, workbooks)."""
        return self._prepare(name)
