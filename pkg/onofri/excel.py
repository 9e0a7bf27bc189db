from __future__ import annotations

from collections import OrderedDict
from typing import Any, Dict, List, Sequence

from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill

from .report import ROW_FIELDS, CheckRow

HEADER_FILL = PatternFill(fill_type="solid", fgColor="D9D9D9")
FAIL_FILL = PatternFill(fill_type="solid", fgColor="F4CCCC")
BOLD_FONT = Font(bold=True)
SCIENTIFIC = "0.000000E+00"

CHECK_WIDTHS = [32, 12, 6, 10, 8, 18, 18, 18, 14, 8]
NUMERIC_COLUMNS = {"lhs", "rhs", "difference", "tolerance"}


def build_workbook(config: Dict[str, Any], rows: Sequence[CheckRow]) -> Workbook:
    wb = Workbook()
    ws = wb.active
    ws.title = "README"
    _write_readme_sheet(ws, config, rows)

    _write_config_sheet(wb.create_sheet("Config"), config)
    _write_checks_sheet(wb.create_sheet("Checks"), rows)
    _write_summary_sheet(wb.create_sheet("Summary"), rows)
    return wb


def _style_header(ws, num_cols: int) -> None:
    for col in range(1, num_cols + 1):
        cell = ws.cell(row=1, column=col)
        cell.fill = HEADER_FILL
        cell.font = BOLD_FONT
        cell.alignment = Alignment(horizontal="left")


def _write_readme_sheet(ws, config: Dict[str, Any], rows: Sequence[CheckRow]) -> None:
    failures = sum(1 for row in rows if not row.passed)
    lines = [
        "Onofri duality checks",
        f"Command: {config.get('command')}",
        f"Seed: {config.get('seed')}",
        "",
        "Sheets:",
        "- Config: resolved settings (flags > config file > defaults)",
        "- Checks: one row per check; failing rows are highlighted",
        "- Summary: passed / failed / total per check name",
        "",
        "Equality rows pass when |lhs - rhs| <= tolerance.",
        "Inequality rows pass when lhs - rhs >= -tolerance.",
        "",
        f"Result: {len(rows) - failures} of {len(rows)} checks passed.",
    ]
    for line in lines:
        ws.append([line])
    ws["A1"].font = BOLD_FONT
    ws.column_dimensions["A"].width = 90


def _write_config_sheet(ws, config: Dict[str, Any]) -> None:
    ws.append(["setting", "value"])
    _style_header(ws, 2)
    for key, value in config.items():
        if key == "tolerances":
            continue
        if isinstance(value, (list, tuple)):
            value = ", ".join(str(item) for item in value)
        ws.append([key, value])
    for key, value in sorted((config.get("tolerances") or {}).items()):
        ws.append([f"tolerance.{key}", value])
        ws.cell(row=ws.max_row, column=2).number_format = SCIENTIFIC
    ws.freeze_panes = "A2"
    ws.column_dimensions["A"].width = 28
    ws.column_dimensions["B"].width = 40


def _write_checks_sheet(ws, rows: Sequence[CheckRow]) -> None:
    ws.append(list(ROW_FIELDS))
    _style_header(ws, len(ROW_FIELDS))
    for row in rows:
        record = row.to_dict()
        ws.append([record[name] for name in ROW_FIELDS])
        for col, name in enumerate(ROW_FIELDS, start=1):
            cell = ws.cell(row=ws.max_row, column=col)
            if name in NUMERIC_COLUMNS:
                cell.number_format = SCIENTIFIC
            if not row.passed:
                cell.fill = FAIL_FILL
    ws.freeze_panes = "A2"
    for idx, width in enumerate(CHECK_WIDTHS, start=1):
        ws.column_dimensions[chr(64 + idx)].width = width


def summarize(rows: Sequence[CheckRow]) -> List[List[Any]]:
    counts: "OrderedDict[str, List[int]]" = OrderedDict()
    for row in rows:
        entry = counts.setdefault(row.check, [0, 0])
        entry[0 if row.passed else 1] += 1
    return [[check, p, f, p + f] for check, (p, f) in counts.items()]


def _write_summary_sheet(ws, rows: Sequence[CheckRow]) -> None:
    ws.append(["check", "passed", "failed", "total"])
    _style_header(ws, 4)
    for line in summarize(rows):
        ws.append(line)
        if line[2]:
            ws.cell(row=ws.max_row, column=3).fill = FAIL_FILL
    ws.freeze_panes = "A2"
    ws.column_dimensions["A"].width = 32
    for letter in "BCD":
        ws.column_dimensions[letter].width = 10
