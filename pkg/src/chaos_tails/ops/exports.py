from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

from chaos_tails.domain.models import VerificationReport

TAIL_COLUMNS = ["x", "empirical", "cp_upper", "bound", "verdict"]
MOMENT_COLUMNS = ["p", "empirical", "band_upper", "bound", "verdict"]


def report_payload(report: VerificationReport) -> dict[str, object]:
    return report.model_dump(mode="json")


def dumps(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=str)


def write_rows(path: Path, fieldnames: list[str], rows: Iterable[Mapping[str, object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({name: row.get(name, "") for name in fieldnames})
    return path


def write_tail_curve(report: VerificationReport, path: Path) -> Path:
    rows = ({column: getattr(check, column) for column in TAIL_COLUMNS} for check in report.tail_checks)
    return write_rows(path, TAIL_COLUMNS, rows)


def write_moment_curve(report: VerificationReport, path: Path) -> Path:
    rows = ({column: getattr(check, column) for column in MOMENT_COLUMNS} for check in report.moment_checks)
    return write_rows(path, MOMENT_COLUMNS, rows)


def read_rows(path: Path) -> list[dict[str, str]]:
    with path.open("r", newline="", encoding="utf-8") as handle:
        return [dict(row) for row in csv.DictReader(handle)]
