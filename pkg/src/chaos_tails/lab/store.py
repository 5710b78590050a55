from __future__ import annotations

from pathlib import Path

from chaos_tails.domain.interfaces import ReportStore
from chaos_tails.domain.models import VerificationReport
from chaos_tails.ops.exports import dumps, report_payload, write_moment_curve, write_tail_curve


class InMemoryReportStore(ReportStore):
    def __init__(self) -> None:
        self._reports: dict[str, VerificationReport] = {}

    def save_report(self, report: VerificationReport) -> str:
        self._reports[report.campaign_id] = report.model_copy(deep=True)
        return report.campaign_id

    def get_report(self, campaign_id: str) -> VerificationReport | None:
        report = self._reports.get(campaign_id)
        return report.model_copy(deep=True) if report is not None else None

    def list_reports(self) -> list[str]:
        return sorted(self._reports)


class FileReportStore(ReportStore):
    """<root>/<campaign_id>.json plus the tail and moment curves as CSV."""

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)

    def _path(self, campaign_id: str, suffix: str) -> Path:
        return self._root / f"{campaign_id}{suffix}"

    def save_report(self, report: VerificationReport) -> str:
        self._root.mkdir(parents=True, exist_ok=True)
        self._path(report.campaign_id, ".json").write_text(dumps(report_payload(report)) + "\n", encoding="utf-8")
        if report.tail_checks:
            write_tail_curve(report, self._path(report.campaign_id, ".tail.csv"))
        if report.moment_checks:
            write_moment_curve(report, self._path(report.campaign_id, ".moments.csv"))
        return report.campaign_id

    def get_report(self, campaign_id: str) -> VerificationReport | None:
        path = self._path(campaign_id, ".json")
        if not path.exists():
            return None
        return VerificationReport.model_validate_json(path.read_text(encoding="utf-8"))

    def list_reports(self) -> list[str]:
        if not self._root.exists():
            return []
        return sorted(path.name[: -len(".json")] for path in self._root.glob("*.json"))
