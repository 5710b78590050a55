from __future__ import annotations

from contextlib import contextmanager
import logging

import pytest

from chaos_tails.domain.errors import AssumptionViolated, InvalidParameter, TooLarge
from chaos_tails.domain.models import (
    BoundRequest,
    CampaignConfig,
    FamilyAssumptionsSpec,
    FamilySpec,
    GridTailSpec,
    MomentEnvelopeSpec,
    ParametricTailSpec,
    UniformFieldSpec,
)
from chaos_tails.lab import campaign as campaign_mod
from chaos_tails.lab.campaign import verify_campaign
from chaos_tails.lab.store import InMemoryReportStore

GRID = [0.25 * k for k in range(1, 17)]
INDICATOR = GridTailSpec(x=[0.0, 1.0], t=[1.0, 0.0])


def _azuma(**overrides: object) -> CampaignConfig:
    values: dict[str, object] = {
        "campaign_id": "azuma",
        "family": FamilySpec(kind="rademacher", d=1, n=64),
        "field": UniformFieldSpec(rule="uniform", d=1, n=64),
        "bound": BoundRequest(theorem=4, assumptions=FamilyAssumptionsSpec(d=1, tails=[INDICATOR])),
        "replications": 100_000,
        "seed": 1,
        "x_grid": GRID,
    }
    values.update(overrides)
    return CampaignConfig(**values)


def test_azuma_campaign_passes() -> None:
    store = InMemoryReportStore()
    report = verify_campaign(_azuma(), store=store)
    assert report.verdict == "PASS"
    assert len(report.tail_checks) == len(GRID)
    assert all(check.bound >= check.cp_upper for check in report.tail_checks)
    assert any(note.startswith("variance") for note in report.notes)
    assert store.get_report("azuma") == report


def test_shrunken_bound_fails() -> None:
    report = verify_campaign(_azuma(campaign_id="azuma-shrunk", scale_bound=0.01))
    assert report.verdict == "FAIL"
    assert any(check.verdict == "FAIL" for check in report.tail_checks)


def test_wrong_supplied_tail_fails() -> None:
    config = _azuma(bound=None, tail=ParametricTailSpec(q=2.0, K=0.1 ** 0.5), replications=20_000)
    assert verify_campaign(config).verdict == "FAIL"


def test_moment_campaign_passes() -> None:
    assumptions = FamilyAssumptionsSpec(
        d=2,
        tails=[INDICATOR, INDICATOR],
        moments=[MomentEnvelopeSpec(kind="constant"), MomentEnvelopeSpec(kind="constant")],
    )
    config = CampaignConfig(
        campaign_id="moments",
        family=FamilySpec(kind="rademacher", d=2, n=32),
        field=UniformFieldSpec(rule="uniform", d=2, n=32),
        bound=BoundRequest(theorem=6, mode="moment", assumptions=assumptions),
        mode="moment",
        replications=10_000,
        seed=2,
    )
    report = verify_campaign(config)
    assert report.verdict == "PASS"
    assert [check.p for check in report.moment_checks] == [float(p) for p in range(2, 11)]
    assert report.moment_checks[0].bound == pytest.approx(16.0)


def test_oracle_campaign_reports_exact_tail() -> None:
    config = _azuma(
        campaign_id="oracle",
        family=FamilySpec(kind="rademacher", d=1, n=8),
        field=UniformFieldSpec(rule="uniform", d=1, n=8),
        replications=20_000,
        oracle=True,
    )
    report = verify_campaign(config)
    assert report.verdict == "PASS"
    assert all(check.oracle is not None and check.oracle <= check.bound for check in report.tail_checks)


def test_violated_envelope_raises(caplog: pytest.LogCaptureFixture) -> None:
    caplog.set_level(logging.INFO)
    narrow = FamilyAssumptionsSpec(d=1, tails=[ParametricTailSpec(q=2.0, K=0.1)])
    config = _azuma(
        campaign_id="narrow",
        bound=BoundRequest(theorem=4, assumptions=narrow),
        replications=2000,
    )
    with pytest.raises(AssumptionViolated):
        verify_campaign(config)
    assert '"event": "assumption_violated"' in caplog.text
    assert '"event": "campaign_failed"' in caplog.text


def test_oversized_oracle_request_is_rejected_upfront(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("CHAOS_TAILS_ORACLE_MAX_BITS", "8")
    with pytest.raises(TooLarge):
        verify_campaign(_azuma(campaign_id="big", oracle=True))


def test_campaign_without_bound_is_rejected() -> None:
    with pytest.raises(InvalidParameter):
        verify_campaign(_azuma(bound=None, replications=100))


def test_campaign_starts_span_and_logs(monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture) -> None:
    spans: list[str] = []

    class _Span:
        def set_attribute(self, _key: str, _value: object) -> None:
            return

        def record_exception(self, _error: Exception) -> None:
            return

        def set_status(self, _status: object) -> None:
            return

    @contextmanager
    def _fake_start_span(name: str, _attributes: dict[str, object] | None = None):
        spans.append(name)
        yield _Span()

    monkeypatch.setattr(campaign_mod, "start_span", _fake_start_span)
    caplog.set_level(logging.INFO)
    verify_campaign(_azuma(campaign_id="spans", replications=5000))
    assert spans == ["lab.campaign.verify"]
    assert '"event": "campaign_completed"' in caplog.text
