from __future__ import annotations

import logging
import time

import numpy as np

from chaos_tails import __version__
from chaos_tails.bounds.assumptions import BoundResult, FamilyAssumptions
from chaos_tails.bounds.dispatch import compute_bound
from chaos_tails.config import Settings, get_settings
from chaos_tails.domain.errors import AssumptionViolated, ChaosTailsError, InvalidParameter, TooLarge
from chaos_tails.domain.interfaces import CoefficientField, ReportStore, TailFunction
from chaos_tails.domain.models import (
    CampaignConfig,
    DriftCheck,
    MomentCheck,
    ReportHeader,
    TailCheck,
    VerificationReport,
)
from chaos_tails.lab.estimates import default_x_grid, empirical_moments, empirical_tail, variance_check
from chaos_tails.lab.evaluate import evaluate_Qd
from chaos_tails.lab.families import SampleBatch, generate_batch
from chaos_tails.lab.oracle import exact_oracle_tail
from chaos_tails.lab.probes import drift_checks
from chaos_tails.series.bounds import diagonal_free_variance
from chaos_tails.series.fields import field_from_spec
from chaos_tails.tails.functions import tail_from_spec
from chaos_tails.telemetry import elapsed_ms, log_event, span_record_error, span_set_attributes, start_span, telemetry_tags

_logger = logging.getLogger(__name__)

VERDICT_TOL = 1e-12
DEFAULT_MOMENT_ORDERS = tuple(float(p) for p in range(2, 11))


def resolve_bound(config: CampaignConfig, bound: BoundResult | None) -> BoundResult:
    if bound is not None:
        return bound
    if config.bound is not None:
        return compute_bound(config.bound)
    if config.tail is not None:
        return BoundResult(theorem=0, mode="tail", tail=tail_from_spec(config.tail), provenance=("supplied tail envelope",))
    raise InvalidParameter("campaign needs a bound request, a tail envelope or a computed bound")


def envelope_violations(
    batch: SampleBatch,
    assumptions: FamilyAssumptions,
    confidence: float,
) -> list[str]:
    """Coordinates whose empirical tail sits above the declared envelope beyond the lower CP band."""
    if assumptions.d != batch.d:
        raise InvalidParameter(f"assumptions have d = {assumptions.d}, the family has d = {batch.d}")
    problems: list[str] = []
    for m, tail in enumerate(assumptions.tails, start=1):
        values = batch.values[:, :, m - 1].ravel()
        xs = default_x_grid(values)
        estimate = empirical_tail(values, xs, confidence=confidence)
        envelope = np.asarray(tail.evaluate(xs), dtype=float)
        above = estimate.lower > envelope + VERDICT_TOL
        if above.any():
            problems.append(f"coordinate {m}: empirical tail exceeds T_{m} at x = {float(xs[above][0]):.4g}")
    return problems


def _oracle_values(config: CampaignConfig, field: CoefficientField, xs: np.ndarray, settings: Settings) -> np.ndarray | None:
    family = config.family
    if not config.oracle or family.kind != "rademacher":
        return None
    return np.asarray(exact_oracle_tail(field, family.d, family.n, xs, max_bits=settings.oracle_max_bits))


def _tail_checks(
    values: np.ndarray,
    xs: np.ndarray,
    tail: TailFunction,
    scale: float,
    oracle: np.ndarray | None,
    confidence: float,
) -> list[TailCheck]:
    estimate = empirical_tail(values, xs, confidence=confidence)
    bound = scale * np.asarray(tail.evaluate(xs), dtype=float)
    checks: list[TailCheck] = []
    for k, x in enumerate(xs):
        exact = float(oracle[k]) if oracle is not None else None
        upper = float(estimate.upper[k])
        passed = bound[k] >= upper - VERDICT_TOL and (exact is None or bound[k] >= exact - VERDICT_TOL)
        checks.append(
            TailCheck(
                x=float(x),
                empirical=float(estimate.estimate[k]),
                cp_upper=upper,
                bound=float(bound[k]),
                oracle=exact,
                tightness=float(bound[k] / upper) if upper > 0 else None,
                verdict="PASS" if passed else "FAIL",
            )
        )
    return checks


def _moment_checks(
    values: np.ndarray,
    orders: list[float],
    bound: BoundResult,
    scale: float,
    settings: Settings,
    seed: int,
) -> tuple[list[MomentCheck], list[str]]:
    estimate = empirical_moments(
        values,
        orders,
        resamples=settings.bootstrap_resamples,
        confidence=settings.confidence,
        seed=seed,
    )
    checks: list[MomentCheck] = []
    for k, p in enumerate(orders):
        level = bound.moment_at(p) * scale
        upper = float(estimate.upper[k])
        checks.append(
            MomentCheck(
                p=p,
                empirical=float(estimate.estimate[k]),
                band_upper=upper,
                bound=level,
                tightness=level / upper if upper > 0 else None,
                verdict="PASS" if level >= upper - VERDICT_TOL else "FAIL",
            )
        )
    notes = [f"p = {p:g} beyond the reliable horizon" for p, ok in zip(orders, estimate.reliable) if not ok]
    return checks, notes


def _variance_note(field: CoefficientField, batch: SampleBatch, values: np.ndarray, seed: int) -> str | None:
    try:
        expected = diagonal_free_variance(field, batch.second_moment)
    except ChaosTailsError:
        return None
    check = variance_check(values, expected, seed=seed)
    status = "consistent" if check.passed else "INCONSISTENT"
    return (
        f"variance {check.empirical:.6g} vs exact {check.expected:.6g} "
        f"(bootstrap se {check.standard_error:.3g}): {status}"
    )


def verify_campaign(
    config: CampaignConfig,
    *,
    bound: BoundResult | None = None,
    store: ReportStore | None = None,
    settings: Settings | None = None,
    workers: int | None = None,
) -> VerificationReport:
    """Simulate the family, evaluate Q_d and certify the bound; PASS needs every x (or p) to pass."""
    settings = settings or get_settings()
    started = time.perf_counter()
    family = config.family
    default_reps = settings.moment_replications if config.mode == "moment" else settings.tail_replications
    replications = config.replications or default_reps

    span_attrs = telemetry_tags(
        campaign_id=config.campaign_id,
        family=family.kind,
        d=family.d,
        n=family.n,
        replications=replications,
        seed=config.seed,
        environment=settings.app_env,
    )
    with start_span("lab.campaign.verify", span_attrs) as span:
        try:
            if config.oracle and family.kind == "rademacher" and family.n * family.d > settings.oracle_max_bits:
                raise TooLarge(
                    f"exact oracle needs 2^{family.n * family.d} patterns; the cap is 2^{settings.oracle_max_bits}"
                )
            field = field_from_spec(config.field)
            result = resolve_bound(config, bound)
            batch = generate_batch(family, replications, config.seed, workers=workers, block_size=settings.block_size)

            drifts: list[DriftCheck] = drift_checks(batch)
            problems = [
                f"coordinate {check.coordinate}: drift {check.mean:.3g} given sign {check.history_sign:+d}"
                for check in drifts
                if not check.passed
            ]
            if config.bound is not None and config.bound.assumptions is not None:
                assumptions = FamilyAssumptions.from_spec(config.bound.assumptions)
                problems.extend(envelope_violations(batch, assumptions, settings.confidence))
            if problems:
                log_event(_logger, "assumption_violated", campaign_id=config.campaign_id, problems=problems)
                raise AssumptionViolated("; ".join(problems))

            values = evaluate_Qd(field, batch)
            notes = [*result.provenance, *(f"flag: {flag}" for flag in result.flags)]
            tail_checks: list[TailCheck] = []
            moment_checks: list[MomentCheck] = []
            if config.mode == "tail":
                if result.tail is None:
                    raise InvalidParameter(f"theorem {result.theorem} produced no tail curve to verify")
                xs = np.asarray(config.x_grid, dtype=float) if config.x_grid else default_x_grid(values)
                oracle = _oracle_values(config, field, xs, settings)
                if config.oracle and oracle is None:
                    notes.append("exact oracle unavailable for this family or size")
                tail_checks = _tail_checks(values, xs, result.tail, config.scale_bound, oracle, settings.confidence)
            else:
                if not result.moments:
                    raise InvalidParameter(f"theorem {result.theorem} produced no moment curve to verify")
                orders = [float(p) for p in config.p_list] if config.p_list else [
                    p for p, _ in result.moments if p in DEFAULT_MOMENT_ORDERS
                ]
                moment_checks, moment_notes = _moment_checks(
                    values, orders, result, config.scale_bound, settings, config.seed
                )
                notes.extend(moment_notes)
            variance_note = _variance_note(field, batch, values, config.seed)
            if variance_note:
                notes.append(variance_note)

            checks = [*tail_checks, *moment_checks]
            verdict = "PASS" if checks and all(check.verdict == "PASS" for check in checks) else "FAIL"
            report = VerificationReport(
                header=ReportHeader(version=__version__, runtime_seconds=round(time.perf_counter() - started, 3)),
                campaign_id=config.campaign_id,
                verdict=verdict,
                family=family,
                replications=replications,
                seed=config.seed,
                confidence=settings.confidence,
                tail_checks=tail_checks,
                moment_checks=moment_checks,
                drift_checks=drifts,
                notes=notes,
            )
            if store is not None:
                store.save_report(report)
        except Exception as error:
            failure_type = error.__class__.__name__
            span_record_error(span, error, failure_type=failure_type)
            log_event(
                _logger,
                "campaign_failed",
                campaign_id=config.campaign_id,
                family=family.kind,
                reason=str(error),
                failure_type=failure_type,
            )
            raise

        latency_ms = elapsed_ms(started)
        span_set_attributes(span, telemetry_tags(verdict=verdict, latency_ms=latency_ms))
    log_event(
        _logger,
        "campaign_completed",
        campaign_id=config.campaign_id,
        verdict=verdict,
        family=family.kind,
        replications=replications,
        failed_points=sum(1 for check in checks if check.verdict == "FAIL"),
        latency_ms=latency_ms,
    )
    return report
