from __future__ import annotations

import argparse
from dataclasses import asdict
import json
import logging
from pathlib import Path
import sys
from typing import Any, Callable, Sequence

import numpy as np
from pydantic import TypeAdapter, ValidationError

from chaos_tails.bounds.dispatch import compute_bound
from chaos_tails.config import Settings, get_settings
from chaos_tails.domain.errors import ChaosTailsError, InvalidParameter
from chaos_tails.domain.models import BoundRequest, CampaignConfig, FamilySpec, FieldSpec
from chaos_tails.exponents import (
    QVector,
    exponent_G,
    exponent_M,
    exponent_Nd,
    exponent_gamma_dq,
    exponent_table,
    log_refined_recursion,
    moment_constant_gamma,
    power_law_regime,
    ustat_scale_t,
    vector_L,
    vector_N_qr,
)
from chaos_tails.lab.campaign import verify_campaign
from chaos_tails.lab.estimates import default_x_grid, empirical_moments, empirical_tail, variance_check
from chaos_tails.lab.evaluate import evaluate_Qd
from chaos_tails.lab.families import generate_batch
from chaos_tails.lab.oracle import exact_oracle_tail
from chaos_tails.lab.probes import drift_checks, independence_check, lower_envelope_probe
from chaos_tails.lab.store import FileReportStore
from chaos_tails.ops.exports import dumps, report_payload, write_rows
from chaos_tails.series.bounds import diagonal_free_variance
from chaos_tails.series.fields import SeparableField, field_from_spec
from chaos_tails.tails.functions import to_grid
from chaos_tails.telemetry import log_event, span_record_error, span_set_attributes, start_span, telemetry_tags

_logger = logging.getLogger(__name__)

EXPONENT_NAMES = ["M", "Nd", "gamma_dq", "L", "N_qr", "rV", "gamma_moment", "G", "t"]
THEOREMS = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 13, 14, 15, 16]
FAMILIES = ["rademacher", "weibull_symmetric", "scaled_product", "dependent_martingale"]
INPUT_EXIT_CODE = 2


def _split(text: str | None) -> list[str]:
    if not text:
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def _floats(text: str | None) -> list[float] | None:
    parts = _split(text)
    if not parts:
        return None
    try:
        return [float(part) for part in parts]
    except ValueError as exc:
        raise InvalidParameter(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _read_json(path: str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _require(value: Any, flag: str, name: str) -> Any:
    if value is None:
        raise InvalidParameter(f"exponent {name} needs {flag}")
    return value


def _qvector(args: argparse.Namespace) -> QVector:
    values = _split(args.q)
    if not values:
        raise InvalidParameter(f"exponent {args.name} needs --q")
    if len(values) == 1 and args.d is not None:
        return QVector.homogeneous(args.d, values[0])
    qv = QVector.of(values)
    if args.d is not None and args.d != qv.d:
        raise InvalidParameter(f"--d {args.d} but {qv.d} exponents were given")
    return qv


def _single_q(args: argparse.Namespace) -> str:
    values = _split(args.q)
    if len(values) != 1:
        raise InvalidParameter(f"exponent {args.name} needs a single --q value")
    return values[0]


def cmd_exponent(args: argparse.Namespace, settings: Settings) -> tuple[dict[str, Any], int]:
    name = args.name
    if name in ("M", "Nd", "G"):
        qv = _qvector(args)
        if name == "M":
            result = exponent_M(qv)
        elif name == "Nd":
            result = exponent_Nd(qv, literal=args.literal)
        else:
            result = exponent_G(qv)
        return {**result.as_payload(), "d": qv.d, "q": qv.labels()}, 0
    if name == "gamma_moment":
        d = _require(args.d, "--d", name)
        return {"name": name, "d": d, "value": moment_constant_gamma(d), "branch": None}, 0
    if name == "t":
        d, k = _require(args.d, "--d", name), _require(args.k, "--k", name)
        rank = _require(args.r, "--r", name)
        if not float(rank).is_integer():
            raise InvalidParameter(f"exponent t needs an integer rank --r, got {rank}")
        r = int(rank)
        return {"name": name, "d": d, "k": k, "r": r, "value": ustat_scale_t(d, k, r), "branch": None}, 0
    q = _single_q(args)
    if name == "gamma_dq":
        d = _require(args.d, "--d", name)
        return {**exponent_gamma_dq(d, q).as_payload(), "d": d, "q": q}, 0
    r = 0.0 if args.r is None else args.r
    if name == "rV":
        d = _require(args.d, "--d", name)
        return {**log_refined_recursion(d, q, r).as_payload(), "d": d, "q": q, "r": r}, 0
    result = vector_L(q, r) if name == "L" else vector_N_qr(q, r)
    return {**result.as_payload(), "q": q, "r": r}, 0


def _bound_request(args: argparse.Namespace) -> BoundRequest:
    if args.request:
        return BoundRequest.model_validate(_read_json(args.request))
    if args.theorem is None:
        raise InvalidParameter("bound needs --theorem or --request")
    payload: dict[str, Any] = {"theorem": args.theorem, "mode": args.mode, "r": args.r}
    if args.assumptions:
        payload["assumptions"] = _read_json(args.assumptions)
    if args.kernel:
        payload["kernel"] = _read_json(args.kernel)
    if args.field:
        payload["field"] = _read_json(args.field)
    if args.q:
        payload["q"] = _split(args.q)
    for key, value in (("K", _floats(args.K)), ("p", _floats(args.p)), ("d", args.d)):
        if value is not None:
            payload[key] = value
    if args.constant is not None:
        payload["constant"] = args.constant
    if args.kernel_scale is not None:
        payload["kernel_scale"] = args.kernel_scale
    return BoundRequest.model_validate(payload)


def cmd_bound(args: argparse.Namespace, settings: Settings) -> tuple[dict[str, Any], int]:
    request = _bound_request(args)
    result = compute_bound(request)
    payload = {**result.to_model().model_dump(mode="json"), "assumptions": result.assumptions}
    if args.output:
        path = Path(args.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(payload) + "\n", encoding="utf-8")
    if args.csv:
        if result.tail is not None:
            grid = to_grid(result.tail)
            rows = ({"x": float(x), "bound": float(t)} for x, t in zip(grid.x, grid.t))
            write_rows(Path(args.csv), ["x", "bound"], rows)
        else:
            write_rows(Path(args.csv), ["p", "bound"], ({"p": p, "bound": b} for p, b in result.moments))
    return payload, 0


def _family(args: argparse.Namespace) -> FamilySpec:
    return FamilySpec(kind=args.family, d=args.d, n=args.n, q=args.q)


def _probe_payload(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    n_list = [int(n) for n in _floats(args.n_list) or [args.n]]
    xs = _floats(args.x_grid)
    if xs is None:
        raise InvalidParameter("the lower-envelope probe needs --x-grid")
    probe = lower_envelope_probe(
        args.d,
        "inf" if args.q is None else args.q,
        n_list,
        xs,
        replications=args.replications or settings.tail_replications,
        seed=args.seed,
    )
    return asdict(probe)


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> tuple[dict[str, Any], int]:
    if args.probe:
        return _probe_payload(args, settings), 0
    family = _family(args)
    replications = args.replications or settings.tail_replications
    field = field_from_spec(_field_spec(args.field)) if args.field else SeparableField.uniform(family.d, family.n)
    batch = generate_batch(
        family, replications, args.seed, workers=args.workers or settings.workers, block_size=settings.block_size
    )
    values = evaluate_Qd(field, batch)
    xs = np.asarray(_floats(args.x_grid) or default_x_grid(values), dtype=float)
    tail = empirical_tail(values, xs, confidence=settings.confidence)
    payload: dict[str, Any] = {
        "family": family.model_dump(mode="json"),
        "replications": replications,
        "seed": args.seed,
        "confidence": settings.confidence,
        "tail": [
            {"x": float(x), "empirical": float(e), "cp_lower": float(lo), "cp_upper": float(up)}
            for x, e, lo, up in zip(tail.x, tail.estimate, tail.lower, tail.upper)
        ],
        "drift_checks": [check.model_dump(mode="json") for check in drift_checks(batch)],
    }
    p_list = _floats(args.p)
    if p_list:
        moments = empirical_moments(
            values, p_list, resamples=settings.bootstrap_resamples, confidence=settings.confidence, seed=args.seed
        )
        payload["moments"] = [
            {"p": float(p), "estimate": float(e), "lower": float(lo), "upper": float(up), "reliable": bool(ok)}
            for p, e, lo, up, ok in zip(moments.p, moments.estimate, moments.lower, moments.upper, moments.reliable)
        ]
    try:
        expected = diagonal_free_variance(field, batch.second_moment)
    except ChaosTailsError:
        expected = None
    if expected is not None:
        payload["variance"] = asdict(variance_check(values, expected, seed=args.seed))
    if args.independence and family.n >= 2:
        payload["independence"] = asdict(independence_check(batch, seed=args.seed))
    return payload, 0


def _field_spec(path: str) -> FieldSpec:
    return TypeAdapter(FieldSpec).validate_python(_read_json(path))


def cmd_oracle(args: argparse.Namespace, settings: Settings) -> tuple[dict[str, Any], int]:
    field = field_from_spec(_field_spec(args.field)) if args.field else SeparableField.uniform(args.d, args.n)
    xs = _floats(args.x)
    if xs is None:
        raise InvalidParameter("oracle needs --x")
    tail = exact_oracle_tail(field, args.d, args.n, np.asarray(xs), max_bits=settings.oracle_max_bits)
    return {
        "d": args.d,
        "n": args.n,
        "patterns": 2 ** (args.d * args.n),
        "tail": [{"x": x, "exact": float(t)} for x, t in zip(xs, np.atleast_1d(tail))],
    }, 0


def cmd_verify(args: argparse.Namespace, settings: Settings) -> tuple[dict[str, Any], int]:
    config = CampaignConfig.model_validate(_read_json(args.config))
    overrides: dict[str, Any] = {}
    if args.scale_bound is not None:
        overrides["scale_bound"] = args.scale_bound
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = CampaignConfig.model_validate({**config.model_dump(), **overrides})
    store = FileReportStore(args.output_dir or config.output_dir or settings.output_dir)
    report = verify_campaign(config, store=store, settings=settings, workers=args.workers or settings.workers)
    return report_payload(report), 0 if report.verdict == "PASS" else 1


def cmd_report(args: argparse.Namespace, settings: Settings) -> tuple[dict[str, Any], int]:
    store = FileReportStore(args.output_dir or settings.output_dir)
    if args.list:
        return {"reports": store.list_reports()}, 0
    if args.campaign_id:
        report = store.get_report(args.campaign_id)
        if report is None:
            raise InvalidParameter(f"no stored report for campaign {args.campaign_id!r}")
        return report_payload(report), 0
    if args.table == "exponents":
        rows = exponent_table(args.d_max, _split(args.q) or ["0.5", "1", "2", "inf"])
        if args.csv:
            write_rows(Path(args.csv), list(rows[0]), rows)
        return {"table": "exponents", "rows": rows}, 0
    alphas = _floats(args.alpha)
    if not alphas:
        raise InvalidParameter("the power_law table needs --alpha")
    q = _split(args.q)[0] if _split(args.q) else "inf"
    rows = [asdict(power_law_regime(args.d, q, alpha)) for alpha in alphas]
    if args.csv:
        write_rows(Path(args.csv), list(rows[0]), rows)
    return {"table": "power_law", "q": q, "rows": rows}, 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaos-tails",
        description="Tail and moment bounds for polynomial martingales, checked against simulation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    exponent = subparsers.add_parser("exponent", help="Evaluate one closed-form exponent or constant.")
    exponent.add_argument("--name", required=True, choices=EXPONENT_NAMES)
    exponent.add_argument("--q", help="Tail exponents, comma separated; 'inf' for bounded variables.")
    exponent.add_argument("--d", type=int)
    exponent.add_argument(
        "--r", type=float, help="Log refinement for rV, L and N_qr (default 0); the required rank for t."
    )
    exponent.add_argument("--k", type=int, help="Projection order for t.")
    exponent.add_argument(
        "--literal",
        action="store_true",
        help="Nd from the literal (D-2)/2 lead of the recursion instead of (D-1)/2.",
    )
    exponent.set_defaults(handler=cmd_exponent)

    bound = subparsers.add_parser("bound", help="Construct a tail or moment bound.")
    bound.add_argument("--request", help="BoundRequest JSON file; replaces the individual flags.")
    bound.add_argument("--theorem", type=int, choices=THEOREMS)
    bound.add_argument("--mode", choices=["tail", "moment"], default="tail")
    bound.add_argument("--assumptions", help="FamilyAssumptions JSON file.")
    bound.add_argument("--q")
    bound.add_argument("--K", help="Per-coordinate scales, comma separated.")
    bound.add_argument("--d", type=int)
    bound.add_argument("--r", type=float, default=0.0)
    bound.add_argument("--p", help="Moment orders, comma separated.")
    bound.add_argument("--kernel", help="Kernel JSON file.")
    bound.add_argument("--kernel-scale", type=float)
    bound.add_argument("--field", help="Coefficient field JSON file.")
    bound.add_argument("--constant", type=float, help="Moment constant C for the U-statistic bound.")
    bound.add_argument("--output", help="Write the BoundResult JSON here as well.")
    bound.add_argument("--csv", help="Export the tail (or moment) curve as CSV.")
    bound.set_defaults(handler=cmd_bound)

    simulate = subparsers.add_parser("simulate", help="Empirical tails and moments of Q_d for a family.")
    simulate.add_argument("--family", choices=FAMILIES, default="rademacher")
    simulate.add_argument("--d", type=int, default=1)
    simulate.add_argument("--n", type=int, default=16)
    simulate.add_argument("--q", type=float)
    simulate.add_argument("--field", help="Coefficient field JSON file; uniform when omitted.")
    simulate.add_argument("--replications", type=int)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--x-grid")
    simulate.add_argument("--p", help="Moment orders, comma separated.")
    simulate.add_argument("--workers", type=int)
    simulate.add_argument("--independence", action="store_true", help="Run the distance-correlation check.")
    simulate.add_argument("--probe", action="store_true", help="Run the lower-envelope probe instead.")
    simulate.add_argument("--n-list", help="Sample sizes for the probe's normalized sums.")
    simulate.set_defaults(handler=cmd_simulate)

    oracle = subparsers.add_parser("oracle", help="Exact Rademacher tail by enumerating sign patterns.")
    oracle.add_argument("--field", help="Coefficient field JSON file; uniform when omitted.")
    oracle.add_argument("--d", type=int, required=True)
    oracle.add_argument("--n", type=int, required=True)
    oracle.add_argument("--x", required=True, help="Levels, comma separated.")
    oracle.set_defaults(handler=cmd_oracle)

    verify = subparsers.add_parser("verify", help="Run a verification campaign; exit 1 when any point fails.")
    verify.add_argument("--config", required=True, help="CampaignConfig JSON file.")
    verify.add_argument("--scale-bound", type=float, help="Multiply the certified bound before checking.")
    verify.add_argument("--replications", type=int)
    verify.add_argument("--seed", type=int)
    verify.add_argument("--output-dir")
    verify.add_argument("--workers", type=int)
    verify.set_defaults(handler=cmd_verify)

    report = subparsers.add_parser("report", help="Stored reports and exponent tables.")
    target = report.add_mutually_exclusive_group(required=True)
    target.add_argument("--campaign-id")
    target.add_argument("--list", action="store_true")
    target.add_argument("--table", choices=["exponents", "power_law"])
    report.add_argument("--output-dir")
    report.add_argument("--d-max", type=int, default=4)
    report.add_argument("--d", type=int, default=2)
    report.add_argument("--q")
    report.add_argument("--alpha", help="Power-law decay rates, comma separated.")
    report.add_argument("--csv")
    report.set_defaults(handler=cmd_report)
    return parser


def _error_payload(error_type: str, message: str, exit_code: int) -> dict[str, Any]:
    return {"error": {"type": error_type, "message": message, "exit_code": exit_code}}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(stream=sys.stderr, level=settings.log_level, format="%(levelname)s %(name)s %(message)s")

    handler: Callable[[argparse.Namespace, Settings], tuple[dict[str, Any], int]] = args.handler
    with start_span(f"cli.{args.command}", telemetry_tags(command=args.command, environment=settings.app_env)) as span:
        try:
            payload, code = handler(args, settings)
        except ChaosTailsError as error:
            span_record_error(span, error, failure_type=type(error).__name__)
            payload, code = _error_payload(type(error).__name__, str(error), error.exit_code), error.exit_code
        except (ValidationError, json.JSONDecodeError, OSError) as error:
            span_record_error(span, error, failure_type=type(error).__name__)
            payload, code = _error_payload(type(error).__name__, str(error), INPUT_EXIT_CODE), INPUT_EXIT_CODE
        span_set_attributes(span, {"exit_code": code})
    if "error" in payload:
        log_event(_logger, "command_failed", command=args.command, exit_code=code, reason=payload["error"]["message"])
    sys.stdout.write(dumps(payload) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
