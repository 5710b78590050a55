from __future__ import annotations

from contextlib import contextmanager
import json
import logging
import numbers
import time
from typing import Any, Generator, Sequence

import numpy as np

from chaos_tails.domain.errors import ChaosTailsError

try:
    from opentelemetry import trace as _otel_trace
    from opentelemetry.trace import Status as _OtelStatus
    from opentelemetry.trace import StatusCode as _OtelStatusCode
except ModuleNotFoundError:
    _otel_trace = None
    _OtelStatus = None
    _OtelStatusCode = None


class _NoopSpan:
    """Stand-in when no OpenTelemetry SDK is importable; keeps what was recorded for inspection."""

    def __init__(self, name: str = "") -> None:
        self.name = name
        self.attributes: dict[str, Any] = {}
        self.exceptions: list[BaseException] = []
        self.status: Any = None

    def set_attribute(self, key: str, value: Any) -> None:
        self.attributes[key] = value

    def record_exception(self, error: BaseException) -> None:
        self.exceptions.append(error)

    def set_status(self, status: Any) -> None:
        self.status = status


def span_component(name: str) -> str:
    """Top-level package area of a dotted span name: "bounds.recursion.martingale" -> "bounds"."""
    return name.split(".", 1)[0]


@contextmanager
def start_span(name: str, attributes: dict[str, Any] | None = None) -> Generator[_NoopSpan | Any, None, None]:
    tags = {"component": span_component(name), **(attributes or {})}
    if _otel_trace is None:
        span = _NoopSpan(name)
        span_set_attributes(span, tags)
        yield span
        return

    tracer = _otel_trace.get_tracer("chaos_tails")
    with tracer.start_as_current_span(name) as span:
        span_set_attributes(span, tags)
        yield span


def _attribute_value(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, (str, bool, int, float)):
        return value
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, Sequence) and value and all(
        isinstance(item, numbers.Real) and not isinstance(item, bool) for item in value
    ):
        return tuple(float(item) for item in value)
    return str(value)


def span_set_attributes(span: _NoopSpan | Any, attributes: dict[str, Any]) -> None:
    """Primitive values pass through, numeric sequences become float tuples, anything else is stringified."""
    for key, value in attributes.items():
        if value is None:
            continue
        span.set_attribute(key, _attribute_value(value))


def span_record_error(span: _NoopSpan | Any, error: Exception, failure_type: str | None = None) -> None:
    span.set_attribute("failure_type", failure_type or type(error).__name__)
    if isinstance(error, ChaosTailsError):
        span.set_attribute("exit_code", error.exit_code)
    span.record_exception(error)
    if _OtelStatus is not None and _OtelStatusCode is not None:
        span.set_status(_OtelStatus(_OtelStatusCode.ERROR, str(error)))


def telemetry_tags(
    *,
    campaign_id: str | None = None,
    command: str | None = None,
    theorem: str | None = None,
    family: str | None = None,
    d: int | None = None,
    n: int | None = None,
    replications: int | None = None,
    seed: int | None = None,
    verdict: str | None = None,
    environment: str | None = None,
    latency_ms: int | None = None,
    failure_type: str | None = None,
) -> dict[str, str | int | float]:
    tags: dict[str, str | int | float | None] = {
        "campaign_id": campaign_id,
        "command": command,
        "theorem": theorem,
        "family": family,
        "d": d,
        "n": n,
        "replications": replications,
        "seed": seed,
        "verdict": verdict,
        "environment": environment,
        "latency_ms": latency_ms,
        "failure_type": failure_type,
    }
    return {key: value for key, value in tags.items() if value is not None}


def elapsed_ms(started: float) -> int:
    """Milliseconds since a time.perf_counter() reading."""
    return int((time.perf_counter() - started) * 1000)


def _json_default(value: object) -> object:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def log_event(logger: logging.Logger, event: str, **fields: object) -> None:
    payload = {"event": event, **fields}
    logger.info("%s", json.dumps(payload, sort_keys=True, default=_json_default))
