from __future__ import annotations

from dataclasses import dataclass
import os

from dotenv import find_dotenv, load_dotenv


@dataclass(frozen=True)
class Settings:
    app_env: str
    workers: int
    log_level: str
    tail_replications: int
    moment_replications: int
    bootstrap_resamples: int
    confidence: float
    block_size: int
    moment_horizon: int
    oracle_max_bits: int
    output_dir: str


def _parse_int(raw: str | None, default: int, minimum: int) -> int:
    text = (raw or "").strip()
    if not text:
        return default
    try:
        return max(minimum, int(text))
    except ValueError as err:
        raise ValueError(f"Invalid integer setting: {text!r}") from err


def _parse_probability(raw: str | None, default: float) -> float:
    text = (raw or "").strip()
    if not text:
        return default
    value = float(text)
    if not 0.5 <= value < 1.0:
        raise ValueError(f"Confidence must lie in [0.5, 1): {value}")
    return value


def get_settings() -> Settings:
    dotenv_path = find_dotenv(usecwd=True)
    if dotenv_path:
        load_dotenv(dotenv_path=dotenv_path, override=False)

    return Settings(
        app_env=os.getenv("CHAOS_TAILS_ENV", "dev"),
        workers=_parse_int(os.getenv("CHAOS_TAILS_WORKERS"), default=1, minimum=1),
        log_level=os.getenv("CHAOS_TAILS_LOG_LEVEL", "INFO").strip().upper() or "INFO",
        tail_replications=_parse_int(os.getenv("CHAOS_TAILS_TAIL_REPLICATIONS"), default=100_000, minimum=1),
        moment_replications=_parse_int(os.getenv("CHAOS_TAILS_MOMENT_REPLICATIONS"), default=10_000, minimum=1),
        bootstrap_resamples=_parse_int(os.getenv("CHAOS_TAILS_BOOTSTRAP_RESAMPLES"), default=1000, minimum=10),
        confidence=_parse_probability(os.getenv("CHAOS_TAILS_CONFIDENCE"), default=0.99),
        block_size=_parse_int(os.getenv("CHAOS_TAILS_BLOCK_SIZE"), default=4096, minimum=1),
        moment_horizon=_parse_int(os.getenv("CHAOS_TAILS_MOMENT_HORIZON"), default=64, minimum=2),
        oracle_max_bits=_parse_int(os.getenv("CHAOS_TAILS_ORACLE_MAX_BITS"), default=24, minimum=1),
        output_dir=os.getenv("CHAOS_TAILS_OUTPUT_DIR", "out"),
    )
