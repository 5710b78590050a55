from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from chaos_tails.ops.cli import main


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    for name in ("CHAOS_TAILS_ORACLE_MAX_BITS", "CHAOS_TAILS_OUTPUT_DIR", "CHAOS_TAILS_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def _run(capsys: pytest.CaptureFixture[str], *argv: str) -> tuple[int, dict]:
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


def _write(path: Path, payload: object) -> str:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_exponent_command(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run(capsys, "exponent", "--name", "M", "--q", "2,2")
    assert code == 0
    assert payload["value"] == pytest.approx(0.5)
    assert payload["q"] == [2.0, 2.0]

    code, payload = _run(capsys, "exponent", "--name", "gamma_moment", "--d", "2")
    assert code == 0
    assert payload["value"] == pytest.approx(4.0)


def test_invalid_exponent_exits_with_input_code(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run(capsys, "exponent", "--name", "M", "--q", "0,2")
    assert code == 2
    assert payload["error"]["type"] == "InvalidParameter"
    assert payload["error"]["exit_code"] == 2


def test_moment_bound_from_assumption_file(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    assumptions = _write(
        tmp_path / "assumptions.json",
        {"d": 1, "tails": [{"repr": "parametric", "q": 2.0}], "moments": [{"kind": "constant"}]},
    )
    code, payload = _run(
        capsys, "bound", "--theorem", "6", "--mode", "moment", "--assumptions", assumptions, "--p", "2"
    )
    assert code == 0
    assert payload["mode"] == "moment"
    assert payload["moments"][0]["bound"] == pytest.approx(2.0 * math.sqrt(2.0))


def test_kernel_bound_and_csv_export(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    kernel = _write(
        tmp_path / "kernel.json",
        {"support": [{"x": -1.0, "p": 0.5}, {"x": 1.0, "p": 0.5}], "d": 2, "phi": [[1.0, -1.0], [-1.0, 1.0]]},
    )
    csv_path = tmp_path / "curve.csv"
    code, payload = _run(
        capsys, "bound", "--theorem", "9", "--kernel", kernel, "--q", "2", "--r", "1", "--csv", str(csv_path)
    )
    assert code == 0
    assert payload["exponent"] == pytest.approx(0.4)
    assert csv_path.read_text(encoding="utf-8").splitlines()[0] == "x,bound"


def test_independent_moment_bound_rejects_small_order(
    capsys: pytest.CaptureFixture[str], tmp_path: Path
) -> None:
    assumptions = _write(
        tmp_path / "assumptions.json",
        {
            "d": 1,
            "tails": [{"repr": "parametric", "q": 2.0}],
            "moments": [{"kind": "constant"}],
            "independence": "independent",
        },
    )
    code, payload = _run(
        capsys, "bound", "--theorem", "7", "--mode", "moment", "--assumptions", assumptions, "--p", "1.5"
    )
    assert code == 2
    assert payload["error"]["type"] == "InvalidParameter"


def test_oracle_command(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run(capsys, "oracle", "--d", "1", "--n", "4", "--x", "1.5")
    assert code == 0
    assert payload["patterns"] == 16
    assert payload["tail"][0]["exact"] == pytest.approx(0.0625)


def test_oversized_oracle_exits_with_too_large(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run(capsys, "oracle", "--d", "2", "--n", "15", "--x", "1")
    assert code == 4
    assert payload["error"]["type"] == "TooLarge"


def _azuma_config(tmp_path: Path) -> str:
    return _write(
        tmp_path / "azuma.json",
        {
            "campaign_id": "azuma-cli",
            "family": {"kind": "rademacher", "d": 1, "n": 64},
            "field": {"rule": "uniform", "d": 1, "n": 64},
            "bound": {
                "theorem": 4,
                "assumptions": {"d": 1, "tails": [{"repr": "grid", "x": [0.0, 1.0], "t": [1.0, 0.0]}]},
            },
            "replications": 50_000,
            "seed": 3,
            "x_grid": [0.25 * k for k in range(1, 17)],
        },
    )


def test_verify_writes_report_and_report_reads_it(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    config = _azuma_config(tmp_path)
    out = tmp_path / "reports"
    code, payload = _run(capsys, "verify", "--config", config, "--output-dir", str(out))
    assert code == 0
    assert payload["verdict"] == "PASS"
    assert (out / "azuma-cli.json").exists()

    code, listing = _run(capsys, "report", "--list", "--output-dir", str(out))
    assert code == 0
    assert listing == {"reports": ["azuma-cli"]}

    code, stored = _run(capsys, "report", "--campaign-id", "azuma-cli", "--output-dir", str(out))
    assert code == 0
    assert stored["verdict"] == "PASS"
    assert len(stored["tail_checks"]) == 16


def test_verify_with_shrunken_bound_exits_one(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    config = _azuma_config(tmp_path)
    code, payload = _run(
        capsys, "verify", "--config", config, "--scale-bound", "0.01", "--output-dir", str(tmp_path / "reports")
    )
    assert code == 1
    assert payload["verdict"] == "FAIL"


def test_missing_report_is_an_input_error(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    code, payload = _run(capsys, "report", "--campaign-id", "absent", "--output-dir", str(tmp_path))
    assert code == 2
    assert "absent" in payload["error"]["message"]


def test_report_tables(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    csv_path = tmp_path / "exponents.csv"
    code, payload = _run(capsys, "report", "--table", "exponents", "--d-max", "2", "--q", "2", "--csv", str(csv_path))
    assert code == 0
    assert [row["d"] for row in payload["rows"]] == [1, 2]
    assert payload["rows"][1]["M"] == pytest.approx(0.5)
    assert csv_path.exists()

    code, payload = _run(capsys, "report", "--table", "power_law", "--alpha", "1.5")
    assert code == 0
    assert payload["q"] == "inf"
    row = payload["rows"][0]
    assert row["regime"] == "subcritical"
    assert row["tail_exponent"] == pytest.approx(2.0)
    assert row["moment_exponent"] == pytest.approx(1.0)


def test_simulate_reports_tail_and_drift(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run(
        capsys, "simulate", "--family", "rademacher", "--d", "1", "--n", "16",
        "--replications", "2000", "--seed", "5", "--x-grid", "1,2",
    )
    assert code == 0
    assert [point["x"] for point in payload["tail"]] == [1.0, 2.0]
    for point in payload["tail"]:
        assert point["cp_lower"] <= point["empirical"] <= point["cp_upper"]
    assert payload["drift_checks"]
    assert all(check["passed"] for check in payload["drift_checks"])


def test_scale_t_needs_an_explicit_rank(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run(capsys, "exponent", "--name", "t", "--d", "3", "--k", "2")
    assert code == 2
    assert "--r" in payload["error"]["message"]

    code, payload = _run(capsys, "exponent", "--name", "t", "--d", "3", "--k", "2", "--r", "1.5")
    assert code == 2

    code, payload = _run(capsys, "exponent", "--name", "t", "--d", "3", "--k", "2", "--r", "1")
    assert code == 0
    assert payload["value"] == pytest.approx(1.0 / 9.0)


def test_literal_flag_changes_the_nd_lead(capsys: pytest.CaptureFixture[str]) -> None:
    _, corrected = _run(capsys, "exponent", "--name", "Nd", "--q", "inf,inf,inf")
    _, literal = _run(capsys, "exponent", "--name", "Nd", "--q", "inf,inf,inf", "--literal")
    assert "(D-2)/2" in literal["provenance"]
    assert "(D-1)/2" in corrected["provenance"]
