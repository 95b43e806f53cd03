from fractions import Fraction
from pathlib import Path

import pytest

from obp_derand.utils import output_parser
from obp_derand.utils.config import configure
from obp_derand.utils.stage_log import StageLog


def _prepare_run(base_dir: Path, run_id: str) -> Path:
    run_dir = base_dir / run_id
    run_dir.mkdir(parents=True)
    return run_dir


def test_write_report_uses_configured_output_dir(tmp_path: Path) -> None:
    configure(output_dir=tmp_path / "artifacts")

    path = output_parser.write_report("verify", {"b": 1, "a": [1, 2]}, run_id="run_a")

    assert path == tmp_path / "artifacts" / "run_a" / "verify.json"
    assert path.read_text(encoding="utf-8").index('"a"') < path.read_text(encoding="utf-8").index('"b"')
    assert output_parser.read_report("run_a", "verify") == {"a": [1, 2], "b": 1}


def test_write_report_defaults_to_current_run(tmp_path: Path) -> None:
    configure(output_dir=tmp_path)

    output_parser.write_report("estimate", {"value": "1/4"})

    assert output_parser.list_reports("test_run") == ["estimate"]


def test_list_reports_skips_non_json_files(tmp_path: Path) -> None:
    configure(output_dir=tmp_path)
    run_dir = _prepare_run(tmp_path, "run_b")
    (run_dir / "recon.json").write_text("{}", encoding="utf-8")
    (run_dir / "eval_report.md").write_text("# Evals", encoding="utf-8")
    output_parser.write_text("notes.txt", "ignored", run_id="run_b")

    assert output_parser.list_reports("run_b") == ["recon"]


def test_canonical_dump_is_stable() -> None:
    first = output_parser.dump_canonical({"z": 1, "a": {"y": 2, "x": 3}})

    assert first == output_parser.dump_canonical({"a": {"x": 3, "y": 2}, "z": 1})
    assert first.endswith("\n")


def test_missing_run_directory_raises(tmp_path: Path) -> None:
    configure(output_dir=tmp_path)

    with pytest.raises(FileNotFoundError):
        output_parser.read_report("unknown_run", "verify")


def test_missing_expected_file_raises(tmp_path: Path) -> None:
    configure(output_dir=tmp_path)
    _prepare_run(tmp_path, "run_c")

    with pytest.raises(FileNotFoundError):
        output_parser.read_report("run_c", "verify")


def test_stage_log_saves_rationals_as_strings(tmp_path: Path) -> None:
    configure(output_dir=tmp_path)
    log = StageLog("recon", timestamps=False)
    log.record("gl", "start", delta=Fraction(1, 4), seeds=(1, 2))
    log.record("gl", "accept", score=Fraction(3, 8))
    log.record("rm", "fail", best=None)

    assert log.last("gl")["data"] == {"score": "3/8"}
    assert [r["event"] for r in log.events("gl")] == ["start", "accept"]
    assert log.last("xor") is None
    path = log.save()
    assert path == tmp_path / "test_run" / "recon" / "stages.json"
    assert '"delta": "1/4"' in path.read_text(encoding="utf-8")
