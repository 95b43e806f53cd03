import json
from pathlib import Path

import numpy as np
import pytest

from obp_derand.utils import config
from obp_derand.utils.bits import (
    all_inputs,
    bits_to_index,
    format_bits,
    index_to_bits,
    int_to_lsb_bits,
    lsb_bits_to_int,
    parity_array,
    parse_bits,
    row_indices,
)
from obp_derand.utils.run_id import get_run_id, set_run_id


def test_settings_read_environment(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("OBP_DERAND_ENUM_CAP", "4096")
    monkeypatch.setenv("OBP_DERAND_OUTPUT_DIR", str(tmp_path))
    config.reset_settings()

    settings = config.get_settings()
    assert settings.enum_cap == 4096
    assert settings.output_dir == tmp_path


def test_bad_environment_value_is_a_config_error(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("OBP_DERAND_ENUM_CAP", "lots")
    config.reset_settings()

    with pytest.raises(config.ConfigError):
        config.get_settings()


def test_ledger_file_overrides_defaults(tmp_path: Path) -> None:
    path = tmp_path / "ledger.json"
    path.write_text(json.dumps({"c_rm": 7, "univ_max_phase": 12}), encoding="utf-8")

    config.configure(ledger_path=path)

    ledger = config.get_ledger()
    assert ledger.c_rm == 7
    assert ledger.univ_max_phase == 12
    assert ledger.snapshot()["c_gl"] == 2


def test_ledger_rejects_unknown_keys_and_missing_files(tmp_path: Path) -> None:
    path = tmp_path / "ledger.json"
    path.write_text(json.dumps({"c_magic": 1}), encoding="utf-8")

    with pytest.raises(config.ConfigError):
        config.ConstantsLedger.from_file(path)
    with pytest.raises(config.ConfigError):
        config.ConstantsLedger.from_file(tmp_path / "absent.json")


def test_require_under_cap() -> None:
    config.configure(enum_cap=16)

    config.require_under_cap(16, "exact fit")
    with pytest.raises(config.CapacityError, match="above the cap of 16"):
        config.require_under_cap(17, "one too many")
    config.require_under_cap(17, "explicit cap", cap=32)


def test_run_id_is_stable_until_pinned() -> None:
    set_run_id("pinned")

    assert get_run_id() == "pinned"
    assert get_run_id() == "pinned"


def test_big_endian_bit_conventions() -> None:
    assert parse_bits("01 1,0") == (0, 1, 1, 0)
    assert format_bits([1, 0, 1]) == "101"
    assert bits_to_index((1, 1, 0)) == 6
    assert index_to_bits(6, 4) == (0, 1, 1, 0)
    assert list(all_inputs(2)[2]) == [1, 0]
    assert list(row_indices(all_inputs(3))) == list(range(8))
    with pytest.raises(ValueError):
        parse_bits("012")


def test_field_bit_conventions_are_least_significant_first() -> None:
    assert int_to_lsb_bits(6, 3) == [0, 1, 1]
    assert lsb_bits_to_int([0, 1, 1]) == 6
    assert list(parity_array(np.array([0, 1, 3, 7, 2**40 + 1]))) == [0, 1, 0, 1, 0]
