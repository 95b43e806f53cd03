from pathlib import Path
from typing import Iterator

import numpy as np
import pytest

from obp_derand.utils import config
from obp_derand.utils.run_id import set_run_id


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    for name in ("OBP_DERAND_ENUM_CAP", "OBP_DERAND_OUTPUT_DIR", "OBP_DERAND_LEDGER", "OBP_DERAND_MEMO_BITS"):
        monkeypatch.delenv(name, raising=False)
    config.reset_settings()
    config.configure(output_dir=tmp_path / "output")
    set_run_id("test_run")
    yield
    config.reset_settings()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
