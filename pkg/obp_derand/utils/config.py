"""Runtime configuration and the constants ledger.

Settings come from environment variables (``.env`` is loaded by the CLI
entrypoint). The constants ledger holds every artifact-level constant used by
size budgets and parameter formulas, so reports can embed an exact snapshot.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_ENUM_CAP = 2**20


class CapacityError(Exception):
    """Raised when an enumeration would exceed the configured cap."""


class ConfigError(Exception):
    """Raised when settings or the constants ledger cannot be loaded."""


class ConstantsLedger(BaseModel):
    """Artifact-level constants; none of these are fixed by the underlying theory."""

    model_config = ConfigDict(extra="forbid")

    c_rm: int = Field(default=4, ge=1, description="Reed-Muller stage size factor")
    c_xor: int = Field(default=2, ge=1, description="XOR stage size factor")
    c_gl: int = Field(default=2, ge=1, description="Goldreich-Levin stage size factor")
    c_nw: int = Field(default=2, ge=1, description="NW restriction size factor")
    c_iw: int = Field(default=4, ge=1, description="XOR-lemma sampler accuracy divisor")
    c0: int = Field(default=4, ge=1, description="rho = eps / c0")
    c2: int = Field(default=1, ge=1, description="gamma = c2 * rho")
    xor_blocks: int = Field(default=2, ge=2, description="blocks of the derandomized direct product")
    gl_ell_constant: int = Field(default=128, ge=1)
    bias_exponent: int = Field(default=4, ge=1, description="GL bias eps = 2^-(a*m+1)")
    sampler_delta: float = Field(default=0.5, gt=0, lt=1, description="target failure bound of expander samplers")
    sampler_groups: int = Field(default=1, ge=1)
    sampler_max_queries: int = Field(default=64, ge=1, description="query cap per reconstruction candidate")
    rm_seed_budget: int = Field(default=256, ge=0)
    xor_seed_budget: int = Field(default=256, ge=0)
    gl_seed_budget: int = Field(default=4096, ge=0)
    nw_seed_budget: int = Field(default=4096, ge=0)
    bb_sample_constant: int = Field(default=8, ge=1)
    padding_exponent: int = Field(default=1, ge=1)
    univ_max_phase: int = Field(default=40, ge=0, description="last dovetail phase j before giving up")

    @classmethod
    def from_file(cls, path: Path) -> "ConstantsLedger":
        """Load a ledger from a JSON file; unknown keys are rejected."""
        if not path.is_file():
            raise ConfigError(f"Constants ledger not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return cls.model_validate(data, strict=False)
        except (json.JSONDecodeError, ValidationError) as e:
            raise ConfigError(f"Invalid constants ledger {path}: {e}")

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump()


class Settings(BaseModel):
    enum_cap: int = Field(default=DEFAULT_ENUM_CAP, ge=1)
    output_dir: Path = Path("output")
    memo_bits: int = Field(default=16, ge=1, le=24)
    ledger: ConstantsLedger = Field(default_factory=ConstantsLedger)

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from ``OBP_DERAND_*`` environment variables."""
        try:
            kwargs: Dict[str, Any] = {}
            if os.getenv("OBP_DERAND_ENUM_CAP"):
                kwargs["enum_cap"] = int(os.environ["OBP_DERAND_ENUM_CAP"])
            if os.getenv("OBP_DERAND_OUTPUT_DIR"):
                kwargs["output_dir"] = Path(os.environ["OBP_DERAND_OUTPUT_DIR"])
            if os.getenv("OBP_DERAND_MEMO_BITS"):
                kwargs["memo_bits"] = int(os.environ["OBP_DERAND_MEMO_BITS"])
            ledger_path = os.getenv("OBP_DERAND_LEDGER")
            if ledger_path:
                kwargs["ledger"] = ConstantsLedger.from_file(Path(ledger_path))
            return cls(**kwargs)
        except ConfigError:
            raise
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"Invalid OBP_DERAND_* environment settings: {e}")


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Return the process-wide settings, reading the environment on first use."""
    global _settings
    if _settings is None:
        _settings = Settings.from_env()
    return _settings


def configure(
    *,
    enum_cap: Optional[int] = None,
    ledger_path: Optional[Path] = None,
    ledger: Optional[ConstantsLedger] = None,
    output_dir: Optional[Path] = None,
) -> Settings:
    """Replace selected fields of the process-wide settings and return them."""
    global _settings
    current = get_settings()
    update: Dict[str, Any] = {}
    if enum_cap is not None:
        update["enum_cap"] = enum_cap
    if ledger_path is not None:
        update["ledger"] = ConstantsLedger.from_file(ledger_path)
    if ledger is not None:
        update["ledger"] = ledger
    if output_dir is not None:
        update["output_dir"] = output_dir
    _settings = current.model_copy(update=update)
    logger.debug("Settings updated: %s", sorted(update))
    return _settings


def reset_settings() -> None:
    """Forget cached settings so the next access re-reads the environment."""
    global _settings
    _settings = None


def get_ledger() -> ConstantsLedger:
    return get_settings().ledger


def require_under_cap(count: int, what: str, cap: Optional[int] = None) -> None:
    """Fail fast when a loop over ``count`` items would exceed the cap."""
    limit = get_settings().enum_cap if cap is None else cap
    if count > limit:
        raise CapacityError(
            f"{what} needs {count} enumerations, above the cap of {limit}"
        )
