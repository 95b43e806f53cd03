"""Run identifier utilities.

Provides a stable per-run id accessible via a ContextVar so that reports and
stage logs from one CLI invocation land under the same output folder.
"""

import uuid
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Optional

_run_id_var: ContextVar[Optional[str]] = ContextVar("run_id", default=None)


def _new_id() -> str:
    """Generate a new run id: ``YYYYmmddHHMMSS_<8 hex>``."""
    return (
        f"{datetime.now(timezone.utc).strftime('%Y%m%d%H%M%S')}_{uuid.uuid4().hex[:8]}"
    )


def get_run_id() -> str:
    """Return the current run id, creating one if absent for this context."""
    rid = _run_id_var.get()
    if rid is None:
        _run_id_var.set(_new_id())
        rid = _run_id_var.get()
    return rid


def set_run_id(run_id: str) -> None:
    """Pin the run id for this context (reruns and tests)."""
    _run_id_var.set(run_id)
