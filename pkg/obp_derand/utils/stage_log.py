"""Append-only audit trail for multi-stage computations."""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

from obp_derand.utils import output_parser
from obp_derand.utils.run_id import get_run_id

logger = logging.getLogger(__name__)


def utc_iso(dt: Optional[datetime] = None) -> str:
    """Return an ISO-8601 UTC timestamp for ``dt`` or now."""
    return (dt or datetime.now(timezone.utc)).isoformat()


Rec = Dict[str, Any]  # {"stage": ..., "event": ..., "when": ..., "data": {...}}


@dataclass
class StageLog:
    """
    Audit history of one run of a staged algorithm.

    Each record carries the stage name, an event kind (``start``, ``seed``,
    ``accept``, ``fail``...) and a data payload. ``timestamps=False`` keeps the
    saved file byte-identical across reruns.
    """

    name: str
    run_id: Optional[str] = None
    timestamps: bool = True

    _history: List[Rec] = field(default_factory=list, init=False, repr=False)

    def record(self, stage: str, event: str, **data: Any) -> None:
        """Append one event for ``stage``."""
        rec: Rec = {"stage": stage, "event": event, "data": self._json_ready(data)}
        if self.timestamps:
            rec["when"] = utc_iso()
        self._history.append(rec)
        logger.debug("StageLog[%s]: %s %s", self.name, stage, event)

    def events(self, stage: Optional[str] = None) -> List[Rec]:
        """Return a copy of the records, optionally filtered to one stage."""
        return [dict(r) for r in self._history if stage is None or r["stage"] == stage]

    def last(self, stage: str) -> Optional[Rec]:
        matching = self.events(stage)
        return matching[-1] if matching else None

    def save(self) -> Path:
        """Persist history to ``output/<run>/<name>/stages.json``."""
        rid = self.run_id or get_run_id()
        path = output_parser._output_root() / rid / self.name / "stages.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self._history, f, ensure_ascii=False, indent=2, sort_keys=True)
        logger.info("Stage log saved: %s", path)
        return path

    @classmethod
    def _json_ready(cls, obj: Any) -> Any:
        """Make ``obj`` JSON-serializable (rationals become ``p/q`` strings)."""
        if isinstance(obj, Fraction):
            return f"{obj.numerator}/{obj.denominator}"
        if isinstance(obj, dict):
            return {str(k): cls._json_ready(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [cls._json_ready(v) for v in obj]
        if isinstance(obj, (str, int, float, bool)) or obj is None:
            return obj
        if hasattr(obj, "item"):
            return obj.item()
        return repr(obj)
