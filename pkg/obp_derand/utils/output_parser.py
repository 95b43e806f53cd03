"""Reading and writing run artifacts.

Every run stores its JSON reports inside ``output/<run_id>`` directories. The
helpers here keep the on-disk layout in one place so the CLI, the eval
campaigns and the tests agree on it.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from obp_derand.utils.config import get_settings
from obp_derand.utils.run_id import get_run_id

# All run artifacts live under the project-level output/ directory.
OUTPUT_DIR = Path(__file__).resolve().parents[2] / "output"


def _output_root() -> Path:
    configured = get_settings().output_dir
    if configured == Path("output"):
        return OUTPUT_DIR
    return configured if configured.is_absolute() else Path.cwd() / configured


def _get_run_dir(run_id: str) -> Path:
    """Return the directory that holds the outputs for ``run_id``."""

    run_dir = _output_root() / run_id
    if not run_dir.is_dir():
        raise FileNotFoundError(f"Run directory not found for id '{run_id}': {run_dir}")
    return run_dir


def _read_file(file_path: Path) -> str:
    """Read ``file_path`` as UTF-8, raising if the file does not exist."""

    if not file_path.is_file():
        raise FileNotFoundError(f"Expected file not found: {file_path}")
    return file_path.read_text(encoding="utf-8")


def dump_canonical(payload: Any) -> str:
    """Serialize ``payload`` with sorted keys so reruns are byte-identical."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(name: str, payload: Dict[str, Any], run_id: Optional[str] = None) -> Path:
    """Write ``payload`` to ``output/<run_id>/<name>.json`` and return the path."""
    rid = run_id or get_run_id()
    run_dir = _output_root() / rid
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / f"{name}.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(dump_canonical(payload), encoding="utf-8")
    tmp.replace(path)
    return path


def write_text(name: str, content: str, run_id: Optional[str] = None) -> Path:
    """Write a plain-text artifact (e.g. a markdown report) for the run."""
    rid = run_id or get_run_id()
    run_dir = _output_root() / rid
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / name
    path.write_text(content, encoding="utf-8")
    return path


def read_report(run_id: str, name: str) -> Dict[str, Any]:
    """
    Locate ``<name>.json`` for ``run_id`` and return its decoded contents.

    Raises:
        FileNotFoundError: If the run directory or file does not exist.
    """

    run_dir = _get_run_dir(run_id)
    return json.loads(_read_file(run_dir / f"{name}.json"))


def list_reports(run_id: str) -> List[str]:
    """
    Names of all JSON reports stored for ``run_id``, sorted for determinism.

    Raises:
        FileNotFoundError: If the run directory does not exist.
    """

    run_dir = _get_run_dir(run_id)
    return sorted(path.stem for path in run_dir.glob("*.json"))
