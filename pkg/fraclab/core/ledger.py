import json
import logging
import threading
from pathlib import Path
from typing import Any, Optional
from fraclab.core.config import get_settings
from fraclab.core.errors import LabError

settings = get_settings()
logger = logging.getLogger(__name__)

_locks: dict[str, threading.Lock] = {}
_registry_lock = threading.Lock()


def path_lock(path: Path) -> threading.Lock:
    """One lock per artifact path; writes to the same file are serialized."""
    key = str(Path(path).resolve())
    with _registry_lock:
        return _locks.setdefault(key, threading.Lock())


def load_constants(path: Optional[Path] = None) -> dict[str, Any]:
    """Calibrated constants (γ, γ₁, γ₁′, γ₁″, fitted C's); empty when not calibrated yet."""
    path = Path(path or settings.CONSTANTS_LEDGER)
    if not path.exists():
        logger.info(f"No constants ledger at {path}; criteria verdicts will be n/a")
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise LabError(f"Constants ledger {path} is not valid JSON: {e}") from e


def write_constants(constants: dict[str, Any], path: Optional[Path] = None, overwrite: bool = False) -> Path:
    """Freeze calibrated constants. The ledger is written once and read-only afterwards.

    Raises:
        LabError: the ledger exists and ``overwrite`` is False.
    """
    path = Path(path or settings.CONSTANTS_LEDGER)
    with path_lock(path):
        if path.exists() and not overwrite:
            raise LabError(f"Constants ledger {path} already exists; refusing to overwrite")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(constants, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")
    logger.info(f"Constants ledger written to {path}")
    return path
