import ast
import logging
import re
from pathlib import Path
from typing import Any
from fraclab.core.errors import DomainError

logger = logging.getLogger(__name__)

_INF = re.compile(r"(?<![\w.])inf(?![\w.])")


def parse_value(raw: str) -> Any:
    """Python literals (numbers, tuples, lists, booleans) with ``inf``, bracketed lists of bare words
    as tuples; anything else stays a string."""
    text = raw.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if not text:
        return ""
    try:
        return ast.literal_eval(_INF.sub("1e999", text))
    except (ValueError, SyntaxError):
        pass
    # bare words in brackets: (necessary_subcritical, sufficient_qnorm)
    if text[:1] in "([" and text[-1:] in ")]" and not any(c in text[1:-1] for c in "()[]"):
        return tuple(parse_value(part) for part in text[1:-1].split(",") if part.strip())
    return text


def parse_config_text(text: str) -> dict[str, Any]:
    """Flat ``key = value`` lines with dotted section keys into a nested dict.

    ``#`` starts a comment; repeated keys are rejected.
    """
    nested: dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {number}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise DomainError(f"line {number}: {key!r} nests under a plain value")
        if parts[-1] in node:
            raise DomainError(f"line {number}: duplicate key {key!r}")
        node[parts[-1]] = parse_value(raw)
    return nested


def load_config_file(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"config file {path} not found")
    logger.debug(f"Reading experiment config {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))
