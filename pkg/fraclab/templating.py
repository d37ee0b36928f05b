import math
from jinja2 import Environment, FileSystemLoader
from fraclab.core.config import get_settings

settings = get_settings()
templates = Environment(
    loader=FileSystemLoader(str(settings.TEMPLATES_DIR)),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def short(value: str, digits: int = 6) -> str:
    """Numeric CSV cells shortened to ``digits`` significant digits for display."""
    try:
        number = float(value)
    except (TypeError, ValueError):
        return value
    if math.isinf(number) or math.isnan(number) or number.is_integer() and abs(number) < 1e15:
        return value
    return f"{number:.{digits}g}"


templates.filters["short"] = short
