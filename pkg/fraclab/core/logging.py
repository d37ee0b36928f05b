import logging
import sys
from fraclab.core.config import get_settings

settings = get_settings()

# numerical warnings (scipy IntegrationWarning, numpy RuntimeWarning) arrive here
WARNINGS_LOGGER = "py.warnings"


def setup_logging(level: str | None = None) -> None:
    """
    Configures the standard Python logging module for the laboratory.

    Warnings raised by numpy and scipy are routed through logging and shown
    with the solver messages at DEBUG level only.
    """
    log_level = logging.getLevelName((level or settings.LOG_LEVEL).upper())
    if not isinstance(log_level, int):
        log_level = logging.INFO
    if settings.DEBUG:
        log_level = logging.DEBUG

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Avoid duplicate handlers if setup is called multiple times
    if not root_logger.handlers:
        root_logger.addHandler(console_handler)

    logging.captureWarnings(True)
    # quadrature warnings repeat once per node; shown only when debugging
    logging.getLogger(WARNINGS_LOGGER).setLevel(logging.DEBUG if log_level <= logging.DEBUG else logging.ERROR)

    logging.info(f"Logging initialized with level: {logging.getLevelName(log_level)}")
