import logging
import pytest

from fraclab.core.logging import WARNINGS_LOGGER, setup_logging


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    warnings_logger = logging.getLogger(WARNINGS_LOGGER)
    levels = root.level, warnings_logger.level
    yield
    logging.captureWarnings(False)
    root.setLevel(levels[0])
    warnings_logger.setLevel(levels[1])


def test_numerical_warnings_hidden_unless_debugging(restore_logging):
    setup_logging("info")
    assert logging.getLogger().level == logging.INFO
    assert logging.getLogger(WARNINGS_LOGGER).level == logging.ERROR
    setup_logging("debug")
    assert logging.getLogger(WARNINGS_LOGGER).level == logging.DEBUG


def test_unknown_level_falls_back_to_info(restore_logging):
    setup_logging("chatty")
    assert logging.getLogger().level == logging.INFO
