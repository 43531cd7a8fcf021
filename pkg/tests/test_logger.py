import io
import json
import logging

import pytest

from graphelliptic.utils.logger import get_logger, log_command, setup_logging


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


def test_json_records_carry_extra_fields(restore_root_logger):
    stream = io.StringIO()
    setup_logging(log_level="INFO", json_output=True, stream=stream)
    get_logger("graphelliptic.test").info("restart done", extra={"restart": 3})
    record = json.loads(stream.getvalue().splitlines()[-1])
    assert record["message"] == "restart done"
    assert record["restart"] == 3


def test_level_filters_records(restore_root_logger):
    stream = io.StringIO()
    setup_logging(log_level="warning", stream=stream)
    get_logger("graphelliptic.test").info("hidden")
    assert stream.getvalue() == ""


def test_only_the_root_logger_is_configured(restore_root_logger):
    other = logging.getLogger("some.library")
    other.setLevel(logging.NOTSET)
    setup_logging(log_level="DEBUG", stream=io.StringIO())
    assert other.level == logging.NOTSET


def test_log_command(restore_root_logger):
    stream = io.StringIO()
    setup_logging(log_level="INFO", json_output=True, stream=stream)
    log_command(get_logger("graphelliptic.main"), "solve", {"seed": 5})
    assert "solve" in stream.getvalue()
