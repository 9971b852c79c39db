"""Engine logging configured from the logging.* settings keys."""

import json
import logging
import logging.handlers
import sys

import pytest

from utils.exceptions import ValidationError
from utils.logger import ROOT_LOGGER, LoggerMixin, get_logger, setup_logging
from config.settings import EngineSettings


@pytest.fixture
def configure(tmp_path, monkeypatch):
    monkeypatch.setattr(sys, "excepthook", sys.excepthook)

    def build(**logging_keys):
        config = tmp_path / "logging_config.json"
        config.write_text(json.dumps({"logging": logging_keys}), encoding="utf-8")
        return setup_logging(EngineSettings(config))

    yield build
    engine = logging.getLogger(ROOT_LOGGER)
    for handler in list(engine.handlers):
        handler.close()
    engine.handlers.clear()


def test_rotating_file_follows_settings(configure, tmp_path):
    path = tmp_path / "logs" / "engine.log"
    logger = configure(level="DEBUG", file=str(path), console=False, max_bytes=2048, backups=2)
    assert logger.name == ROOT_LOGGER
    assert logger.level == logging.DEBUG
    [handler] = logger.handlers
    assert isinstance(handler, logging.handlers.RotatingFileHandler)
    assert handler.maxBytes == 2048
    assert handler.backupCount == 2
    assert path.parent.is_dir()


def test_no_file_unless_configured(configure):
    logger = configure(level="WARNING", console=False)
    assert logger.handlers == []
    assert logger.level == logging.WARNING


def test_console_writes_to_stderr(configure):
    logger = configure(level="INFO", console=True, color=False)
    [handler] = logger.handlers
    assert isinstance(handler, logging.StreamHandler)
    assert handler.stream is sys.stderr


def test_unknown_level_falls_back_to_info(configure):
    assert configure(level="chatty", console=False).level == logging.INFO


def test_engine_errors_carry_code_and_details(configure, tmp_path):
    path = tmp_path / "engine.log"
    logger = configure(level="INFO", file=str(path), console=False)
    error = ValidationError("Field must be written in the engine frame", "frame", "plain")
    get_logger("maxcontact").error("run failed", exc_info=error)
    for handler in logger.handlers:
        handler.flush()
    text = path.read_text(encoding="utf-8")
    assert "run failed [VALIDATION_ERROR]" in text
    assert "'field_name': 'frame'" in text


def test_child_loggers_share_the_engine_root():
    class Stage(LoggerMixin):
        pass

    assert get_logger("npp").name == f"{ROOT_LOGGER}.npp"
    assert Stage().logger.name == f"{ROOT_LOGGER}.Stage"
