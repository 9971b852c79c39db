"""
Logging Configuration and Utilities
Engine logging driven by the "logging.*" settings keys. Trace lines and verdicts own stdout,
so the console handler always writes to stderr.
"""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from config.settings import EngineSettings

ROOT_LOGGER = "unif3"


class ColoredFormatter(logging.Formatter):
    """Level names colored for terminal output."""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
        'ENDC': '\033[0m'
    }

    def format(self, record):
        levelname = record.levelname
        if levelname in self.COLORS:
            record.levelname = f"{self.COLORS[levelname]}{levelname}{self.COLORS['ENDC']}"
        formatted = super().format(record)
        record.levelname = levelname
        return formatted


class EngineErrorFilter(logging.Filter):
    """Sets record.engine_error to the code and details of an engine exception, or ""."""

    def filter(self, record):
        record.engine_error = ""
        error = record.exc_info[1] if record.exc_info else None
        to_dict = getattr(error, "to_dict", None)
        if callable(to_dict):
            data = to_dict()
            record.engine_error = f" [{data['error_code']}] {data['details']}"
        return True


def _file_handler(settings: "EngineSettings", level: int) -> logging.Handler:
    path = Path(settings.log_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.handlers.RotatingFileHandler(
        filename=path,
        maxBytes=settings.log_max_bytes,
        backupCount=settings.log_backups,
        encoding='utf-8'
    )
    handler.setLevel(level)
    handler.addFilter(EngineErrorFilter())
    handler.setFormatter(logging.Formatter(
        fmt='%(asctime)s | %(name)s | %(levelname)s | %(module)s:%(funcName)s:%(lineno)d | '
            '%(message)s%(engine_error)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    ))
    return handler


def _console_handler(settings: "EngineSettings", level: int) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.addFilter(EngineErrorFilter())
    fmt = '%(asctime)s | %(levelname)s | %(name)s | %(message)s%(engine_error)s'
    if settings.log_color and sys.stderr.isatty():
        handler.setFormatter(ColoredFormatter(fmt=fmt, datefmt='%H:%M:%S'))
    else:
        handler.setFormatter(logging.Formatter(fmt=fmt, datefmt='%H:%M:%S'))
    return handler


def setup_logging(settings: "EngineSettings") -> logging.Logger:
    """Configure the engine logger from logging.level, file, console, color, max_bytes, backups.

    No file is written unless logging.file is set.
    """
    level_name = str(settings.log_level).upper()
    numeric_level = getattr(logging, level_name, logging.INFO)

    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(numeric_level)
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    if settings.log_file:
        logger.addHandler(_file_handler(settings, numeric_level))
    if settings.log_console:
        logger.addHandler(_console_handler(settings, numeric_level))

    def handle_exception(exc_type, exc_value, exc_traceback):
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return
        logger.critical("Uncaught exception", exc_info=(exc_type, exc_value, exc_traceback))

    sys.excepthook = handle_exception

    logger.debug(f"Logging at {level_name}, file={settings.log_file or 'none'}")
    return logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


class LoggerMixin:
    """Per-class engine logger."""

    @property
    def logger(self) -> logging.Logger:
        if not hasattr(self, '_logger'):
            self._logger = get_logger(self.__class__.__name__)
        return self._logger
