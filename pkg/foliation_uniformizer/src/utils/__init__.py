"""Utilities Package"""

from .logger import setup_logging, get_logger, LoggerMixin
from .exceptions import *
