"""Configuration Package"""

from .settings import EngineSettings
from .constants import *
