"""
Engine Settings Manager
Handles budgets, precision defaults and logging configuration.
"""

import copy
import json
from pathlib import Path
from typing import Dict, Any, Optional, Union

from .constants import (
    DEFAULT_CONFIG_NAME, DEFAULT_PACKAGE_STEP_FACTOR, DEFAULT_GAME_BUDGET_FACTOR,
    DEFAULT_DRIVER_STEPS, DEFAULT_RANKONE_STEPS, DEFAULT_MAXCONTACT_STEPS,
    DEFAULT_VALUE_CAP_FACTOR, DEFAULT_ORDER, DEFAULT_SIGN_DIGITS, DEFAULT_LOG_MAX_BYTES,
    DEFAULT_LOG_BACKUPS,
)


class EngineSettings:
    """Manages engine budgets and precision defaults backed by a JSON file."""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        if config_file is None:
            config_file = Path(__file__).parent / DEFAULT_CONFIG_NAME
        self.config_file = Path(config_file)

        self.defaults = {
            "budgets": {
                "package_step_factor": DEFAULT_PACKAGE_STEP_FACTOR,
                "game_budget_factor": DEFAULT_GAME_BUDGET_FACTOR,
                "driver_steps": DEFAULT_DRIVER_STEPS,
                "rankone_steps": DEFAULT_RANKONE_STEPS,
                "maxcontact_steps": DEFAULT_MAXCONTACT_STEPS,
                "value_cap_factor": DEFAULT_VALUE_CAP_FACTOR
            },
            "precision": {
                "default_order": DEFAULT_ORDER,
                "sign_check_digits": DEFAULT_SIGN_DIGITS,
                "unit_inverse_order": DEFAULT_ORDER
            },
            "logging": {
                "level": "INFO",
                "file": None,
                "console": True,
                "color": True,
                "max_bytes": DEFAULT_LOG_MAX_BYTES,
                "backups": DEFAULT_LOG_BACKUPS
            },
            "trace": {
                "include_snapshots": True
            }
        }

        self.settings = self._load_settings()

    def _load_settings(self) -> Dict[str, Any]:
        """Load settings from file, falling back to defaults."""
        if self.config_file.exists():
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    loaded_settings = json.load(f)
                    return self._merge_settings(self.defaults, loaded_settings)
            except (json.JSONDecodeError, IOError) as e:
                print(f"Warning: Could not load settings file: {e}. Using defaults.")

        return copy.deepcopy(self.defaults)

    def _merge_settings(self, defaults: Dict[str, Any], loaded: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge loaded settings with defaults."""
        result = copy.deepcopy(defaults)

        for key, value in loaded.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_settings(result[key], value)
            else:
                result[key] = value

        return result

    def save_settings(self):
        """Save current settings to file."""
        try:
            self.config_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_file, 'w', encoding='utf-8') as f:
                json.dump(self.settings, f, indent=2, ensure_ascii=False)
        except IOError as e:
            print(f"Warning: Could not save settings: {e}")

    def get(self, key_path: str, default=None) -> Any:
        """Get a setting value using dot notation."""
        keys = key_path.split('.')
        value = self.settings

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any):
        """Set a setting value using dot notation."""
        keys = key_path.split('.')
        current = self.settings

        for key in keys[:-1]:
            if key not in current:
                current[key] = {}
            current = current[key]

        current[keys[-1]] = value

    def reset_to_defaults(self):
        """Reset all settings to default values."""
        self.settings = copy.deepcopy(self.defaults)
        self.save_settings()

    # Convenience properties
    @property
    def default_order(self) -> int:
        return int(self.get('precision.default_order', DEFAULT_ORDER))

    @default_order.setter
    def default_order(self, value: int):
        self.set('precision.default_order', int(value))

    @property
    def unit_inverse_order(self) -> int:
        return int(self.get('precision.unit_inverse_order', DEFAULT_ORDER))

    @property
    def sign_check_digits(self) -> int:
        return int(self.get('precision.sign_check_digits', DEFAULT_SIGN_DIGITS))

    @property
    def driver_steps(self) -> int:
        return int(self.get('budgets.driver_steps', DEFAULT_DRIVER_STEPS))

    @driver_steps.setter
    def driver_steps(self, value: int):
        self.set('budgets.driver_steps', int(value))

    @property
    def package_step_factor(self) -> int:
        return int(self.get('budgets.package_step_factor', DEFAULT_PACKAGE_STEP_FACTOR))

    @property
    def game_budget_factor(self) -> int:
        return int(self.get('budgets.game_budget_factor', DEFAULT_GAME_BUDGET_FACTOR))

    @property
    def rankone_steps(self) -> int:
        return int(self.get('budgets.rankone_steps', DEFAULT_RANKONE_STEPS))

    @property
    def maxcontact_steps(self) -> int:
        return int(self.get('budgets.maxcontact_steps', DEFAULT_MAXCONTACT_STEPS))

    @property
    def value_cap_factor(self) -> int:
        return int(self.get('budgets.value_cap_factor', DEFAULT_VALUE_CAP_FACTOR))

    @property
    def log_level(self) -> str:
        return self.get('logging.level', 'INFO')

    @property
    def log_file(self) -> Optional[str]:
        return self.get('logging.file')

    @property
    def log_console(self) -> bool:
        return bool(self.get('logging.console', True))

    @property
    def log_color(self) -> bool:
        return bool(self.get('logging.color', True))

    @property
    def log_max_bytes(self) -> int:
        return int(self.get('logging.max_bytes', DEFAULT_LOG_MAX_BYTES))

    @property
    def log_backups(self) -> int:
        return int(self.get('logging.backups', DEFAULT_LOG_BACKUPS))

    @property
    def include_snapshots(self) -> bool:
        return bool(self.get('trace.include_snapshots', True))
