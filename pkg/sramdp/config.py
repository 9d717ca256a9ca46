"""
Configuration loading for sramdp: config files, .env discovery and settings
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .errors import ConfigError


# Environment settings and their built-in defaults
DEFAULT_SETTINGS = {
    "SRAMDP_SEED": "12345",
    "SRAMDP_OUT_DIR": "sramdp-out",
    "SRAMDP_LOG_LEVEL": "WARNING",
}

_dotenv_loaded = False


def load_dotenv_if_available() -> bool:
    """Load a .env file if it exists and python-dotenv is available"""
    global _dotenv_loaded
    if _dotenv_loaded:
        return True

    try:
        from dotenv import load_dotenv

        # Look for .env in the working directory, then its parents
        for directory in (Path.cwd(), *Path.cwd().parents):
            env_path = directory / ".env"
            if env_path.exists():
                load_dotenv(env_path)
                _dotenv_loaded = True
                return True

    except ImportError:
        # python-dotenv not installed, environment variables only
        pass

    return False


def get_setting(name: str, default: Optional[str] = None) -> Optional[str]:
    """
    Get a setting from the environment with .env file support

    Args:
        name: Setting name (e.g., 'SRAMDP_SEED')
        default: Override the built-in default

    Returns:
        Setting value if found, the default otherwise
    """
    load_dotenv_if_available()

    fallback = default if default is not None else DEFAULT_SETTINGS.get(name)
    return os.getenv(name, fallback)


def get_seed(explicit: Optional[int] = None) -> int:
    """Resolve the master seed: explicit value, then SRAMDP_SEED, then the default"""
    if explicit is not None:
        return int(explicit)

    raw = get_setting("SRAMDP_SEED")
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"SRAMDP_SEED must be an integer, got {raw!r}")


def load_config_file(file_path: Union[str, Path]) -> Dict[str, Any]:
    """Load a YAML or JSON config file into a dict"""
    path = Path(file_path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in config file {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in config file {path}: {e}")

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping at top level")
    return data
