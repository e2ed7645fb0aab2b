# -*- coding: utf-8 -*-
"""
Centralized Configuration Management
Reads DETLAB_* environment variables (and a local .env) with typed defaults
"""

import os
import logging
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

# Report schema version
VERSION = "1.0"

# Cache config to avoid re-parsing the environment on every call
_config_cache = {}

# key -> (env var, type, default)
_CONFIG_KEYS = {
    "default_depth": ("DETLAB_DEFAULT_DEPTH", int, 20),
    "radial_order": ("DETLAB_RADIAL_ORDER", int, 12),
    "angular_order": ("DETLAB_ANGULAR_ORDER", int, 24),
    "grid_resolution": ("DETLAB_GRID_RESOLUTION", int, 64),
    "psd_tol": ("DETLAB_PSD_TOL", float, 1e-10),
    "workers": ("DETLAB_WORKERS", int, 4),
    "log_level": ("DETLAB_LOG_LEVEL", str, "WARNING"),
    "seed": ("DETLAB_SEED", int, 0),
}


def _read_env(env_name, cast, default):
    raw = os.getenv(env_name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except (ValueError, TypeError):
        logger.warning(f"[!] {env_name}={raw!r} is not a valid {cast.__name__}. Using default {default}.")
        return default


def get_config(key=None, default=None):
    """
    Get configuration value from the environment (or .env)

    Args:
        key: Config key to retrieve (None = get all)
        default: Default value if key not found

    Returns:
        Config value or dict of all configs
    """
    global _config_cache

    if not _config_cache:
        loaded = {}
        for name, (env_name, cast, fallback) in _CONFIG_KEYS.items():
            loaded[name] = _read_env(env_name, cast, fallback)

        if loaded["default_depth"] < 1:
            logger.warning("[!] DETLAB_DEFAULT_DEPTH must be >= 1. Using 20.")
            loaded["default_depth"] = 20
        if loaded["workers"] < 1:
            loaded["workers"] = 1

        _config_cache = loaded

    if key:
        return _config_cache.get(key, default)
    return dict(_config_cache)


def reset_config_cache():
    """Drop cached values so the next get_config() re-reads the environment"""
    global _config_cache
    _config_cache = {}


if __name__ == "__main__":
    print("=== Testing Config Management ===")
    config = get_config()
    print("\nAll configs:")
    for k, v in config.items():
        print(f"  {k}: {v}")

    print(f"\nDyadic depth: {get_config('default_depth')}")
