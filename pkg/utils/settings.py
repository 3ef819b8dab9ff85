"""Environment-driven defaults (``.env`` is honoured when present)."""

import os
from typing import Optional

from dotenv import load_dotenv

THREADS_ENV = "ELASTICA_MLE_THREADS"
LOG_LEVEL_ENV = "ELASTICA_MLE_LOG_LEVEL"

_loaded = False


def _ensure_env_loaded() -> None:
    global _loaded
    if not _loaded:
        load_dotenv(override=False)
        _loaded = True


def default_threads() -> int:
    """
    Worker count used when ``--threads`` is not given.

    Returns:
        Value of ELASTICA_MLE_THREADS, or 1 when unset or invalid
    """
    _ensure_env_loaded()
    raw = os.getenv(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def default_log_level(fallback: str = "INFO") -> str:
    _ensure_env_loaded()
    return os.getenv(LOG_LEVEL_ENV, fallback).upper()


def resolve_threads(requested: Optional[int]) -> int:
    return max(1, requested) if requested else default_threads()
