import logging
import math
from functools import wraps
from typing import Any, Callable

import numpy as np

import config

logger = logging.getLogger(__name__)


class RBCError(Exception):
    pass


class DomainError(RBCError, ValueError):
    pass


class PreconditionError(RBCError):
    pass


class OracleError(RBCError):
    pass


class ChannelFileError(RBCError):
    pass


class ConfigError(RBCError):
    pass


def handle_cli_errors(func: Callable[..., int]) -> Callable[..., int]:
    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except OracleError as e:
            logger.error(f"Oracle failure in {func.__name__}: {e}", exc_info=True)
            return config.EXIT_ORACLE_FAILURE
        except (DomainError, PreconditionError, ChannelFileError, ConfigError) as e:
            logger.error(f"Precondition violated in {func.__name__}: {e}", exc_info=True)
            return config.EXIT_PRECONDITION
    return wrapper


def safe_float(value: Any, name: str) -> float:
    try:
        result = float(value)
    except (ValueError, TypeError):
        raise DomainError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(result):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return result


def require_unit_interval(value: Any, name: str) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


def require_nonnegative(value: Any, name: str) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


def require_positive(value: Any, name: str) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
