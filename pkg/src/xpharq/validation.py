"""Input validation helpers shared by the public functions and estimators."""

import math
import numbers

import numpy as np

from .exceptions import ConfigurationError


def check_positive(value, name, allow_zero=False):
    """Return ``value`` as float, raising if it is not a finite positive number."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ConfigurationError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigurationError(f"{name} must be {bound}, got {value}")
    return value


def check_probability(value, name):
    value = check_positive(value, name, allow_zero=True)
    if value > 1:
        raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_k_max(k_max, allow_inf=False):
    """Validate a round budget; ``math.inf``/``None`` mean persistent HARQ when allowed."""
    if k_max is None or (isinstance(k_max, float) and math.isinf(k_max)):
        if allow_inf:
            return math.inf
        raise ConfigurationError("k_max must be a finite positive integer here")
    if isinstance(k_max, bool) or not isinstance(k_max, numbers.Integral) or k_max < 1:
        raise ConfigurationError(f"k_max must be a positive integer, got {k_max!r}")
    return int(k_max)


def check_grid_multiple(value, step, name, step_name="step"):
    """Return ``round(value / step)`` if ``value`` is an integer multiple of ``step``."""
    ratio = value / step
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
        raise ConfigurationError(f"{name}={value} is not a multiple of {step_name}={step}")
    return n


def as_rates(rates):
    """Coerce a rate vector to a 1-D float array and check the schedule invariants."""
    arr = np.asarray(rates, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError("a rate schedule must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("rates must be finite")
    if arr[0] <= 0:
        raise ConfigurationError(f"the first-round rate must be > 0, got {arr[0]}")
    if np.any(arr[1:] < 0):
        raise ConfigurationError("rates after the first round must be >= 0")
    return arr
