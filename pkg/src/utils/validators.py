import math
from typing import Sequence, Tuple

from src.core.errors import InvalidParamsError


def _require_finite(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParamsError(f"{name}={value!r} is not a number")
    if not math.isfinite(value):
        raise InvalidParamsError(f"{name}={value!r} is not finite")
    return value


def validate_mass_ratio(mu) -> float:
    """
    Check that a mass ratio lies in [0, 1].

    Args:
        mu: Candidate mass ratio

    Returns:
        float: mu as a float

    Raises:
        InvalidParamsError: if mu is not a finite number in [0, 1]
    """
    mu = _require_finite('mu', mu)
    if not 0.0 <= mu <= 1.0:
        raise InvalidParamsError(f"mu={mu!r} must lie in [0, 1]")
    return mu


def validate_energy_parameter(c) -> float:
    return _require_finite('c', c)


def validate_resolution(resolution: Sequence[int]) -> Tuple[int, int, int, int]:
    """
    Check a filled-domain resolution (n_r, n_theta, n_w, n_t).

    Raises:
        InvalidParamsError: unless it has four positive integer entries
    """
    try:
        values = tuple(resolution)
    except TypeError:
        raise InvalidParamsError(f"resolution={resolution!r} is not a sequence")
    if len(values) != 4:
        raise InvalidParamsError(f"resolution needs 4 entries (n_r, n_theta, n_w, n_t), got {len(values)}")
    checked = []
    for name, value in zip(('n_r', 'n_theta', 'n_w', 'n_t'), values):
        if isinstance(value, bool) or int(value) != value or int(value) < 1:
            raise InvalidParamsError(f"{name}={value!r} must be a positive integer")
        checked.append(int(value))
    return tuple(checked)


def validate_range(name: str, low, high, count) -> Tuple[float, float, int]:
    """
    Check a closed sampling range [low, high] with count points.

    Raises:
        InvalidParamsError: if the bounds are not finite, reversed, or count < 1
    """
    low = _require_finite(f"{name}_min", low)
    high = _require_finite(f"{name}_max", high)
    if high < low:
        raise InvalidParamsError(f"{name} range [{low!r}, {high!r}] is reversed")
    if isinstance(count, bool) or int(count) != count or int(count) < 1:
        raise InvalidParamsError(f"n{name}={count!r} must be a positive integer")
    if int(count) > 1 and high == low:
        raise InvalidParamsError(f"{name} range is empty but {count} points were requested")
    return low, high, int(count)


def validate_unit_vector(name: str, vector, tol: float = 1e-12):
    x, y = (_require_finite(name, value) for value in vector)
    norm = math.hypot(x, y)
    if abs(norm - 1.0) > tol:
        raise InvalidParamsError(f"{name} must have unit length, got |{name}| = {norm!r}")
    return x, y


def validate_tolerance(name: str, value) -> float:
    value = _require_finite(name, value)
    if value <= 0.0:
        raise InvalidParamsError(f"{name}={value!r} must be positive")
    return value
