"""Input-validation helpers shared by the estimator surfaces."""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import ParameterError

if TYPE_CHECKING:
    from .world import World


def check_prompts(prompts: Sequence[int], world: "World") -> np.ndarray:
    """Coerce to an int64 id array and bounds-check against the universe."""
    arr = np.asarray(prompts)
    if arr.ndim != 1:
        raise ParameterError("prompts must be a one-dimensional sequence of ids")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == arr.astype(np.int64)):
            raise ParameterError("prompt ids must be integers")
    arr = arr.astype(np.int64)
    if arr.size:
        lo, hi = int(arr.min()), int(arr.max())
        if lo < 0 or hi >= world.config.prompt_universe:
            raise ParameterError(
                f"prompt ids must lie in [0, {world.config.prompt_universe})")
    return arr


def check_unit_interval(name: str, value: float, *, open_ends: bool = True) -> float:
    value = float(value)
    inside = 0.0 < value < 1.0 if open_ends else 0.0 <= value <= 1.0
    if not inside:
        raise ParameterError(f"{name}={value} is outside the unit interval")
    return value
