"""Output-layer activations for soft-label prediction, with analytic derivatives.

Soft labels produced by ``a`` annotators live on the grid {0, 1/a, ..., 1}.
Three output nonlinearities target that grid:

* a widened sigmoid ``sigmoid(x / widening)``, flattened so intermediate
  values between 0 and 1 are easier to hit;
* the sinusoidal step activation, which maps each interval
  [n/a, (n+1)/a) onto itself with zero slope at the grid points and slope
  pi/2 at segment midpoints, continued by linear tails of slope ``theta``
  outside [0, 1];
* a quantizing step function that snaps a value to the nearest grid point.
  Its derivative is zero almost everywhere, so it is attached after
  training for inference only, never trained through.

All math is evaluated in float64. Every function accepts a scalar or an
ndarray and returns a result of matching kind.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TailMode",
    "SsfParams",
    "SigmoidParams",
    "StepGrid",
    "ssf_value",
    "ssf_derivative",
    "widened_sigmoid_value",
    "widened_sigmoid_derivative",
    "step_quantize",
    "relu_value",
    "relu_derivative",
    "activation_value",
    "activation_derivative",
]

HALF_PI = math.pi / 2.0


class TailMode(enum.Enum):
    """Behaviour of the linear tail above x = 1."""

    # 1 + theta*x: the tail keeps an offset jump of exactly theta at x = 1.
    AFFINE_JUMP = "paper"
    # 1 + theta*(x - 1): the tail is shifted to join the last segment
    # continuously.
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class SsfParams:
    """Parameters of the sinusoidal step activation.

    a: annotator count; fixes the value grid {0, 1/a, ..., 1}.
    theta: slope of the linear tails outside [0, 1]. theta = 0 is allowed
        for analysis, but training needs theta > 0 to keep gradient flow on
        the tails.
    tail_mode: how the upper tail treats the offset at x = 1 (the AFFINE_JUMP
        default leaves a jump of theta there).
    """

    a: int
    theta: float
    tail_mode: TailMode = TailMode.AFFINE_JUMP

    def __post_init__(self) -> None:
        if int(self.a) != self.a or self.a < 1:
            raise ValueError(f"annotator count a must be a positive integer, got {self.a!r}")
        if not math.isfinite(self.theta) or self.theta < 0:
            raise ValueError(f"tail slope theta must be finite and >= 0, got {self.theta!r}")
        if not isinstance(self.tail_mode, TailMode):
            raise ValueError(f"tail_mode must be a TailMode, got {self.tail_mode!r}")


@dataclass(frozen=True)
class SigmoidParams:
    """Widened sigmoid ``sigmoid(x / widening)``; widening defaults to 5."""

    widening: float = 5.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.widening) or self.widening <= 0:
            raise ValueError(f"widening must be finite and > 0, got {self.widening!r}")


@dataclass(frozen=True)
class StepGrid:
    """The ordered soft-label grid {0, 1/a, ..., 1} for ``a`` annotators."""

    a: int

    def __post_init__(self) -> None:
        if int(self.a) != self.a or self.a < 1:
            raise ValueError(f"annotator count a must be a positive integer, got {self.a!r}")

    @property
    def grid(self) -> np.ndarray:
        """The a+1 valid soft-label values, strictly increasing from 0 to 1."""
        return np.arange(self.a + 1, dtype=np.float64) / self.a


ActivationParams = SigmoidParams | SsfParams


def _as_float64(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _match_input(out: np.ndarray, x) -> float | np.ndarray:
    return float(out) if np.ndim(x) == 0 else out


def ssf_value(params: SsfParams, x) -> float | np.ndarray:
    """Evaluate the sinusoidal step activation.

    Piecewise: theta*x for x < 0; on each segment n/a <= x < (n+1)/a the
    sinusoidal arc (sin(pi*(2*a*x - (2n+1))/2) + 2n + 1) / (2a); for x >= 1
    the linear tail selected by ``tail_mode``. Segments are half-open, so
    each grid point belongs to the segment on its right.
    """
    arr = _as_float64(x)
    a, theta = params.a, params.theta
    n = np.clip(np.floor(a * arr), 0.0, a - 1.0)
    phase = np.pi * (2.0 * a * arr - (2.0 * n + 1.0)) / 2.0
    segment = (np.sin(phase) + 2.0 * n + 1.0) / (2.0 * a)
    if params.tail_mode is TailMode.AFFINE_JUMP:
        upper = 1.0 + theta * arr
    else:
        upper = 1.0 + theta * (arr - 1.0)
    out = np.where(arr < 0.0, theta * arr, np.where(arr >= 1.0, upper, segment))
    return _match_input(out, x)


def ssf_derivative(params: SsfParams, x) -> float | np.ndarray:
    """Derivative of :func:`ssf_value`.

    theta on both linear tails, and (pi/2) * cos(pi*(2*a*x - (2n+1))/2) on
    segment n. Branch selection matches the half-open intervals of the value
    function: x = 0 takes the first arc (derivative 0) and x = 1 takes the
    tail (derivative theta).
    """
    arr = _as_float64(x)
    a, theta = params.a, params.theta
    n = np.clip(np.floor(a * arr), 0.0, a - 1.0)
    phase = np.pi * (2.0 * a * arr - (2.0 * n + 1.0)) / 2.0
    segment = HALF_PI * np.cos(phase)
    out = np.where((arr < 0.0) | (arr >= 1.0), theta, segment)
    return _match_input(out, x)


def widened_sigmoid_value(params: SigmoidParams, x) -> float | np.ndarray:
    """Evaluate ``sigmoid(x / widening)`` with the sign-split stable form."""
    arr = _as_float64(x)
    z = arr / params.widening
    positive = z >= 0.0
    # exp is only ever taken of a non-positive argument, so it cannot overflow.
    e = np.exp(np.where(positive, -z, z))
    out = np.where(positive, 1.0 / (1.0 + e), e / (1.0 + e))
    return _match_input(out, x)


def widened_sigmoid_derivative(params: SigmoidParams, x) -> float | np.ndarray:
    """Derivative s*(1 - s)/widening with s = widened_sigmoid_value(x)."""
    arr = _as_float64(x)
    s = widened_sigmoid_value(params, arr)
    out = s * (1.0 - s) / params.widening
    return _match_input(out, x)


def step_quantize(grid: StepGrid, y) -> float | np.ndarray:
    """Snap y to the nearest grid value.

    Inputs below 0 map to 0 and above 1 to 1; an exact tie between two
    adjacent grid values resolves to the larger one. Nearness is decided on
    the actual float64 grid values (scaling shortcuts like round(y*a) pick
    the wrong neighbour when y*a rounds onto .5 but the true distances
    differ, e.g. a=5, y=0.3).
    """
    arr = _as_float64(y, "y")
    points = grid.grid
    index = np.searchsorted(points, arr, side="left")
    lower = np.clip(index - 1, 0, grid.a)
    upper = np.clip(index, 0, grid.a)
    take_upper = np.abs(points[upper] - arr) <= np.abs(points[lower] - arr)
    out = np.where(take_upper, points[upper], points[lower])
    return _match_input(out, y)


def relu_value(x) -> float | np.ndarray:
    arr = _as_float64(x)
    return _match_input(np.maximum(arr, 0.0), x)


def relu_derivative(x) -> float | np.ndarray:
    """1 for x > 0, else 0; the subgradient at x = 0 is fixed to 0."""
    arr = _as_float64(x)
    return _match_input(np.where(arr > 0.0, 1.0, 0.0), x)


def activation_value(params: ActivationParams, x) -> float | np.ndarray:
    """Dispatch to the output activation selected by ``params``."""
    if isinstance(params, SigmoidParams):
        return widened_sigmoid_value(params, x)
    if isinstance(params, SsfParams):
        return ssf_value(params, x)
    raise TypeError(f"unsupported activation parameters: {params!r}")


def activation_derivative(params: ActivationParams, x) -> float | np.ndarray:
    """Derivative counterpart of :func:`activation_value`."""
    if isinstance(params, SigmoidParams):
        return widened_sigmoid_derivative(params, x)
    if isinstance(params, SsfParams):
        return ssf_derivative(params, x)
    raise TypeError(f"unsupported activation parameters: {params!r}")
