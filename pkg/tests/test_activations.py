import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softstep.activations import (
    SigmoidParams,
    SsfParams,
    StepGrid,
    TailMode,
    activation_derivative,
    activation_value,
    relu_derivative,
    relu_value,
    ssf_derivative,
    ssf_value,
    step_quantize,
    widened_sigmoid_derivative,
    widened_sigmoid_value,
)

# Frozen from an independent 40-digit evaluation of the closed forms.
SSF_A3_AT_QUARTER = 0.2845177968644246  # (sin(pi/4) + 1) / 6
LOGISTIC_AT_ONE = 0.7310585786300049  # 1 / (1 + e^-1)
HALF_PI = 1.5707963267948966


def central_difference(fn, x, h):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def breakpoints(a):
    return np.arange(a + 1) / a


class TestParamValidation:
    @pytest.mark.parametrize("a", [0, -1, 2.5])
    def test_ssf_rejects_bad_annotator_count(self, a):
        with pytest.raises(ValueError):
            SsfParams(a=a, theta=0.05)

    @pytest.mark.parametrize("theta", [-0.1, math.nan, math.inf])
    def test_ssf_rejects_bad_theta(self, theta):
        with pytest.raises(ValueError):
            SsfParams(a=3, theta=theta)

    def test_ssf_allows_zero_theta(self):
        SsfParams(a=3, theta=0.0)

    @pytest.mark.parametrize("widening", [0.0, -5.0, math.nan])
    def test_sigmoid_rejects_bad_widening(self, widening):
        with pytest.raises(ValueError):
            SigmoidParams(widening=widening)

    @pytest.mark.parametrize("a", [0, -2])
    def test_grid_rejects_bad_annotator_count(self, a):
        with pytest.raises(ValueError):
            StepGrid(a=a)

    @pytest.mark.parametrize("a", [1, 2, 3, 7])
    def test_grid_shape(self, a):
        grid = StepGrid(a).grid
        assert len(grid) == a + 1
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert np.all(np.diff(grid) > 0)


class TestSsfValue:
    PARAMS = SsfParams(a=3, theta=0.05)

    def test_grid_point_is_fixed(self):
        assert ssf_value(self.PARAMS, 1 / 3) == 1 / 3

    def test_lower_tail(self):
        assert ssf_value(self.PARAMS, -2.0) == pytest.approx(-0.1, abs=1e-15)

    def test_quarter_matches_high_precision_oracle(self):
        assert ssf_value(self.PARAMS, 0.25) == pytest.approx(SSF_A3_AT_QUARTER, abs=1e-15)

    def test_upper_tail_modes_at_one(self):
        assert ssf_value(self.PARAMS, 1.0) == pytest.approx(1.05, abs=1e-15)
        continuous = SsfParams(a=3, theta=0.05, tail_mode=TailMode.CONTINUOUS)
        assert ssf_value(continuous, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_zero_maps_to_zero(self):
        assert ssf_value(self.PARAMS, 0.0) == 0.0

    @pytest.mark.parametrize("x", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, x):
        with pytest.raises(ValueError):
            ssf_value(self.PARAMS, x)

    def test_array_agrees_with_scalar_path(self, rng):
        xs = rng.uniform(-2, 3, size=50)
        values = ssf_value(self.PARAMS, xs)
        assert values.shape == xs.shape
        for x, value in zip(xs, values):
            assert value == ssf_value(self.PARAMS, float(x))

    @pytest.mark.parametrize("a", range(1, 11))
    @pytest.mark.parametrize("theta", [0.0, 0.05, 0.2])
    def test_grid_and_midpoint_fixed_points(self, a, theta):
        params = SsfParams(a=a, theta=theta)
        for k in range(a + 1):
            x = k / a
            if x >= 1.0 and theta > 0.0:
                continue  # the default tail jumps at 1 unless theta is 0
            assert abs(ssf_value(params, x) - x) < 1e-12
        for n in range(a):
            mid = (2 * n + 1) / (2 * a)
            assert abs(ssf_value(params, mid) - mid) < 1e-12

    @pytest.mark.parametrize("a", [1, 3, 5])
    @pytest.mark.parametrize("theta", [0.0, 0.05])
    def test_continuity_at_breakpoints(self, a, theta):
        h = 1e-10
        jumpy = SsfParams(a=a, theta=theta)
        continuous = SsfParams(a=a, theta=theta, tail_mode=TailMode.CONTINUOUS)
        for x in breakpoints(a):
            gap = abs(ssf_value(jumpy, x + h) - ssf_value(jumpy, x - h))
            if x == 1.0 and theta > 0.0:
                assert abs(gap - theta) < 1e-9
            else:
                assert gap < 1e-9
            gap = abs(ssf_value(continuous, x + h) - ssf_value(continuous, x - h))
            assert gap < 1e-9

    @pytest.mark.parametrize("tail_mode", list(TailMode))
    def test_non_decreasing_with_positive_theta(self, tail_mode):
        params = SsfParams(a=3, theta=0.05, tail_mode=tail_mode)
        values = ssf_value(params, np.linspace(-2.0, 3.0, 100_000))
        assert np.all(np.diff(values) >= 0.0)


class TestSsfDerivative:
    PARAMS = SsfParams(a=3, theta=0.05)

    def test_zero_at_grid_point(self):
        assert abs(ssf_derivative(self.PARAMS, 1 / 3)) < 1e-12
        fd = central_difference(lambda x: ssf_value(self.PARAMS, x), 1 / 3, 1e-7)
        assert abs(fd) < 1e-6

    def test_half_pi_at_segment_midpoint(self):
        assert ssf_derivative(self.PARAMS, 0.5) == pytest.approx(HALF_PI, abs=1e-12)
        fd = central_difference(lambda x: ssf_value(self.PARAMS, x), 0.5, 1e-7)
        assert ssf_derivative(self.PARAMS, 0.5) == pytest.approx(fd, rel=1e-6)

    def test_tail_slopes(self):
        assert ssf_derivative(self.PARAMS, -1.0) == 0.05
        assert ssf_derivative(self.PARAMS, 0.0) == pytest.approx(0.0, abs=1e-12)
        assert ssf_derivative(self.PARAMS, 1.0) == 0.05

    @pytest.mark.parametrize("a", [1, 2, 3, 5, 10])
    def test_range_on_unit_interval(self, a):
        params = SsfParams(a=a, theta=0.05)
        xs = np.linspace(0.0, 1.0, 10_000, endpoint=False)
        derivatives = ssf_derivative(params, xs)
        assert np.all(derivatives >= -1e-12)
        assert np.all(derivatives <= HALF_PI + 1e-12)

    @pytest.mark.parametrize("a", [2, 3, 5])
    def test_vanishes_at_interior_grid_points_from_both_sides(self, a):
        params = SsfParams(a=a, theta=0.05)
        for k in range(1, a):
            x = k / a
            assert abs(ssf_derivative(params, x)) < 1e-12
            assert abs(ssf_derivative(params, x - 1e-9)) < 1e-6
            assert abs(ssf_derivative(params, x + 1e-9)) < 1e-6


class TestGradientConsistency:
    """Analytic derivatives against central finite differences away from kinks."""

    @staticmethod
    def _sample_points(a, count, rng):
        points = []
        kinks = breakpoints(a)
        while len(points) < count:
            x = rng.uniform(-2.0, 3.0)
            if np.min(np.abs(x - kinks)) > 1e-4:
                points.append(x)
        return np.array(points)

    @pytest.mark.parametrize("a,theta", [(1, 0.05), (3, 0.05), (5, 0.2)])
    def test_ssf(self, a, theta, rng):
        params = SsfParams(a=a, theta=theta)
        for x in self._sample_points(a, 1000, rng):
            analytic = ssf_derivative(params, x)
            fd = central_difference(lambda v: ssf_value(params, v), x, 1e-6)
            assert abs(analytic - fd) / max(1.0, abs(analytic)) < 1e-5

    def test_widened_sigmoid(self, rng):
        params = SigmoidParams()
        for x in rng.uniform(-2.0, 3.0, size=1000):
            analytic = widened_sigmoid_derivative(params, x)
            fd = central_difference(lambda v: widened_sigmoid_value(params, v), x, 1e-6)
            assert abs(analytic - fd) / max(1.0, abs(analytic)) < 1e-5


class TestWidenedSigmoid:
    PARAMS = SigmoidParams()

    def test_symmetry_point(self):
        assert widened_sigmoid_value(self.PARAMS, 0.0) == 0.5

    def test_matches_high_precision_oracle(self):
        assert widened_sigmoid_value(self.PARAMS, 5.0) == pytest.approx(LOGISTIC_AT_ONE, abs=1e-15)
        assert widened_sigmoid_value(self.PARAMS, -5.0) == pytest.approx(1.0 - LOGISTIC_AT_ONE, abs=1e-15)

    def test_antisymmetry(self, rng):
        xs = rng.uniform(-50, 50, size=200)
        np.testing.assert_allclose(
            widened_sigmoid_value(self.PARAMS, xs) + widened_sigmoid_value(self.PARAMS, -xs),
            1.0,
            atol=1e-12,
        )

    def test_stable_at_large_magnitudes(self):
        for x in (1e4, -1e4, 3e5):
            value = widened_sigmoid_value(self.PARAMS, x)
            assert math.isfinite(value)
            assert 0.0 <= value <= 1.0

    def test_strictly_inside_unit_interval_on_representable_range(self, rng):
        # float64 saturates to exactly 0/1 only past |x/widening| ~ 36
        xs = rng.uniform(-150, 150, size=5000)
        values = widened_sigmoid_value(self.PARAMS, xs)
        assert np.all(values > 0.0)
        assert np.all(values < 1.0)

    def test_derivative_values(self):
        assert widened_sigmoid_derivative(self.PARAMS, 0.0) == pytest.approx(0.05, abs=1e-15)
        assert widened_sigmoid_derivative(SigmoidParams(widening=1.0), 0.0) == pytest.approx(0.25, abs=1e-15)
        assert widened_sigmoid_derivative(self.PARAMS, 1e4) == pytest.approx(0.0, abs=1e-12)

    def test_widening_flattens_the_curve(self, rng):
        wide, narrow = SigmoidParams(widening=5.0), SigmoidParams(widening=1.0)
        xs = rng.uniform(-30, 30, size=500)
        xs = xs[xs != 0.0]
        wide_offset = np.abs(widened_sigmoid_value(wide, xs) - 0.5)
        narrow_offset = np.abs(widened_sigmoid_value(narrow, xs) - 0.5)
        assert np.all(wide_offset < narrow_offset)


def nearest_grid_bruteforce(grid: np.ndarray, y: float) -> float:
    """Independent quantizer oracle: argmin distance, ties to the larger value."""
    distances = np.abs(grid - y)
    candidates = np.flatnonzero(distances == distances.min())
    return float(grid[candidates.max()])


class TestStepQuantize:
    GRID = StepGrid(3)

    def test_nearest_value(self):
        assert step_quantize(self.GRID, 0.4) == 1 / 3

    def test_midpoint_ties_up(self):
        assert step_quantize(self.GRID, 0.5) == 2 / 3

    def test_clamps_out_of_range(self):
        assert step_quantize(self.GRID, -0.2) == 0.0
        assert step_quantize(self.GRID, 1.7) == 1.0

    def test_grid_point_maps_to_itself(self):
        assert step_quantize(self.GRID, 1 / 3) == 1 / 3

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            step_quantize(self.GRID, math.nan)

    @pytest.mark.parametrize("a", [2, 3, 5, 7])
    def test_matches_bruteforce_oracle(self, a, rng):
        grid = StepGrid(a)
        ys = rng.uniform(-1.0, 2.0, size=10_000)
        quantized = step_quantize(grid, ys)
        for y, q in zip(ys, quantized):
            assert q == nearest_grid_bruteforce(grid.grid, float(y))

    @given(y=st.floats(min_value=-1.0, max_value=2.0, allow_nan=False))
    @settings(max_examples=300, deadline=None)
    def test_idempotent_and_on_grid(self, y):
        grid = StepGrid(4)
        once = step_quantize(grid, y)
        assert once in grid.grid
        assert step_quantize(grid, once) == once

    def test_midpoints_agree_with_oracle(self):
        for a in (2, 3, 5, 8):
            grid = StepGrid(a)
            for k in range(a):
                midpoint = (2 * k + 1) / (2 * a)
                expected = nearest_grid_bruteforce(grid.grid, midpoint)
                assert step_quantize(grid, midpoint) == expected

    def test_exact_float_ties_resolve_upward(self):
        # dyadic grids represent their midpoints exactly, forcing a true tie
        assert step_quantize(StepGrid(2), 0.25) == 0.5
        assert step_quantize(StepGrid(2), 0.75) == 1.0
        assert step_quantize(StepGrid(4), 0.125) == 0.25
        assert step_quantize(StepGrid(8), 0.9375) == 1.0


class TestRelu:
    @pytest.mark.parametrize(
        "x,value,derivative",
        [(-3.0, 0.0, 0.0), (2.0, 2.0, 1.0), (0.0, 0.0, 0.0)],
    )
    def test_values(self, x, value, derivative):
        assert relu_value(x) == value
        assert relu_derivative(x) == derivative

    def test_array(self):
        xs = np.array([-1.0, 0.0, 2.5])
        np.testing.assert_array_equal(relu_value(xs), [0.0, 0.0, 2.5])
        np.testing.assert_array_equal(relu_derivative(xs), [0.0, 0.0, 1.0])


class TestDispatch:
    def test_routes_by_parameter_type(self):
        assert activation_value(SigmoidParams(), 0.0) == 0.5
        assert activation_value(SsfParams(a=3, theta=0.05), 0.0) == 0.0
        assert activation_derivative(SigmoidParams(), 0.0) == pytest.approx(0.05)
        assert activation_derivative(SsfParams(a=3, theta=0.05), -1.0) == 0.05

    def test_rejects_unknown_parameters(self):
        with pytest.raises(TypeError):
            activation_value(object(), 0.0)
