"""Tests for the AdaBound optimizer."""

import numpy as np
import pytest

from tskprune.core.errors import InputShapeError, ParameterDomainError
from tskprune.core.optimizer import AdaBoundState, adabound_bounds, adabound_step


class TestBounds:
    """Tests for the learning-rate band."""

    def test_first_step(self) -> None:
        """Test the band at step 1."""
        lower, upper = adabound_bounds(1)
        assert lower == pytest.approx(0.01 - 0.01 / 1.001)
        assert lower == pytest.approx(9.99e-6, rel=1e-3)
        assert upper == pytest.approx(10.01)

    def test_converges_to_final_rate(self) -> None:
        """Test that both bounds approach 0.01 from either side."""
        lower, upper = adabound_bounds(10**9)
        assert lower < 0.01 < upper
        assert lower == pytest.approx(0.01, rel=1e-5)
        assert upper == pytest.approx(0.01, rel=1e-5)

    def test_band_shrinks(self) -> None:
        """Test that the lower bound rises and the upper bound falls."""
        bands = [adabound_bounds(k) for k in (1, 10, 100, 1000)]
        assert all(a[0] < b[0] and a[1] > b[1] for a, b in zip(bands, bands[1:]))

    def test_unbounded_before_first_step(self) -> None:
        """Test that step 0 has no upper bound."""
        assert adabound_bounds(0) == (0.0, np.inf)

    def test_negative_step(self) -> None:
        """Test that negative steps are rejected."""
        with pytest.raises(ParameterDomainError):
            adabound_bounds(-1)


class TestStep:
    """Tests for adabound_step."""

    def test_unit_gradient_first_step(self) -> None:
        """Test k=1, g=1, lr=0.01: theta drops by about 0.01."""
        theta, state = adabound_step(
            np.array([1.0]), np.array([1.0]), AdaBoundState.zeros(1), lr=0.01
        )
        assert state.step == 1
        assert theta[0] == pytest.approx(0.99, abs=1e-7)
        assert state.rates is not None
        assert state.rates[0] == pytest.approx(0.01, rel=1e-6)

    def test_zero_gradient_does_not_move(self) -> None:
        """Test that a zero gradient at k=1 hits the upper bound yet moves nothing."""
        theta, state = adabound_step(
            np.array([0.5, -2.0]), np.zeros(2), AdaBoundState.zeros(2), lr=0.01
        )
        np.testing.assert_array_equal(theta, [0.5, -2.0])
        assert state.rates is not None
        np.testing.assert_allclose(state.rates, adabound_bounds(1)[1])

    def test_rates_stay_in_band(self, rng: np.random.Generator) -> None:
        """Test that every rate lies in the band of its step."""
        theta = rng.normal(size=20)
        state = AdaBoundState.zeros(20)
        for _ in range(300):
            grad = rng.normal(scale=10.0 ** rng.integers(-6, 3), size=20)
            theta, state = adabound_step(theta, grad, state, lr=0.01)
            lower, upper = adabound_bounds(state.step)
            assert state.rates is not None
            assert np.all((state.rates >= lower) & (state.rates <= upper))

    def test_second_moment_nonnegative(self, rng: np.random.Generator) -> None:
        """Test that v stays nonnegative."""
        state = AdaBoundState.zeros(5)
        theta = np.zeros(5)
        for _ in range(10):
            theta, state = adabound_step(theta, rng.normal(size=5), state, lr=0.1)
        assert np.all(state.v >= 0.0)

    def test_state_is_not_mutated(self) -> None:
        """Test that a step returns a new state."""
        state = AdaBoundState.zeros(1)
        adabound_step(np.zeros(1), np.ones(1), state, lr=0.01)
        assert state.step == 0
        np.testing.assert_array_equal(state.m, 0.0)

    def test_shape_mismatch(self) -> None:
        """Test that gradient and parameters must match."""
        with pytest.raises(InputShapeError):
            adabound_step(np.zeros(2), np.zeros(3), AdaBoundState.zeros(2), lr=0.01)

    def test_learning_rate_positive(self) -> None:
        """Test that lr must be positive."""
        with pytest.raises(ParameterDomainError):
            adabound_step(np.zeros(1), np.zeros(1), AdaBoundState.zeros(1), lr=0.0)
