"""Tests for MBGD-RDA training."""

import logging

import numpy as np
import pytest

from tskprune.core.errors import InsufficientDataError, ParameterDomainError
from tskprune.core.fuzzy import TRAPEZOID_SEPARATION, TskModel, predict, rmse
from tskprune.core.initializer import init_model
from tskprune.core.optimizer import AdaBoundState, adabound_bounds
from tskprune.core.trainer import (
    clamp_gaussian_spreads,
    compute_gradients,
    droprule_mask,
    enforce_trapezoid_order,
    gaussian_gradients,
    loss,
    train,
    trapezoid_gradients,
)
from tskprune.models import MembershipKind, TrainConfig

STEP = 1e-6


def _numeric_gradient(
    model: TskModel, X: np.ndarray, y: np.ndarray, l2_lambda: float
) -> np.ndarray:
    theta = model.parameters()
    grad = np.empty_like(theta)
    for k in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[k] += STEP
        down[k] -= STEP
        grad[k] = (
            loss(model.with_parameters(up, check=False), X, y, l2_lambda)
            - loss(model.with_parameters(down, check=False), X, y, l2_lambda)
        ) / (2 * STEP)
    return grad


def _random_gaussian(gen: np.random.Generator, num_rules: int, num_features: int) -> TskModel:
    antecedents = np.stack(
        [
            gen.uniform(-1.0, 1.0, size=(num_rules, num_features)),
            gen.uniform(0.5, 2.0, size=(num_rules, num_features)),
        ],
        axis=2,
    )
    consequents = gen.normal(scale=0.5, size=(num_rules, num_features + 1))
    return TskModel(MembershipKind.GAUSSIAN, antecedents, consequents)


def _random_trapezoid(gen: np.random.Generator, num_rules: int, num_features: int) -> TskModel:
    center = gen.uniform(-0.5, 0.5, size=(num_rules, num_features))
    inner = gen.uniform(0.2, 0.6, size=(num_rules, num_features))
    outer = inner + gen.uniform(0.8, 1.5, size=(num_rules, num_features))
    antecedents = np.stack(
        [center - outer, center - inner, center + inner, center + outer], axis=2
    )
    consequents = gen.normal(scale=0.5, size=(num_rules, num_features + 1))
    return TskModel(MembershipKind.TRAPEZOID, antecedents, consequents)


def _away_from_kinks(
    gen: np.random.Generator, model: TskModel, size: int, margin: float = 1e-4
) -> np.ndarray:
    kinks = model.antecedents.transpose(1, 0, 2).reshape(model.num_features, -1)
    X = np.empty((size, model.num_features))
    for m in range(model.num_features):
        filled = 0
        while filled < size:
            value = gen.uniform(-1.5, 1.5)
            if np.min(np.abs(kinks[m] - value)) > margin:
                X[filled, m] = value
                filled += 1
    return X


class TestLoss:
    """Tests for the regularized loss."""

    def test_perfect_fit(self) -> None:
        """Test that an exact fit with no penalty costs nothing."""
        model = TskModel(MembershipKind.GAUSSIAN, [[[0.0, 1.0]]], [[1.0, 2.0]])
        X = np.array([[0.0], [1.0]])
        assert loss(model, X, np.array([1.0, 3.0]), 0.0) == 0.0

    def test_half_sum_of_squares(self) -> None:
        """Test residuals (1, 1) with no penalty."""
        model = TskModel(MembershipKind.GAUSSIAN, [[[0.0, 1.0]]], [[0.0, 0.0]])
        assert loss(model, np.zeros((2, 1)), np.array([1.0, -1.0]), 0.0) == pytest.approx(1.0)

    def test_bias_not_penalized(self) -> None:
        """Test lambda=2 with weight 3 and bias 7 at zero residual."""
        model = TskModel(MembershipKind.GAUSSIAN, [[[0.0, 1.0]]], [[7.0, 3.0]])
        assert loss(model, np.zeros((1, 1)), np.array([7.0]), 2.0) == pytest.approx(9.0)


class TestDropRule:
    """Tests for droprule_mask."""

    def test_keep_everything(self, rng: np.random.Generator) -> None:
        """Test that P=1 never drops a rule."""
        assert droprule_mask(50, 1.0, rng).all()

    def test_kept_fraction(self, rng: np.random.Generator) -> None:
        """Test that P=0.5 keeps about half the rules."""
        mask = droprule_mask(100_000, 0.5, rng)
        assert mask.mean() == pytest.approx(0.5, abs=0.01)

    def test_one_row_per_sample(self, rng: np.random.Generator) -> None:
        """Test that masks are drawn independently per sample."""
        masks = droprule_mask(8, 0.5, rng, size=64)
        assert masks.shape == (64, 8)
        assert len({row.tobytes() for row in masks}) > 1

    @pytest.mark.parametrize("rate", [0.0, -0.1, 1.5])
    def test_rate_domain(self, rate: float, rng: np.random.Generator) -> None:
        """Test that the keep probability must lie in (0, 1]."""
        with pytest.raises(ParameterDomainError):
            droprule_mask(3, rate, rng)


class TestGaussianGradients:
    """Tests for gaussian_gradients."""

    def test_matches_finite_differences(self, rng: np.random.Generator) -> None:
        """Test every coordinate against central differences on random models."""
        for trial in range(100):
            model = _random_gaussian(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            batch = int(rng.integers(1, 9))
            X = rng.uniform(-1.0, 1.0, size=(batch, model.num_features))
            y = rng.normal(size=batch)
            l2_lambda = (0.0, 0.05)[trial % 2]

            analytic = gaussian_gradients(model, X, y, None, l2_lambda).flatten()
            numeric = _numeric_gradient(model, X, y, l2_lambda)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)

    def test_single_rule_antecedents_have_no_gradient(self, rng: np.random.Generator) -> None:
        """Test that with one rule the output ignores its MF parameters."""
        model = _random_gaussian(rng, 1, 3)
        X, y = rng.normal(size=(6, 3)), rng.normal(size=6)
        grad = gaussian_gradients(model, X, y, None, 0.0)

        np.testing.assert_allclose(grad.antecedents, 0.0, atol=1e-12)
        residual = predict(model, X) - y
        np.testing.assert_allclose(grad.consequents[0, 1:], residual @ X)
        assert grad.consequents[0, 0] == pytest.approx(residual.sum())

    def test_dropped_rule_gets_no_gradient(self, rng: np.random.Generator) -> None:
        """Test that a rule masked out for every sample is left alone."""
        model = _random_gaussian(rng, 3, 2)
        X, y = rng.normal(size=(5, 2)), rng.normal(size=5)
        masks = np.ones((5, 3), dtype=bool)
        masks[:, 1] = False
        grad = gaussian_gradients(model, X, y, masks, 0.0)

        np.testing.assert_array_equal(grad.antecedents[1], 0.0)
        np.testing.assert_array_equal(grad.consequents[1], 0.0)
        assert np.any(grad.consequents[0] != 0.0)

    def test_all_rules_dropped(self, gaussian_model: TskModel) -> None:
        """Test that a sample with every rule dropped contributes nothing."""
        X = np.array([[0.1, 0.2]])
        masks = np.zeros((1, 2), dtype=bool)
        grad = gaussian_gradients(gaussian_model, X, np.array([5.0]), masks, 0.0)
        np.testing.assert_array_equal(grad.flatten(), 0.0)

    def test_fully_dropped_sample_in_batch(self, gaussian_model: TskModel) -> None:
        """Test that a fully dropped sample leaves the rest of the batch's gradient alone."""
        X = np.array([[0.1, 0.2], [-0.3, 0.5]])
        y = np.array([5.0, 1.0])
        masks = np.array([[False, False], [True, True]])
        batch = gaussian_gradients(gaussian_model, X, y, masks, 0.0)
        alone = gaussian_gradients(gaussian_model, X[1:], y[1:], None, 0.0)
        np.testing.assert_allclose(batch.flatten(), alone.flatten(), rtol=1e-12, atol=0)

    def test_wrong_family(self, trapezoid_model: TskModel) -> None:
        """Test that a trapezoidal model is rejected."""
        with pytest.raises(ParameterDomainError):
            gaussian_gradients(trapezoid_model, np.zeros((1, 2)), np.zeros(1), None, 0.0)


class TestTrapezoidGradients:
    """Tests for trapezoid_gradients."""

    def test_matches_finite_differences(self, rng: np.random.Generator) -> None:
        """Test every coordinate against central differences away from kinks."""
        for trial in range(100):
            model = _random_trapezoid(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            batch = int(rng.integers(1, 9))
            X = _away_from_kinks(rng, model, batch)
            y = rng.normal(size=batch)
            l2_lambda = (0.0, 0.05)[trial % 2]

            analytic = trapezoid_gradients(model, X, y, None, l2_lambda).flatten()
            numeric = _numeric_gradient(model, X, y, l2_lambda)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)

    def test_plateau_sample_leaves_shape_alone(self) -> None:
        """Test that a sample on [b, c] gives no shape gradient for that MF."""
        model = TskModel(
            MembershipKind.TRAPEZOID,
            [[[-2.0, -1.0, 1.0, 2.0]], [[0.0, 1.5, 2.0, 3.0]]],
            [[0.0, 1.0], [1.0, 1.0]],
        )
        grad = trapezoid_gradients(model, np.array([[0.5]]), np.array([3.0]), None, 0.0)
        np.testing.assert_array_equal(grad.antecedents[0, 0], 0.0)
        assert np.any(grad.antecedents[1, 0] != 0.0)

    def test_outside_support(self) -> None:
        """Test that a sample outside (a, d) gives no gradient for that MF."""
        model = TskModel(
            MembershipKind.TRAPEZOID,
            [[[-2.0, -1.0, 1.0, 2.0]], [[2.0, 3.0, 4.0, 6.0]]],
            [[0.0, 1.0], [1.0, -1.0]],
        )
        grad = trapezoid_gradients(model, np.array([[5.0]]), np.array([0.0]), None, 0.0)
        np.testing.assert_array_equal(grad.antecedents[0, 0], 0.0)
        np.testing.assert_array_equal(grad.consequents[0], 0.0)

    def test_dispatch(self, trapezoid_model: TskModel, rng: np.random.Generator) -> None:
        """Test that compute_gradients picks the trapezoid routine."""
        X, y = rng.uniform(-1.0, 1.0, size=(4, 2)), rng.normal(size=4)
        np.testing.assert_array_equal(
            compute_gradients(trapezoid_model, X, y, None, 0.05).flatten(),
            trapezoid_gradients(trapezoid_model, X, y, None, 0.05).flatten(),
        )


class TestRepairs:
    """Tests for parameter repairs after an update."""

    @pytest.mark.parametrize(
        ("raw", "expected"),
        [
            ((0.0, 1.0, 2.0, 3.0), (0.0, 1.0, 2.0, 3.0)),
            ((1.0, 0.0, 2.0, 3.0), (0.0, 1.0, 2.0, 3.0)),
            ((0.0, 0.0, 2.0, 3.0), (0.0, TRAPEZOID_SEPARATION, 2.0, 3.0)),
            ((0.0, 1.0, 3.0, 3.0), (0.0, 1.0, 3.0 - TRAPEZOID_SEPARATION, 3.0)),
        ],
    )
    def test_enforce_order(self, raw: tuple[float, ...], expected: tuple[float, ...]) -> None:
        """Test sorting and tie repair."""
        model = TskModel(MembershipKind.TRAPEZOID, [[list(raw)]], [[0.0, 0.0]], check=False)
        repaired = enforce_trapezoid_order(model)
        np.testing.assert_allclose(repaired.antecedents[0, 0], expected, rtol=0, atol=1e-15)

    def test_all_equal_values(self) -> None:
        """Test that four coincident values still become a valid trapezoid."""
        model = TskModel(MembershipKind.TRAPEZOID, [[[1.0] * 4]], [[0.0, 0.0]], check=False)
        a, b, c, d = enforce_trapezoid_order(model).antecedents[0, 0]
        assert a < b <= c < d

    @pytest.mark.parametrize("scale", [1e10, 1e12, -1e15])
    def test_ties_far_from_zero(self, scale: float) -> None:
        """Test that ties are still separated where 1e-6 is below float resolution."""
        raw = [[[scale, scale, 2 * scale, 3 * scale], [scale] * 4]]
        model = TskModel(MembershipKind.TRAPEZOID, raw, [[0.0, 0.0, 0.0]], check=False)
        repaired = enforce_trapezoid_order(model)
        for a, b, c, d in repaired.antecedents[0]:
            assert a < b <= c < d

    def test_clamp_spreads(self) -> None:
        """Test that spreads below the floor are raised to it."""
        model = TskModel(
            MembershipKind.GAUSSIAN, [[[0.0, -0.3], [1.0, 2.0]]], [[0.0, 0.0, 0.0]], check=False
        )
        clamped = clamp_gaussian_spreads(model)
        assert clamped.antecedents[0, 0, 1] == pytest.approx(1e-3)
        assert clamped.antecedents[0, 1, 1] == 2.0


class TestTrain:
    """Tests for the training loop."""

    def test_zero_epochs_returns_initial(self, gaussian_model: TskModel) -> None:
        """Test that K=0 changes nothing."""
        X = np.zeros((4, 2))
        config = TrainConfig(num_rules=2, epochs=0)
        result = train(X, np.zeros(4), None, None, config, gaussian_model)
        assert result.model is gaussian_model
        assert result.history == []

    def test_linear_recovery(self, linear_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test that y = 2 x1 - x2 is learned to test RMSE below 0.05."""
        X, y = linear_data
        config = TrainConfig(num_rules=2, epochs=500, droprule_rate=1.0, l2_lambda=0.0)
        result = train(X[:350], y[:350], X[350:], y[350:], config)

        assert len(result.history) == 500
        assert result.history[-1].test_rmse < 0.05
        assert result.history[-1].test_rmse == pytest.approx(
            rmse(predict(result.model, X[350:]), y[350:])
        )

    def test_descent(self, linear_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test that 200 epochs lower the full training loss."""
        X, y = linear_data
        config = TrainConfig(num_rules=3, epochs=200, droprule_rate=1.0, l2_lambda=0.0)
        initial = init_model(config.mf_type, X, y, config.num_rules, config.seed)
        result = train(X, y, None, None, config, initial)
        assert loss(result.model, X, y, 0.0) < loss(initial, X, y, 0.0)

    @pytest.mark.parametrize("kind", list(MembershipKind))
    def test_deterministic(
        self, kind: MembershipKind, linear_data: tuple[np.ndarray, np.ndarray]
    ) -> None:
        """Test that equal seeds give bit-identical parameters."""
        X, y = linear_data
        config = TrainConfig(num_rules=4, epochs=30, seed=11, mf_type=kind)
        first = train(X, y, None, None, config)
        second = train(X, y, None, None, config)
        np.testing.assert_array_equal(first.model.parameters(), second.model.parameters())

    def test_rates_and_order_every_epoch(
        self, linear_data: tuple[np.ndarray, np.ndarray]
    ) -> None:
        """Test AdaBound bounds and trapezoid order after each of 500 epochs."""
        X, y = linear_data
        epochs_seen: list[int] = []

        def check(epoch: int, model: TskModel, state: AdaBoundState) -> None:
            epochs_seen.append(epoch)
            assert state.step == epoch
            lower, upper = adabound_bounds(state.step)
            assert state.rates is not None
            assert np.all((state.rates >= lower) & (state.rates <= upper))
            a, b, c, d = (model.antecedents[..., k] for k in range(4))
            assert np.all((a < b) & (b <= c) & (c < d))

        config = TrainConfig(num_rules=5, epochs=500, mf_type=MembershipKind.TRAPEZOID)
        train(X, y, X, y, config, callback=check)
        assert epochs_seen == list(range(1, 501))

    def test_gaussian_spreads_stay_positive(
        self, linear_data: tuple[np.ndarray, np.ndarray]
    ) -> None:
        """Test that spreads never fall below the floor."""
        X, y = linear_data
        spreads: list[float] = []
        config = TrainConfig(num_rules=6, epochs=100, lr=0.5)

        def record(epoch: int, model: TskModel, state: AdaBoundState) -> None:
            spreads.append(float(model.antecedents[..., 1].min()))

        train(X, y, None, None, config, callback=record)
        assert min(spreads) >= 1e-3

    def test_no_test_set_logs_nan(self, linear_data: tuple[np.ndarray, np.ndarray]) -> None:
        """Test that the test RMSE column is NaN without a test split."""
        X, y = linear_data
        result = train(X, y, None, None, TrainConfig(num_rules=2, epochs=3))
        assert all(np.isnan(log.test_rmse) for log in result.history)

    def test_large_batch_warns(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test that a batch larger than N samples with replacement and warns."""
        X = np.linspace(-1.0, 1.0, 10)[:, None]
        with caplog.at_level(logging.WARNING, logger="tskprune.core.trainer"):
            config = TrainConfig(num_rules=2, epochs=2, batch_size=64)
            result = train(X, X[:, 0], None, None, config)
        assert len(result.history) == 2
        assert "with replacement" in caplog.text

    def test_family_mismatch(self, gaussian_model: TskModel) -> None:
        """Test that the initial model must match the configured family."""
        config = TrainConfig(num_rules=2, epochs=1, mf_type=MembershipKind.TRAPEZOID)
        with pytest.raises(ParameterDomainError):
            train(np.zeros((4, 2)), np.zeros(4), None, None, config, gaussian_model)

    def test_empty_training_set(self) -> None:
        """Test that an empty training set is rejected."""
        with pytest.raises(InsufficientDataError):
            train(np.zeros((0, 2)), np.zeros(0), None, None, TrainConfig(num_rules=1, epochs=1))
