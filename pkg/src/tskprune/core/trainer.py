"""MBGD-RDA: mini-batch gradient descent with regularization, DropRule and AdaBound.

Works for both Gaussian and trapezoidal rulebases. One epoch draws one
mini-batch and performs exactly one optimizer step.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..models import EpochLog, MembershipKind, TrainConfig
from .errors import InputShapeError, InsufficientDataError, ParameterDomainError
from .fuzzy import (
    FIRING_EPSILON,
    SIGMA_MIN,
    TRAPEZOID_SEPARATION,
    TskModel,
    normalize_firing,
    predict,
    rmse,
)
from .initializer import init_model
from .optimizer import AdaBoundState, adabound_step

logger = logging.getLogger(__name__)

TrainCallback = Callable[[int, TskModel, AdaBoundState], None]


@dataclass(frozen=True)
class GradientVector:
    """dL/dtheta split into the model's antecedent and consequent blocks."""

    antecedents: np.ndarray
    consequents: np.ndarray

    def flatten(self) -> np.ndarray:
        """Same layout as TskModel.parameters()."""
        return np.concatenate([self.antecedents.ravel(), self.consequents.ravel()])


class TrainResult(NamedTuple):
    """Trained model and its per-epoch log."""

    model: TskModel
    history: list[EpochLog]


@dataclass
class _ForwardPass:
    data: np.ndarray
    grades: np.ndarray  # (B, R, M)
    firing: np.ndarray  # (B, R), DropRule applied
    normalized: np.ndarray  # (B, R)
    residual: np.ndarray  # (B,), y(x_n) - y_n, zero where every rule was dropped
    sensitivity: np.ndarray  # (B, R), dL/df_r per sample


def _batch(model: TskModel, X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    data = model.as_matrix(X)
    targets = np.asarray(y, dtype=float).ravel()
    if data.shape[0] == 0:
        raise InputShapeError("Batch must contain at least one sample")
    if targets.shape[0] != data.shape[0]:
        raise InputShapeError(f"Got {data.shape[0]} samples but {targets.shape[0]} targets")
    return data, targets


def _forward(
    model: TskModel, X: np.ndarray, y: np.ndarray, masks: Optional[np.ndarray]
) -> _ForwardPass:
    data, targets = _batch(model, X, y)
    if masks is None:
        keep = np.ones((data.shape[0], model.num_rules), dtype=bool)
    else:
        keep = np.asarray(masks, dtype=bool)
        if keep.shape != (data.shape[0], model.num_rules):
            raise InputShapeError(
                f"DropRule masks must have shape ({data.shape[0]}, {model.num_rules}), "
                f"got {keep.shape}"
            )

    grades = model.grades(data)
    firing = np.maximum(np.prod(grades, axis=2), 0.0) * keep
    totals = firing.sum(axis=1)
    degenerate = totals <= FIRING_EPSILON
    normalized = normalize_firing(firing)
    outputs = model.rule_outputs(data)
    predicted = np.sum(normalized * outputs, axis=1)

    # A sample whose rules were all dropped used no parameter
    residual = np.where(keep.any(axis=1), predicted - targets, 0.0)
    safe_totals = np.where(degenerate, 1.0, totals)
    # dy/df_r = (y_r - y) / sum_k f_k; the uniform fallback does not depend on f
    sensitivity = np.where(
        degenerate[:, None],
        0.0,
        residual[:, None] * (outputs - predicted[:, None]) / safe_totals[:, None],
    )
    return _ForwardPass(data, grades, firing, normalized, residual, sensitivity)


def _consequent_gradients(
    model: TskModel, forward: _ForwardPass, l2_lambda: float
) -> np.ndarray:
    weighted = forward.residual[:, None] * forward.normalized
    grad = np.empty_like(model.consequents)
    grad[:, 0] = weighted.sum(axis=0)
    # Biases are not regularized
    grad[:, 1:] = weighted.T @ forward.data + l2_lambda * model.consequents[:, 1:]
    return grad


def loss(model: TskModel, X: np.ndarray, y: np.ndarray, l2_lambda: float) -> float:
    """Half the sum of squared errors plus the l2 penalty on non-bias weights."""
    data, targets = _batch(model, X, y)
    errors = targets - predict(model, data)
    penalty = 0.5 * l2_lambda * float(np.sum(model.consequents[:, 1:] ** 2))
    return 0.5 * float(np.sum(errors**2)) + penalty


def droprule_mask(
    num_rules: int,
    rate: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    """Boolean keep-mask; each entry is True with probability ``rate``.

    With ``size`` given, one independent row is drawn per sample.
    """
    if not 0.0 < rate <= 1.0:
        raise ParameterDomainError(f"DropRule rate must be in (0, 1], got {rate}")
    shape = (num_rules,) if size is None else (size, num_rules)
    return rng.random(shape) <= rate


def gaussian_gradients(
    model: TskModel,
    X: np.ndarray,
    y: np.ndarray,
    masks: Optional[np.ndarray],
    l2_lambda: float,
) -> GradientVector:
    """Batch gradient of the loss for a Gaussian rulebase."""
    if model.mf_type != MembershipKind.GAUSSIAN:
        raise ParameterDomainError("gaussian_gradients needs a Gaussian model")
    forward = _forward(model, X, y, masks)

    centers = model.antecedents[..., 0][None]
    spreads = model.antecedents[..., 1][None]
    diff = forward.data[:, None, :] - centers
    scale = (forward.sensitivity * forward.firing)[:, :, None]

    antecedents = np.empty_like(model.antecedents)
    antecedents[..., 0] = np.sum(scale * diff / spreads**2, axis=0)
    antecedents[..., 1] = np.sum(scale * diff**2 / spreads**3, axis=0)
    return GradientVector(antecedents, _consequent_gradients(model, forward, l2_lambda))


def trapezoid_gradients(
    model: TskModel,
    X: np.ndarray,
    y: np.ndarray,
    masks: Optional[np.ndarray],
    l2_lambda: float,
) -> GradientVector:
    """Batch gradient of the loss for a trapezoidal rulebase.

    Shape parameters only receive contributions from samples on the matching
    slope; plateau samples and samples outside the support contribute zero.
    """
    if model.mf_type != MembershipKind.TRAPEZOID:
        raise ParameterDomainError("trapezoid_gradients needs a trapezoidal model")
    forward = _forward(model, X, y, masks)

    a, b, c, d = (model.antecedents[..., k][None] for k in range(4))
    x = forward.data[:, None, :]
    grades = forward.grades
    firing = forward.firing[:, :, None]
    sensitivity = forward.sensitivity[:, :, None]

    rising = (x > a) & (x < b)
    falling = (x > c) & (x < d)
    usable = grades > FIRING_EPSILON
    # f_r / mu_{r,m}: product of the rule's other grades
    others = np.divide(
        np.broadcast_to(firing, grades.shape), grades, out=np.zeros_like(grades), where=usable
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        d_a = np.where(rising & usable, others * (x - b) / (b - a) ** 2, 0.0)
        d_b = np.where(rising, -firing / (b - a), 0.0)
        d_c = np.where(falling, firing / (d - c), 0.0)
        d_d = np.where(falling & usable, others * (x - c) / (d - c) ** 2, 0.0)

    antecedents = np.stack(
        [np.sum(sensitivity * term, axis=0) for term in (d_a, d_b, d_c, d_d)], axis=2
    )
    return GradientVector(antecedents, _consequent_gradients(model, forward, l2_lambda))


def compute_gradients(
    model: TskModel,
    X: np.ndarray,
    y: np.ndarray,
    masks: Optional[np.ndarray],
    l2_lambda: float,
) -> GradientVector:
    """Dispatch to the gradient routine of the model's MF family."""
    if model.mf_type == MembershipKind.GAUSSIAN:
        return gaussian_gradients(model, X, y, masks, l2_lambda)
    return trapezoid_gradients(model, X, y, masks, l2_lambda)


def _separation(values: np.ndarray) -> np.ndarray:
    return np.maximum(TRAPEZOID_SEPARATION, 2.0 * np.abs(np.spacing(values)))


def enforce_trapezoid_order(model: TskModel) -> TskModel:
    """Sort each MF's (a, b, c, d) and pull apart tied feet and shoulders.

    After sorting, a tie a == b moves b up by TRAPEZOID_SEPARATION and a tie
    c == d moves c down by the same amount, so a < b <= c < d holds again.
    Far from zero the gap widens to a couple of float spacings.
    """
    if model.mf_type != MembershipKind.TRAPEZOID:
        raise ParameterDomainError("enforce_trapezoid_order needs a trapezoidal model")
    params = np.sort(model.antecedents, axis=2)
    a, b, c, d = (params[..., k].copy() for k in range(4))

    b = np.where(b <= a, a + _separation(a), b)
    c = np.where(d <= c, d - _separation(d), c)
    # Both repairs can cross the shoulders when all four values coincide
    squeezed = c < b
    middle = 0.5 * (b + c)
    b = np.where(squeezed, middle, b)
    c = np.where(squeezed, middle, c)
    a = np.where(squeezed, np.minimum(a, b - _separation(b)), a)
    d = np.where(squeezed, np.maximum(d, c + _separation(c)), d)

    return TskModel(model.mf_type, np.stack([a, b, c, d], axis=2), model.consequents)


def clamp_gaussian_spreads(model: TskModel) -> TskModel:
    """Keep every Gaussian spread at or above SIGMA_MIN."""
    if model.mf_type != MembershipKind.GAUSSIAN:
        raise ParameterDomainError("clamp_gaussian_spreads needs a Gaussian model")
    antecedents = model.antecedents.copy()
    antecedents[..., 1] = np.maximum(antecedents[..., 1], SIGMA_MIN)
    return TskModel(model.mf_type, antecedents, model.consequents)


def _repair(model: TskModel) -> TskModel:
    if model.mf_type == MembershipKind.GAUSSIAN:
        return clamp_gaussian_spreads(model)
    return enforce_trapezoid_order(model)


def _evaluate(model: TskModel, X: Optional[np.ndarray], y: Optional[np.ndarray]) -> float:
    if X is None or y is None or len(y) == 0:
        return float("nan")
    return rmse(predict(model, model.as_matrix(X)), y)


def train(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: Optional[np.ndarray],
    y_test: Optional[np.ndarray],
    config: TrainConfig,
    initial: Optional[TskModel] = None,
    rng: Optional[np.random.Generator] = None,
    callback: Optional[TrainCallback] = None,
) -> TrainResult:
    """Optimize a TSK rulebase with MBGD-RDA.

    Without ``initial`` the rulebase is seeded by clustering (fuzzy c-means for
    Gaussian MFs, k-means for trapezoids) using ``config.seed``. Batches and
    DropRule masks come from ``rng``, which defaults to a generator seeded
    with ``config.seed``. The AdaBound state always starts fresh.
    """
    data = np.asarray(X_train, dtype=float)
    targets = np.asarray(y_train, dtype=float).ravel()
    if data.ndim != 2 or data.shape[0] == 0:
        raise InsufficientDataError("Training set is empty")
    if targets.shape[0] != data.shape[0]:
        raise InputShapeError(f"Got {data.shape[0]} training rows but {targets.shape[0]} targets")

    if initial is None:
        model = init_model(config.mf_type, data, targets, config.num_rules, config.seed)
    else:
        if initial.mf_type != config.mf_type:
            raise ParameterDomainError(
                f"Initial model is {initial.mf_type.value} but config asks for "
                f"{config.mf_type.value}"
            )
        model = initial
    if model.num_features != data.shape[1]:
        raise InputShapeError(
            f"Model has {model.num_features} features but the data has {data.shape[1]}"
        )

    if rng is None:
        rng = np.random.default_rng(config.seed)
    num_samples = data.shape[0]
    with_replacement = config.batch_size > num_samples
    if with_replacement and config.epochs:
        logger.warning(
            "Batch size %d exceeds %d training samples; sampling with replacement",
            config.batch_size,
            num_samples,
        )

    state = AdaBoundState.zeros(model.num_parameters)
    history: list[EpochLog] = []
    for epoch in range(1, config.epochs + 1):
        rows = rng.choice(num_samples, size=config.batch_size, replace=with_replacement)
        batch_X, batch_y = data[rows], targets[rows]
        masks = droprule_mask(model.num_rules, config.droprule_rate, rng, size=config.batch_size)

        batch_loss = loss(model, batch_X, batch_y, config.l2_lambda)
        grad = compute_gradients(model, batch_X, batch_y, masks, config.l2_lambda)
        theta, state = adabound_step(model.parameters(), grad.flatten(), state, config.lr)
        model = _repair(model.with_parameters(theta, check=False))

        test_rmse = _evaluate(model, X_test, y_test)
        history.append(EpochLog(epoch=epoch, train_batch_loss=batch_loss, test_rmse=test_rmse))
        logger.debug(
            "epoch %d/%d: batch loss %.6g, test RMSE %.6g",
            epoch,
            config.epochs,
            batch_loss,
            test_rmse,
        )
        if callback is not None:
            callback(epoch, model, state)

    return TrainResult(model=model, history=history)
