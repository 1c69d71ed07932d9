"""Clustering-based rule initialization."""

import logging

import numpy as np

from ..models import MembershipKind
from .clustering import fuzzy_c_means, k_means
from .errors import InputShapeError
from .fuzzy import SIGMA_MIN, TskModel

logger = logging.getLogger(__name__)

# Long-leg trapezoid recipe, in units of the in-cluster standard deviation
FOOT_WIDTH = 10.0
SHOULDER_WIDTH = 0.5


def _check_targets(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    data = np.asarray(X, dtype=float)
    targets = np.asarray(y, dtype=float).ravel()
    if data.ndim != 2:
        raise InputShapeError(f"Features must be an (N, M) matrix, got shape {data.shape}")
    if targets.shape[0] != data.shape[0]:
        raise InputShapeError(
            f"Got {data.shape[0]} feature rows but {targets.shape[0]} targets"
        )
    return data, targets


def init_gaussian_model(X: np.ndarray, y: np.ndarray, num_rules: int, seed: int) -> TskModel:
    """Seed a Gaussian rulebase from a fuzzy c-means partition.

    Each rule sits on one cluster center; its spreads are the
    membership-weighted standard deviations of the features and its bias is
    the membership-weighted mean target. Linear weights start at zero.
    """
    data, targets = _check_targets(X, y)
    clusters = fuzzy_c_means(data, num_rules, seed)
    u = clusters.memberships
    totals = u.sum(axis=1)

    bias = (u @ targets) / totals
    means = (u @ data) / totals[:, None]
    variances = (u @ data**2) / totals[:, None] - means**2
    spreads = np.maximum(np.sqrt(np.maximum(variances, 0.0)), SIGMA_MIN)

    antecedents = np.stack([clusters.centers, spreads], axis=2)
    consequents = np.zeros((num_rules, data.shape[1] + 1))
    consequents[:, 0] = bias
    logger.info("Initialized %d Gaussian rules with fuzzy c-means", num_rules)
    return TskModel(MembershipKind.GAUSSIAN, antecedents, consequents)


def init_trapezoid_model(X: np.ndarray, y: np.ndarray, num_rules: int, seed: int) -> TskModel:
    """Seed a trapezoidal rulebase from a k-means partition.

    MFs get long legs (feet at 10 sigma, shoulders at 0.5 sigma around the
    cluster center) so every input is covered by some rule at the start.
    """
    data, targets = _check_targets(X, y)
    clusters = k_means(data, num_rules, seed)
    labels = clusters.labels

    num_features = data.shape[1]
    spreads = np.full((num_rules, num_features), SIGMA_MIN)
    consequents = np.zeros((num_rules, num_features + 1))
    consequents[:, 0] = targets.mean()
    for rule in range(num_rules):
        members = labels == rule
        if not members.any():
            continue
        spreads[rule] = np.maximum(data[members].std(axis=0), SIGMA_MIN)
        consequents[rule, 0] = targets[members].mean()

    centers = clusters.centers
    antecedents = np.stack(
        [
            centers - FOOT_WIDTH * spreads,
            centers - SHOULDER_WIDTH * spreads,
            centers + SHOULDER_WIDTH * spreads,
            centers + FOOT_WIDTH * spreads,
        ],
        axis=2,
    )
    logger.info("Initialized %d trapezoidal rules with k-means", num_rules)
    return TskModel(MembershipKind.TRAPEZOID, antecedents, consequents)


def init_model(
    kind: MembershipKind, X: np.ndarray, y: np.ndarray, num_rules: int, seed: int
) -> TskModel:
    """Run the initializer matching ``kind``."""
    if MembershipKind(kind) == MembershipKind.GAUSSIAN:
        return init_gaussian_model(X, y, num_rules, seed)
    return init_trapezoid_model(X, y, num_rules, seed)
