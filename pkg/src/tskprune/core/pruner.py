"""Rule pruning: firing-strength filtering and similarity merging with refinement.

Starting from R0 rules trained for the first share of the epoch budget, each
pruning round

1. removes rules whose summed normalized firing level falls below
   gamma times the median,
2. repeatedly merges the most similar pair of rules while their Jaccard
   similarity exceeds theta,
3. refines the surviving rules with MBGD-RDA for that round's epochs.
"""

import logging
from typing import NamedTuple, Optional

import numpy as np

from ..models import EpochLog, PruneConfig, PruneRecord
from .errors import InputShapeError, ParameterDomainError
from .fuzzy import TskModel, normalized_firing_levels, predict, rmse
from .trainer import train

logger = logging.getLogger(__name__)


class PruneResult(NamedTuple):
    """Pruned model, per-round history and the cumulative epoch log."""

    model: TskModel
    history: list[PruneRecord]
    epochs: list[EpochLog]


def _round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def epoch_schedule(total_epochs: int, prune_iterations: int) -> list[int]:
    """Split K0 epochs: 60% for the first phase, the rest evenly over the rounds."""
    if prune_iterations < 2:
        raise ParameterDomainError(
            f"Need at least 2 pruning iterations, got {prune_iterations}"
        )
    if total_epochs < prune_iterations:
        raise ParameterDomainError(
            f"Total epochs ({total_epochs}) must be at least the number of "
            f"iterations ({prune_iterations})"
        )
    refine = _round_half_up(0.4 * total_epochs / (prune_iterations - 1))
    return [_round_half_up(0.6 * total_epochs)] + [refine] * (prune_iterations - 1)


def firing_strengths(model: TskModel, X: np.ndarray) -> np.ndarray:
    """Per-rule sum of normalized firing levels over all samples."""
    return normalized_firing_levels(model, model.as_matrix(X)).sum(axis=0)


def low_firing_filter(strengths: np.ndarray, gamma: float) -> np.ndarray:
    """Indices of rules whose strength is at least gamma times the median.

    The strongest rule always survives.
    """
    values = np.asarray(strengths, dtype=float).ravel()
    if values.size == 0:
        raise InputShapeError("Need at least one rule strength")
    keep = values >= gamma * np.median(values)
    keep[int(np.argmax(values))] = True
    return np.flatnonzero(keep)


def jaccard_similarity(first: np.ndarray, second: np.ndarray) -> float:
    """Fuzzy Jaccard similarity: sum of element-wise minima over sum of maxima.

    Two all-zero vectors have similarity 0.
    """
    u = np.asarray(first, dtype=float).ravel()
    v = np.asarray(second, dtype=float).ravel()
    if u.shape != v.shape:
        raise InputShapeError(f"Vectors differ in length: {u.size} vs {v.size}")
    union = float(np.sum(np.maximum(u, v)))
    if union <= 0.0:
        return 0.0
    return float(np.sum(np.minimum(u, v))) / union


def similarity_from_levels(levels: np.ndarray) -> np.ndarray:
    """Symmetric Jaccard matrix of the columns of an (N, R) level matrix.

    The diagonal is zero.
    """
    num_rules = levels.shape[1]
    similarity = np.zeros((num_rules, num_rules))
    for i in range(num_rules):
        column = levels[:, i : i + 1]
        others = levels[:, i + 1 :]
        union = np.maximum(column, others).sum(axis=0)
        overlap = np.minimum(column, others).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            row = np.where(union > 0.0, overlap / union, 0.0)
        similarity[i, i + 1 :] = row
        similarity[i + 1 :, i] = row
    return similarity


def build_similarity_matrix(model: TskModel, X: np.ndarray) -> np.ndarray:
    """R x R Jaccard similarity of the rules' normalized firing vectors."""
    return similarity_from_levels(normalized_firing_levels(model, model.as_matrix(X)))


def merge_rules(
    model: TskModel, weights: np.ndarray, i: int, j: int
) -> tuple[TskModel, np.ndarray]:
    """Replace rule i by the weighted average of rules i and j, then drop rule j.

    Rule i's weight grows by one.
    """
    num_rules = model.num_rules
    if i == j:
        raise ParameterDomainError("Cannot merge a rule with itself")
    for index in (i, j):
        if not 0 <= index < num_rules:
            raise IndexError(f"Rule index {index} out of range for {num_rules} rules")
    counts = np.asarray(weights)
    if counts.shape != (num_rules,):
        raise InputShapeError(f"Expected {num_rules} rule weights, got shape {counts.shape}")

    w_i, w_j = float(counts[i]), float(counts[j])
    total = w_i + w_j
    antecedents = model.antecedents.copy()
    consequents = model.consequents.copy()
    antecedents[i] = (w_i * antecedents[i] + w_j * antecedents[j]) / total
    consequents[i] = (w_i * consequents[i] + w_j * consequents[j]) / total

    keep = np.delete(np.arange(num_rules), j)
    merged_weights = counts.copy()
    merged_weights[i] += 1
    merged = TskModel(model.mf_type, antecedents[keep], consequents[keep])
    return merged, merged_weights[keep]


def _most_similar_pair(similarity: np.ndarray) -> tuple[int, int, float]:
    upper = np.triu(similarity, k=1)
    # argmax scans row-major, so ties resolve to the smallest (i, j)
    flat = int(np.argmax(upper))
    i, j = divmod(flat, similarity.shape[0])
    return i, j, float(upper[i, j])


def merge_similar_rules(
    model: TskModel,
    weights: np.ndarray,
    similarity: np.ndarray,
    threshold: float,
) -> tuple[TskModel, np.ndarray, np.ndarray]:
    """Merge the most similar pair until no similarity exceeds ``threshold``.

    The similarity matrix is maintained rather than rebuilt: row and column i
    become the averages of rows and columns i and j, then j is deleted.
    Returns the merged model, its weights and the final matrix.
    """
    similarity = np.array(similarity, dtype=float)
    counts = np.asarray(weights).copy()
    while model.num_rules > 1:
        i, j, best = _most_similar_pair(similarity)
        if best <= threshold:
            break
        logger.debug("Merging rules %d and %d (similarity %.4f)", i, j, best)
        model, counts = merge_rules(model, counts, i, j)
        similarity[i, :] = 0.5 * (similarity[i, :] + similarity[j, :])
        similarity[:, i] = 0.5 * (similarity[:, i] + similarity[:, j])
        similarity = np.delete(np.delete(similarity, j, axis=0), j, axis=1)
        np.fill_diagonal(similarity, 0.0)
    return model, counts, similarity


def prune_and_refine(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: Optional[np.ndarray],
    y_test: Optional[np.ndarray],
    config: PruneConfig,
) -> PruneResult:
    """Train R0 rules, then alternate pruning rounds with refinement.

    Every training phase draws batches and DropRule masks from one generator
    seeded with ``config.seed``; each phase starts a fresh AdaBound state.
    """
    schedule = epoch_schedule(config.total_epochs, config.prune_iterations)
    data = np.asarray(X_train, dtype=float)
    rng = np.random.default_rng(config.seed)

    logger.info(
        "Training %d rules for %d epochs before pruning", config.initial_rules, schedule[0]
    )
    result = train(
        data,
        y_train,
        X_test,
        y_test,
        config.train_config(config.initial_rules, schedule[0]),
        rng=rng,
    )
    model = result.model
    epochs = list(result.history)
    weights = np.ones(model.num_rules, dtype=int)
    history: list[PruneRecord] = []

    for round_number, phase_epochs in enumerate(schedule[1:], start=1):
        rules_before = model.num_rules
        kept = low_firing_filter(firing_strengths(model, data), config.firing_threshold)
        model, weights = model.subset(kept), weights[kept]
        removed_by_gamma = rules_before - model.num_rules

        similarity = build_similarity_matrix(model, data)
        before_merge = model.num_rules
        model, weights, _ = merge_similar_rules(
            model, weights, similarity, config.similarity_threshold
        )
        removed_by_theta = before_merge - model.num_rules

        refined = train(
            data,
            y_train,
            X_test,
            y_test,
            config.train_config(model.num_rules, phase_epochs),
            initial=model,
            rng=rng,
        )
        model = refined.model
        offset = len(epochs)
        epochs.extend(
            log.model_copy(update={"epoch": offset + log.epoch}) for log in refined.history
        )

        test_rmse = (
            rmse(predict(model, model.as_matrix(X_test)), y_test)
            if X_test is not None and y_test is not None and len(y_test)
            else float("nan")
        )
        history.append(
            PruneRecord(
                iteration=round_number,
                rules_before=rules_before,
                removed_by_gamma=removed_by_gamma,
                removed_by_theta=removed_by_theta,
                rules_after=model.num_rules,
                test_rmse=test_rmse,
            )
        )
        logger.info(
            "Pruning round %d: %d -> %d rules (%d by firing, %d by similarity)",
            round_number,
            rules_before,
            model.num_rules,
            removed_by_gamma,
            removed_by_theta,
        )

    return PruneResult(model=model, history=history, epochs=epochs)
