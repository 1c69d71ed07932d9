"""Fuzzy c-means and k-means clustering used to seed rulebases."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputShapeError, InsufficientDataError, ParameterDomainError

logger = logging.getLogger(__name__)

FCM_FUZZIFIER = 2.0
FCM_MAX_ITER = 100
FCM_TOLERANCE = 1e-5
KMEANS_MAX_ITER = 100


@dataclass
class ClusterResult:
    """Cluster centers and the partition of the samples.

    ``memberships`` has shape (R, N). Fuzzy c-means columns sum to one;
    k-means columns are one-hot.
    """

    centers: np.ndarray
    memberships: np.ndarray
    iterations: int = 0
    objective: list[float] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        """Index of the cluster with the largest membership for each sample."""
        return np.argmax(self.memberships, axis=0)


def _check_inputs(X: np.ndarray, num_clusters: int) -> np.ndarray:
    data = np.asarray(X, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InputShapeError(f"Clustering needs a non-empty (N, M) matrix, got {data.shape}")
    if num_clusters < 1:
        raise ParameterDomainError(f"Number of clusters must be >= 1, got {num_clusters}")
    if data.shape[0] < num_clusters:
        raise InsufficientDataError(
            f"Cannot form {num_clusters} clusters from {data.shape[0]} samples"
        )
    return data


def _initial_centers(data: np.ndarray, num_clusters: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    indices = rng.choice(data.shape[0], size=num_clusters, replace=False)
    return data[indices].copy()


def _distances(data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Euclidean distances with shape (R, N)."""
    return np.linalg.norm(data[None, :, :] - centers[:, None, :], axis=2)


def _fcm_memberships(distances: np.ndarray, fuzzifier: float) -> np.ndarray:
    num_clusters, num_samples = distances.shape
    memberships = np.zeros((num_clusters, num_samples))
    exact = distances <= 0.0
    hit = exact.any(axis=0)
    # Samples sitting on one or more centers belong to them in equal shares
    if hit.any():
        memberships[:, hit] = exact[:, hit] / exact[:, hit].sum(axis=0)
    miss = ~hit
    if miss.any():
        d = distances[:, miss]
        # Scaled by the nearest center so the inverse powers stay in (0, 1]
        scaled = (d / d.min(axis=0, keepdims=True)) ** (-2.0 / (fuzzifier - 1.0))
        memberships[:, miss] = scaled / scaled.sum(axis=0, keepdims=True)
    return memberships


def fuzzy_c_means(
    X: np.ndarray,
    num_clusters: int,
    seed: int,
    fuzzifier: float = FCM_FUZZIFIER,
    max_iter: int = FCM_MAX_ITER,
    tol: float = FCM_TOLERANCE,
) -> ClusterResult:
    """Standard fuzzy c-means clustering.

    Centers start at ``num_clusters`` distinct samples drawn with ``seed``.
    Iteration stops once no center moves more than ``tol`` in any coordinate.
    """
    data = _check_inputs(X, num_clusters)
    if fuzzifier <= 1.0:
        raise ParameterDomainError(f"Fuzzifier must be > 1, got {fuzzifier}")

    centers = _initial_centers(data, num_clusters, seed)
    iterations = 0
    objective: list[float] = []
    for iterations in range(1, max_iter + 1):
        distances = _distances(data, centers)
        memberships = _fcm_memberships(distances, fuzzifier)
        objective.append(float(np.sum(memberships**fuzzifier * distances**2)))
        weights = memberships**fuzzifier
        new_centers = (weights @ data) / weights.sum(axis=1, keepdims=True)
        shift = float(np.max(np.abs(new_centers - centers)))
        centers = new_centers
        if shift < tol:
            break

    memberships = _fcm_memberships(_distances(data, centers), fuzzifier)
    logger.debug("Fuzzy c-means: %d clusters, %d iterations", num_clusters, iterations)
    return ClusterResult(
        centers=centers, memberships=memberships, iterations=iterations, objective=objective
    )


def _within_cluster_ss(data: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    return float(np.sum((data - centers[labels]) ** 2))


def k_means(
    X: np.ndarray,
    num_clusters: int,
    seed: int,
    max_iter: int = KMEANS_MAX_ITER,
) -> ClusterResult:
    """Lloyd's k-means with hard assignments.

    A cluster that loses all its samples is re-centered on the sample lying
    farthest from its own assigned center.
    """
    data = _check_inputs(X, num_clusters)
    centers = _initial_centers(data, num_clusters, seed)
    labels = np.argmin(_distances(data, centers), axis=0)
    objective = [_within_cluster_ss(data, centers, labels)]

    iterations = 0
    for iterations in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=num_clusters)
        for cluster in range(num_clusters):
            if counts[cluster]:
                centers[cluster] = data[labels == cluster].mean(axis=0)

        empty = np.flatnonzero(counts == 0)
        if empty.size:
            spread = np.linalg.norm(data - centers[labels], axis=1)
            for cluster in empty:
                farthest = int(np.argmax(spread))
                logger.warning(
                    "k-means cluster %d is empty; reseeding it at sample %d", cluster, farthest
                )
                centers[cluster] = data[farthest]
                spread[farthest] = -1.0

        new_labels = np.argmin(_distances(data, centers), axis=0)
        objective.append(_within_cluster_ss(data, centers, new_labels))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels

    memberships = np.zeros((num_clusters, data.shape[0]))
    memberships[labels, np.arange(data.shape[0])] = 1.0
    logger.debug("k-means: %d clusters, %d iterations", num_clusters, iterations)
    return ClusterResult(
        centers=centers, memberships=memberships, iterations=iterations, objective=objective
    )
