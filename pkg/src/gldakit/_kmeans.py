"""Small k-means++ helper used only for sampler/EM initialization."""

import numpy as np


def kmeans_pp_centers(values, k, rng):
    """Classic k-means++ seeding."""
    n = values.shape[0]
    centers = np.empty((k, values.shape[1]))
    centers[0] = values[rng.integers(n)]
    d2 = np.sum((values - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = values[rng.integers(n)]
        else:
            centers[j] = values[np.searchsorted(
                np.cumsum(d2 / total), rng.random(), side="right").clip(0, n - 1)]
        d2 = np.minimum(d2, np.sum((values - centers[j]) ** 2, axis=1))
    return centers


def kmeans_labels(values, k, rng, n_iter=10):
    """k-means++ seeding plus a few Lloyd iterations; returns hard labels."""
    centers = kmeans_pp_centers(values, k, rng)
    labels = np.zeros(values.shape[0], dtype=np.int64)
    for _ in range(n_iter):
        d2 = ((values[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = values[mask].mean(axis=0)
    return labels, centers
