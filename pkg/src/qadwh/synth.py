"""Synthetic Gaussian-cluster datasets."""

import numpy as np

from .model import Dataset


def gen_synth(n: int, d: int, c: int, multi_label_prob: float = 0.0, noise_sigma: float = 1.0, seed: int = 0) -> Dataset:
    """Draw ``n`` items from ``c`` isotropic Gaussian clusters.

    Cluster centers lie on a sphere of radius ``4 * noise_sigma`` (radius 1
    when ``noise_sigma`` is 0). Classes are assigned round-robin and then
    shuffled, so every class is populated. With probability
    ``multi_label_prob`` an item also takes the label of the nearest center
    other than its own.
    """
    if n < c or c < 2 or d < 2:
        raise ValueError(f"need n >= c >= 2 and d >= 2, got n={n} c={c} d={d}")
    if not 0.0 <= multi_label_prob <= 1.0:
        raise ValueError("multi_label_prob must lie in [0, 1]")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(c, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= 4.0 * noise_sigma if noise_sigma > 0 else 1.0

    cls = rng.permutation(np.arange(n) % c)
    x = centers[cls] + noise_sigma * rng.normal(size=(n, d))
    labels = np.zeros((n, c), dtype=np.int8)
    labels[np.arange(n), cls] = 1

    extra = rng.random(n) < multi_label_prob
    if extra.any():
        dist = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=2)
        dist[np.arange(n), cls] = np.inf
        second = dist.argmin(axis=1)
        labels[extra, second[extra]] = 1
    return Dataset(x, labels)
