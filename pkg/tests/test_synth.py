import numpy as np
import pytest

from qadwh.fileio import format_dataset
from qadwh.synth import gen_synth


def test_single_label_by_default():
    ds = gen_synth(300, 5, 4, seed=1)
    assert np.all(ds.labels.sum(axis=1) == 1)
    assert np.all(ds.labels.sum(axis=0) == 75)


def test_zero_noise_sits_on_centers():
    ds = gen_synth(40, 3, 4, noise_sigma=0.0, seed=2)
    cls = ds.labels.argmax(axis=1)
    centers = np.array([ds.features[cls == j][0] for j in range(4)])
    np.testing.assert_array_equal(ds.features, centers[cls])
    np.testing.assert_allclose(np.linalg.norm(centers, axis=1), 1.0, rtol=1e-15)
    nearest = np.linalg.norm(ds.features[:, None] - centers[None], axis=2).argmin(axis=1)
    np.testing.assert_array_equal(nearest, cls)


def test_center_scale_and_noise():
    sigma = 0.3
    ds = gen_synth(3000, 6, 3, noise_sigma=sigma, seed=0)
    cls = ds.labels.argmax(axis=1)
    means = np.array([ds.features[cls == j].mean(axis=0) for j in range(3)])
    np.testing.assert_allclose(np.linalg.norm(means, axis=1), 4 * sigma, rtol=0.03)
    assert abs((ds.features - means[cls]).std() - sigma) < 0.01


def test_extra_label_is_nearest_other_center():
    sigma = 0.5
    ds = gen_synth(400, 4, 5, multi_label_prob=1.0, noise_sigma=sigma, seed=3)
    assert np.all(ds.labels.sum(axis=1) == 2)
    # rebuild the centers from the same draw order
    rng = np.random.default_rng(3)
    centers = rng.normal(size=(5, 4))
    centers = centers / np.linalg.norm(centers, axis=1, keepdims=True) * 4 * sigma
    cls = rng.permutation(np.arange(400) % 5)
    for x, y, own in zip(ds.features, ds.labels, cls):
        dist = {j: np.linalg.norm(x - centers[j]) for j in range(5) if j != own}
        assert set(np.flatnonzero(y)) == {own, min(dist, key=dist.get)}


def test_partial_multilabel_rate():
    ds = gen_synth(4000, 4, 3, multi_label_prob=0.25, seed=0)
    assert abs((ds.labels.sum(axis=1) == 2).mean() - 0.25) < 0.03


def test_deterministic_bytes():
    assert format_dataset(gen_synth(50, 3, 2, 0.3, 0.7, seed=9)) == format_dataset(gen_synth(50, 3, 2, 0.3, 0.7, seed=9))
    assert format_dataset(gen_synth(50, 3, 2, seed=9)) != format_dataset(gen_synth(50, 3, 2, seed=10))


@pytest.mark.parametrize("kwargs", [
    dict(n=3, d=2, c=4),
    dict(n=10, d=1, c=2),
    dict(n=10, d=2, c=1),
    dict(n=10, d=2, c=2, multi_label_prob=1.5),
    dict(n=10, d=2, c=2, noise_sigma=-1.0),
])
def test_invalid(kwargs):
    with pytest.raises(ValueError):
        gen_synth(**kwargs)
