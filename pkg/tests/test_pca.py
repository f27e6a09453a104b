import numpy as np
import pytest

from measp.features import FEATURE_COUNT, FeatureVector
from measp.pca import pca_project, power_iteration


def test_requires_three_vectors():
    with pytest.raises(ValueError):
        pca_project(np.zeros((2, 5)))


def test_power_iteration_known_matrix():
    m = np.diag([5.0, 2.0, 1.0])
    lam, v = power_iteration(m)
    assert lam == pytest.approx(5.0, abs=1e-8)
    assert abs(v[0]) == pytest.approx(1.0, abs=1e-6)


def test_power_iteration_zero_matrix():
    lam, v = power_iteration(np.zeros((4, 4)))
    assert lam == 0.0
    assert np.isfinite(v).all()


def test_rank_one_data_second_component_vanishes():
    rng = np.random.default_rng(3)
    direction = rng.normal(size=10)
    t = rng.normal(size=50)
    x = np.outer(t, direction)
    _, (lam1, lam2) = pca_project(x)
    assert lam1 > 0
    assert lam2 <= 1e-6 * (lam1 + lam2)


def test_planted_2d_structure_matches_closed_form():
    rng = np.random.default_rng(11)
    cov = np.array([[2.0, 1.2], [1.2, 1.0]])
    chol = np.linalg.cholesky(cov)
    cloud = rng.normal(size=(400, 2)) @ chol.T
    x = np.zeros((400, FEATURE_COUNT))
    x[:, 7] = cloud[:, 0]
    x[:, 23] = cloud[:, 1]
    coords, (lam1, lam2) = pca_project(x)

    # independent check: numpy eigendecomposition of the same z-scored data
    z = (x - x.mean(axis=0)) / np.where(x.std(axis=0) == 0, 1.0, x.std(axis=0))
    eigvals = np.linalg.eigvalsh(z.T @ z / (len(z) - 1))
    expected = np.sort(eigvals)[::-1][:2]
    assert lam1 == pytest.approx(expected[0], abs=1e-6)
    assert lam2 == pytest.approx(expected[1], abs=1e-6)
    assert coords.shape == (400, 2)


def test_duplicated_dataset_identical_projection():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(20, 6))
    coords1, _ = pca_project(x)
    coords2, _ = pca_project(np.vstack([x, x]))
    assert np.allclose(coords1, coords2[:20], atol=1e-6)
    assert np.allclose(coords1, coords2[20:], atol=1e-6)


def test_projection_deterministic():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(30, 8))
    a, va = pca_project(x)
    b, vb = pca_project(x)
    assert np.array_equal(a, b)
    assert va == vb


def test_accepts_feature_vectors():
    rng = np.random.default_rng(2)
    vectors = [
        FeatureVector("v", tuple(rng.normal(size=FEATURE_COUNT).tolist()))
        for _ in range(10)
    ]
    coords, (lam1, lam2) = pca_project(vectors)
    assert coords.shape == (10, 2)
    assert lam1 >= lam2 >= 0
    mixed = vectors[:5] + [FeatureVector("w", (0.0,) * FEATURE_COUNT)] * 5
    with pytest.raises(ValueError, match="manifest"):
        pca_project(mixed)


def test_sign_convention_largest_component_positive():
    rng = np.random.default_rng(21)
    x = rng.normal(size=(40, 5))
    x[:, 2] *= 10  # dominant direction along feature 2
    coords_a, _ = pca_project(x)
    coords_b, _ = pca_project(-x)
    # same covariance either way: identical components, mirrored scores
    assert np.allclose(coords_a, -coords_b, atol=1e-8)
