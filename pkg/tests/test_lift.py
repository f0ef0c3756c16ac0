"""
Tests for the lifts and the Gaussian pre-smoothing.
"""

import numpy as np
import pytest

from ahe.errors import InvalidInputError
from ahe.services.grid import PeriodicImage
from ahe.services.lift import (
    gaussian_smooth,
    lift_constant_angle,
    lift_gradient,
    lift_orientation_only,
    lift_trivial,
    nearest_layer,
)

# varies along x only; pixels 0 and 4 are local extrema (zero gradient)
PROFILE = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.4, 0.3, 0.2])


def _profile_image() -> PeriodicImage:
    return PeriodicImage(np.repeat(PROFILE[:, None], 8, axis=1))


def test_trivial_lift_spreads_evenly() -> None:
    rng = np.random.default_rng(0)
    img = PeriodicImage(rng.uniform(0.1, 1.0, size=(6, 6)))
    stack = lift_trivial(img, 5)
    assert stack.values.shape == (6, 6, 5)
    assert np.array_equal(stack.values[:, :, 3], img.values / 5)
    assert np.allclose(stack.values.sum(axis=2), img.values)


def test_gradient_lift_places_value_on_level_curve_layer() -> None:
    img = _profile_image()
    stack = lift_gradient(img, 4).values
    for k in (1, 2, 3, 5, 6, 7):
        # level curves run along y, i.e. θ = π/2, layer 2 of 4
        assert np.array_equal(stack[k, 0], np.array([0, 0, PROFILE[k], 0]))
    for k in (0, 4):
        assert np.allclose(stack[k, 0], PROFILE[k] / 4)
    assert stack.sum() == pytest.approx(img.values.sum())


def test_gradient_lift_is_non_negative_and_keeps_mass() -> None:
    rng = np.random.default_rng(1)
    img = PeriodicImage(rng.uniform(size=(16, 16)))
    stack = lift_gradient(img, 30)
    assert stack.values.min() >= 0
    assert stack.total() == pytest.approx(img.values.sum())


def test_constant_angle_lift() -> None:
    img = PeriodicImage(np.full((4, 4), 0.6))
    stack = lift_constant_angle(img, 4, np.pi / 4).values
    assert np.all(stack[:, :, 1] == 0.6)
    assert stack.sum() == pytest.approx(0.6 * 16)
    # π/4 + π is the same orientation
    assert np.array_equal(lift_constant_angle(img, 4, 5 * np.pi / 4).values, stack)


def test_orientation_only_lift() -> None:
    stack = lift_orientation_only(_profile_image(), 4, level=0.5).values
    assert set(np.unique(stack)) <= {0.0, 0.5}
    assert np.all(stack[1, 0] == np.array([0, 0, 0.5, 0]))


def test_nearest_layer_ties_go_down() -> None:
    assert nearest_layer(np.array(np.pi / 8), 4) == 0
    assert nearest_layer(np.array(np.pi - 1e-12), 4) == 0
    assert list(nearest_layer(np.array([0.0, np.pi / 2, 3 * np.pi / 4]), 4)) == [0, 2, 3]


def test_lifts_need_two_layers() -> None:
    img = PeriodicImage(np.full((4, 4), 0.5))
    with pytest.raises(InvalidInputError):
        lift_trivial(img, 1)
    with pytest.raises(InvalidInputError):
        lift_gradient(img, 0)


def test_gaussian_smooth_keeps_mass() -> None:
    rng = np.random.default_rng(2)
    img = PeriodicImage(rng.uniform(size=(16, 16)))
    smoothed = gaussian_smooth(img, 1.5)
    assert smoothed.values.sum() == pytest.approx(img.values.sum(), rel=1e-12)
    assert smoothed.values.std() < img.values.std()
    assert gaussian_smooth(img, 0) is img
    with pytest.raises(InvalidInputError):
        gaussian_smooth(img, -1.0)


def test_gaussian_smooth_matches_direct_convolution() -> None:
    m, radius = 16, 1.5
    delta = np.zeros((m, m))
    delta[3, 11] = 1.0
    d = np.minimum(np.arange(m), m - np.arange(m))
    g = np.exp(-(d ** 2) / (2 * radius ** 2))
    kernel = np.outer(g, g) / np.outer(g, g).sum()

    expected = np.zeros((m, m))
    for k in range(m):
        for l in range(m):
            for i in range(m):
                for j in range(m):
                    expected[k, l] += delta[i, j] * kernel[(k - i) % m, (l - j) % m]
    out = gaussian_smooth(PeriodicImage(delta), radius).values
    assert np.max(np.abs(out - expected)) <= 1e-10
    assert out[3, 11] == pytest.approx(kernel[0, 0])


def test_gradient_lift_commutes_with_quarter_turn() -> None:
    rng = np.random.default_rng(3)
    n = 8
    img = rng.uniform(0.1, 1.0, size=(16, 16))

    def turn(values: np.ndarray) -> np.ndarray:
        return np.roll(np.rot90(values, axes=(0, 1)), n // 2, axis=2)

    a = turn(lift_gradient(PeriodicImage(img), n).values)
    b = lift_gradient(PeriodicImage(np.rot90(img)), n).values
    assert np.array_equal(a, b)


def test_gradient_lift_of_constant_image_is_trivial() -> None:
    img = PeriodicImage(np.full((8, 8), 0.35))
    assert np.array_equal(lift_gradient(img, 6).values, lift_trivial(img, 6).values)
