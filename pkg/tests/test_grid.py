"""
Unit tests for the grid types and the finite-difference helpers.

Gradients are compared against a plain double loop over the pixels, and
boundary sets against neighbourhoods enumerated by hand.
"""

import numpy as np
import pytest

from ahe.errors import InvalidInputError
from ahe.services.grid import (
    GRAY_STEP,
    CorruptionMask,
    OrientationStack,
    PeriodicImage,
    boundary_bad,
    boundary_bad_mask,
    check_consistent,
    finite_gradient,
    good_neighbor_count,
    gradient_field,
    ingest,
)


def _mask_with_bad(m: int, bad_pixels) -> CorruptionMask:
    good = np.ones((m, m), dtype=bool)
    for k, l in bad_pixels:
        good[k, l] = False
    return CorruptionMask(good)


def test_constant_image_has_zero_gradient() -> None:
    img = PeriodicImage(np.full((8, 8), 0.4))
    gx, gy = gradient_field(img)
    assert np.all(gx == 0) and np.all(gy == 0)
    assert finite_gradient(img, (3, 5)) == (0.0, 0.0)


def test_ramp_gradient_away_from_seam() -> None:
    m = 8
    ramp = np.repeat((np.arange(m) * 0.1)[:, None], m, axis=1)
    img = PeriodicImage(ramp)
    for k in range(1, m - 1):
        gx, gy = finite_gradient(img, (k, 2))
        assert gx == pytest.approx(0.1)
        assert gy == 0.0


def test_gradient_field_matches_double_loop() -> None:
    rng = np.random.default_rng(3)
    img = PeriodicImage(rng.uniform(size=(8, 8)))
    gx, gy = gradient_field(img)
    f = img.values
    for k in range(8):
        for l in range(8):
            ex = (f[(k + 1) % 8, l] - f[(k - 1) % 8, l]) / 2.0
            ey = (f[k, (l + 1) % 8] - f[k, (l - 1) % 8]) / 2.0
            assert gx[k, l] == ex
            assert gy[k, l] == ey
            assert finite_gradient(img, (k, l)) == (ex, ey)


def test_gradient_is_linear() -> None:
    rng = np.random.default_rng(4)
    f, g = rng.uniform(0, 0.5, size=(2, 8, 8))
    gf, gg = gradient_field(PeriodicImage(f)), gradient_field(PeriodicImage(g))
    gs = gradient_field(PeriodicImage(0.3 * f + 0.7 * g))
    for axis in range(2):
        assert np.allclose(gs[axis], 0.3 * gf[axis] + 0.7 * gg[axis], atol=1e-15)


def test_wrapped_indexing_and_shift() -> None:
    rng = np.random.default_rng(5)
    img = PeriodicImage(rng.uniform(size=(6, 6)))
    assert img[7, -1] == img[1, 5]
    shifted = img.shifted(2, -1)
    assert shifted[2, -1] == img[0, 0]
    gx, _ = gradient_field(img)
    sx, _ = gradient_field(shifted)
    assert np.array_equal(np.roll(gx, (2, -1), axis=(0, 1)), sx)


def test_boundary_bad_examples() -> None:
    assert boundary_bad(CorruptionMask.all_good(8)) == set()
    assert boundary_bad(_mask_with_bad(8, [(4, 4)])) == {(4, 4)}

    block = [(k, l) for k in range(3, 6) for l in range(3, 6)]
    expected = set(block) - {(4, 4)}
    assert boundary_bad(_mask_with_bad(10, block)) == expected


def test_all_bad_mask_has_no_boundary() -> None:
    mask = CorruptionMask(np.zeros((5, 5), dtype=bool))
    assert boundary_bad(mask) == set()
    assert not boundary_bad_mask(mask).any()


def test_boundary_wraps_and_shifts() -> None:
    mask = _mask_with_bad(6, [(0, 0), (0, 5), (5, 0), (5, 5)])
    # all four corners touch GOOD pixels across the seam
    assert boundary_bad(mask) == {(0, 0), (0, 5), (5, 0), (5, 5)}
    base = _mask_with_bad(9, [(k, l) for k in range(2, 5) for l in range(2, 5)])
    moved = CorruptionMask(np.roll(base.good, (4, 7), axis=(0, 1)))
    assert boundary_bad(moved) == {((k + 4) % 9, (l + 7) % 9) for k, l in boundary_bad(base)}


def test_good_neighbor_count_counts_self() -> None:
    counts = good_neighbor_count(_mask_with_bad(5, [(2, 2)]))
    assert counts[2, 2] == 8
    assert counts[0, 0] == 9


def test_image_validation() -> None:
    with pytest.raises(InvalidInputError):
        PeriodicImage(np.full((4, 4), 1.5))
    with pytest.raises(InvalidInputError):
        PeriodicImage(np.zeros((4, 5)))
    with pytest.raises(InvalidInputError):
        PeriodicImage(np.full((4, 4), np.nan))
    with pytest.raises(InvalidInputError):
        OrientationStack(np.zeros((4, 4)))
    clipped = PeriodicImage.clipped(np.full((3, 3), -0.2))
    assert clipped.max() == 0.0


def test_images_are_read_only() -> None:
    img = PeriodicImage(np.full((4, 4), 0.5))
    with pytest.raises(ValueError):
        img.values[0, 0] = 0.1


def test_ingest_without_mask_uses_zero_convention() -> None:
    values = np.full((4, 4), 0.5)
    values[1, 2] = 0.0
    img, mask = ingest(values)
    assert mask.bad_count == 1 and not mask.good[1, 2]
    check_consistent(img, mask)


def test_ingest_with_mask_lifts_good_zeros() -> None:
    values = np.full((4, 4), 0.5)
    values[0, 0] = 0.0
    mask = _mask_with_bad(4, [(3, 3)])
    img, out_mask = ingest(values, mask)
    assert img[0, 0] == GRAY_STEP
    assert img[3, 3] == 0.0
    assert out_mask is mask
    check_consistent(img, mask)


def test_check_consistent_rejects_mismatch() -> None:
    img = PeriodicImage(np.full((4, 4), 0.5))
    with pytest.raises(InvalidInputError):
        check_consistent(img, _mask_with_bad(4, [(1, 1)]))
    with pytest.raises(InvalidInputError):
        check_consistent(img, CorruptionMask.all_good(5))
    zero = PeriodicImage(np.zeros((4, 4)))
    with pytest.raises(InvalidInputError):
        check_consistent(zero, CorruptionMask.all_good(4))


def test_mask_promote_and_fraction() -> None:
    mask = _mask_with_bad(4, [(0, 0), (1, 1)])
    assert mask.bad_fraction == pytest.approx(2 / 16)
    sel = np.zeros((4, 4), dtype=bool)
    sel[0, 0] = True
    promoted = mask.promote(sel)
    assert promoted.bad_count == 1 and mask.bad_count == 2
