import math

import numpy as np
import pytest

from descry import build_pyramid, density_curve, information_density, select_working_scale

from oracles import residual_entropy_reference, residual_histogram_reference


def checkerboard(side, block):
    grid = np.add.outer(np.arange(side) // block, np.arange(side) // block)
    return (grid % 2).astype(np.float64) * 255.0


def test_constant_image_has_zero_density():
    assert information_density(np.full((16, 16), 77.0)) == 0.0
    assert information_density(np.full((3, 5), 0.0)) == 0.0


def test_single_pixel_has_zero_density():
    assert information_density(np.array([[123.0]])) == 0.0


def test_period_one_checkerboard_is_about_one_bit():
    value = information_density(checkerboard(8, 1))
    assert abs(value - 1.0) <= 0.1


def test_matches_reference_on_random_image():
    rng = np.random.default_rng(29)
    img = rng.integers(0, 256, size=(64, 64)).astype(np.float64)
    assert abs(information_density(img) - residual_entropy_reference(img)) <= 1e-9


def test_histogram_reference_agrees_on_fractional_values():
    rng = np.random.default_rng(31)
    img = rng.uniform(0.0, 255.0, size=(12, 17))
    hist = residual_histogram_reference(img)
    total = sum(hist.values())
    expected = -sum((n / total) * math.log2(n / total) for n in hist.values())
    assert abs(information_density(img) - expected) <= 1e-9


def test_density_bounded_by_distinct_residual_count():
    rng = np.random.default_rng(37)
    for _ in range(10):
        img = rng.integers(0, 256, size=(11, 13)).astype(np.float64)
        hist = residual_histogram_reference(img)
        assert 0.0 <= information_density(img) <= math.log2(len(hist)) + 1e-12


def test_density_invariant_under_intensity_shift():
    rng = np.random.default_rng(41)
    img = rng.integers(0, 200, size=(24, 24)).astype(np.float64)
    assert information_density(img + 55.0) == information_density(img)


def test_curve_of_constant_pyramid_is_zero():
    pyr = build_pyramid(np.full((64, 64), 200.0), 100)
    assert density_curve(pyr) == [0.0] * len(pyr.levels)


def test_curve_of_single_level_pyramid():
    pyr = build_pyramid(np.zeros((4, 4)), 100)
    assert len(density_curve(pyr)) == 1


def test_block_checkerboard_drops_to_zero_where_blocks_vanish():
    pyr = build_pyramid(checkerboard(64, 8), 16)
    assert [lvl.shape[0] for lvl in pyr.levels] == [64, 32, 16, 8, 4]
    curve = density_curve(pyr)
    for level, value in enumerate(curve):
        assert abs(value - residual_entropy_reference(pyr.levels[level])) <= 1e-9
    assert all(v > 0.0 for v in curve[:4])
    assert curve[4] == 0.0
    assert select_working_scale(curve, 0.8) == 3


def test_select_examples():
    assert select_working_scale([4.0, 4.1, 4.0, 1.0], 0.8) == 2
    assert select_working_scale([3.0, 3.0, 3.0], 0.8) == 2
    assert select_working_scale([4.0, 1.0, 0.5], 0.8) == 0


def test_select_returns_valid_index():
    rng = np.random.default_rng(43)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        curve = rng.uniform(0.0, 8.0, size=n).tolist()
        ratio = float(rng.uniform(0.05, 0.95))
        assert 0 <= select_working_scale(curve, ratio) < n


def test_select_rejects_bad_arguments():
    with pytest.raises(ValueError):
        select_working_scale([], 0.8)
    with pytest.raises(ValueError):
        select_working_scale([1.0], 0.0)
    with pytest.raises(ValueError):
        select_working_scale([1.0], 1.0)


def test_determinism():
    rng = np.random.default_rng(47)
    img = rng.integers(0, 256, size=(40, 40)).astype(np.float64)
    assert information_density(img) == information_density(img.copy())
