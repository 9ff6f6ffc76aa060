"""Bits-per-pixel complexity estimates and working-scale selection.

The estimate is the Shannon entropy of causal prediction residuals: every
pixel outside column 0 contributes its horizontal difference to the left
neighbor, and column-0 pixels (except the origin) contribute the vertical
difference to the pixel above. Residuals are rounded to the nearest integer
before histogramming because pyramid levels carry real values.
"""

import numpy as np

from .pyramid import Pyramid, validate_image

__all__ = ["information_density", "density_curve", "select_working_scale"]

DEFAULT_DROP_RATIO = 0.8


def information_density(image) -> float:
    """Entropy in bits of the image's integer-rounded residual distribution."""
    img = validate_image(image)
    if img.size == 1:
        return 0.0
    horizontal = img[:, 1:] - img[:, :-1]
    vertical = img[1:, 0] - img[:-1, 0]
    residuals = np.rint(np.concatenate([horizontal.ravel(), vertical])).astype(np.int64)
    counts = np.unique(residuals, return_counts=True)[1]
    p = counts / residuals.size
    entropy = float(-(p * np.log2(p)).sum())
    return entropy if entropy > 0.0 else 0.0


def density_curve(pyramid: Pyramid) -> list[float]:
    """Per-level densities, index 0 being the full-resolution image."""
    return [information_density(level) for level in pyramid.levels]


def select_working_scale(curve, drop_ratio: float = DEFAULT_DROP_RATIO) -> int:
    """Index of the level just before the density falls off.

    A level counts as the falloff when its density drops below drop_ratio
    times the full-resolution density. Without a falloff the coarsest level
    is returned.
    """
    values = list(curve)
    if not values:
        raise ValueError("curve must not be empty")
    if not 0.0 < drop_ratio < 1.0:
        raise ValueError(f"drop_ratio must lie in (0, 1), got {drop_ratio}")
    base = values[0]
    for j in range(1, len(values)):
        if values[j] < drop_ratio * base:
            return j - 1
    return len(values) - 1
