"""Averaging pyramid: repeated 2x2 mean pooling down to a small top level.

Each coarser level replaces every 2x2 block of the level below with its
arithmetic mean. Odd dimensions are handled by replicating the last row or
column before pooling, so no pixels are dropped. Intensities stay real-valued
throughout; nothing is re-quantized between levels.
"""

from dataclasses import dataclass, field
from math import ceil

import numpy as np

__all__ = ["Pyramid", "validate_image", "downsample_once", "build_pyramid"]

DEFAULT_STOP_THRESHOLD = 100


def validate_image(image) -> np.ndarray:
    """Return the image as a float64 array, checking shape and value range."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image dimensions must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 255.0:
        raise ValueError("intensities must lie in [0, 255]")
    return arr


@dataclass(eq=False)
class Pyramid:
    """Image sequence from full resolution (index 0) up to the coarsest level."""

    levels: list = field(default_factory=list)
    stop_threshold: int = DEFAULT_STOP_THRESHOLD

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def top(self) -> np.ndarray:
        return self.levels[-1]


def downsample_once(image) -> np.ndarray:
    """Average each 2x2 block into one pixel, replicating edges on odd sizes."""
    img = validate_image(image)
    h, w = img.shape
    if h % 2 or w % 2:
        img = np.pad(img, ((0, h % 2), (0, w % 2)), mode="edge")
    a = img[0::2, 0::2]
    b = img[0::2, 1::2]
    c = img[1::2, 0::2]
    d = img[1::2, 1::2]
    return (a + b + c + d) * 0.25


def build_pyramid(image, stop_threshold: int = DEFAULT_STOP_THRESHOLD) -> Pyramid:
    """Downsample repeatedly until the level holds at most stop_threshold pixels.

    The top level is the first one whose pixel count drops to the threshold
    (or a 1x1 image if the threshold is never reached).
    """
    if stop_threshold < 1:
        raise ValueError(f"stop_threshold must be positive, got {stop_threshold}")
    levels = [validate_image(image)]
    while levels[-1].size > stop_threshold and levels[-1].shape != (1, 1):
        levels.append(downsample_once(levels[-1]))
    pyr = Pyramid(levels=levels, stop_threshold=stop_threshold)
    for fine, coarse in zip(levels, levels[1:]):
        assert coarse.shape == (ceil(fine.shape[0] / 2), ceil(fine.shape[1] / 2))
    return pyr
