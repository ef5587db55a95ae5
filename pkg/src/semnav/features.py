"""Fixed multi-scale per-pixel feature extractor.

Stands in for a pretrained backbone: every learner in the pipeline (frugal
segmentation, few-shot conditioning, optional IRL features) consumes the
same per-pixel vectors, so the extractor is the single shared "trunk".

Per channel the vector holds the raw intensity plus mean and standard
deviation over mirror-padded square windows of sides 3, 7 and 15; two
channel-averaged gradient magnitudes (central differences at offsets 1 and
3, scaled by 1/sqrt(8)) complete it. D = 7*channels + 2.

Feature order: [raw, m3, s3, m7, s7, m15, s15] per channel, then [g1, g3].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyMaskError
from .rasters import BinaryMask, ImageRaster

WINDOW_SIDES = (3, 7, 15)
GRADIENT_OFFSETS = (1, 3)


def feature_dim(channels: int) -> int:
    return 7 * channels + 2


@dataclass(frozen=True)
class FeatureVolume:
    width: int
    height: int
    dim: int
    data: np.ndarray  # (height, width, dim) float64

    def __post_init__(self):
        if self.data.shape != (self.height, self.width, self.dim):
            raise ValueError(
                f"data shape {self.data.shape} != {(self.height, self.width, self.dim)}"
            )

    def flat(self) -> np.ndarray:
        """(height*width, dim) view, row-major pixel order."""
        return self.data.reshape(-1, self.dim)


def _mirror_indices(n: int, lo: int, hi: int) -> np.ndarray:
    """Indices lo..hi-1 folded into [0, n) by edge-repeating reflection."""
    idx = np.arange(lo, hi, dtype=np.int64)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n
    j = np.mod(idx, period)
    return np.where(j < n, j, period - 1 - j)


def _window_stats(plane: np.ndarray, side: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std over side x side mirror-padded windows.

    Separable shifted-copy sums keep every feature a function of its own
    window only (bit-local): no prefix-sum rounding leaks in from distant
    pixels, so editing far-away pixels cannot perturb a feature even in the
    last bit.
    """
    h, w = plane.shape
    half = side // 2
    rows = _mirror_indices(h, -half, h + half)
    cols = _mirror_indices(w, -half, w + half)
    padded = plane[np.ix_(rows, cols)]

    def box_sum(grid: np.ndarray) -> np.ndarray:
        tmp = np.zeros((h, grid.shape[1]), dtype=np.float64)
        for dr in range(side):
            tmp += grid[dr : dr + h, :]
        out = np.zeros((h, w), dtype=np.float64)
        for dc in range(side):
            out += tmp[:, dc : dc + w]
        return out

    area = float(side * side)
    mean = box_sum(padded) / area
    meansq = box_sum(padded * padded) / area
    var = meansq - mean * mean
    # Cancellation floor: constant windows give exactly zero std.
    var[var < 1e-14] = 0.0
    return mean, np.sqrt(var)


def _gradient_magnitude(image: np.ndarray, offset: int) -> np.ndarray:
    """Channel-averaged central-difference magnitude, scaled into [0, 1]."""
    h, w, channels = image.shape
    col_plus = _mirror_indices(w, offset, w + offset)
    col_minus = _mirror_indices(w, -offset, w - offset)
    row_plus = _mirror_indices(h, offset, h + offset)
    row_minus = _mirror_indices(h, -offset, h - offset)
    gx = image[:, col_plus, :] - image[:, col_minus, :]
    gy = image[row_plus, :, :] - image[row_minus, :, :]
    magnitude = np.sqrt(gx * gx + gy * gy).mean(axis=2)
    return magnitude / np.sqrt(8.0)


def extract_volume(image: ImageRaster) -> FeatureVolume:
    """Deterministic multi-scale features; resolution preserved."""
    dim = feature_dim(image.channels)
    out = np.empty((image.height, image.width, dim), dtype=np.float64)
    col = 0
    for c in range(image.channels):
        plane = image.data[:, :, c]
        out[:, :, col] = plane
        col += 1
        for side in WINDOW_SIDES:
            mean, std = _window_stats(plane, side)
            out[:, :, col] = mean
            out[:, :, col + 1] = std
            col += 2
    for offset in GRADIENT_OFFSETS:
        out[:, :, col] = _gradient_magnitude(image.data, offset)
        col += 1
    return FeatureVolume(width=image.width, height=image.height, dim=dim, data=out)


def global_pool(volume: FeatureVolume, mask: BinaryMask | None = None) -> np.ndarray:
    """Mean feature vector over the mask foreground (or the whole volume)."""
    if mask is None:
        return volume.data.reshape(-1, volume.dim).mean(axis=0)
    if (mask.width, mask.height) != (volume.width, volume.height):
        raise DimensionMismatchError(
            f"mask {mask.width}x{mask.height} vs volume {volume.width}x{volume.height}"
        )
    if mask.foreground_count == 0:
        raise EmptyMaskError("cannot pool over an empty mask")
    return volume.data[mask.data].mean(axis=0)
