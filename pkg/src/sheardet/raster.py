"""Minimal image values, direct 2D convolution, and shearlet decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .shearlets import FilterBank

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class Image:
    """An image as unit-interval reals, shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ValueError(f"pixels must have shape (h, w, 1|3), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("pixels contain non-finite values")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        p.setflags(write=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class CoefficientStack:
    """Per-filter response planes of a decomposition, in bank order."""

    planes: tuple[np.ndarray, ...]
    bank: FilterBank

    def __post_init__(self) -> None:
        if len(self.planes) != len(self.bank.filters):
            raise ValueError(
                f"stack must hold {len(self.bank.filters)} planes, got {len(self.planes)}"
            )
        shape = self.planes[0].shape
        for p in self.planes:
            if p.shape != shape:
                raise ValueError("all planes must share the source dimensions")


def to_grayscale(image: Image) -> Image:
    """Collapse RGB to luma (0.299/0.587/0.114); single-channel passes through."""
    if image.channels == 1:
        return image
    gray = image.pixels @ _LUMA_WEIGHTS
    return Image(pixels=np.clip(gray, 0.0, 1.0)[..., np.newaxis])


def convolve2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size sliding-product (correlation) with replicate border padding."""
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be square, got shape {kernel.shape}")
    if kernel.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be odd-sized, got {kernel.shape[0]}")
    plane = np.asarray(plane, dtype=float)
    if plane.ndim != 2:
        raise ValueError(f"plane must be 2D, got shape {plane.shape}")
    return ndimage.correlate(plane, kernel, mode="nearest")


def decompose(image: Image, bank: FilterBank) -> CoefficientStack:
    """Convolve the luma plane with every bank filter, in bank order."""
    gray = to_grayscale(image).pixels[..., 0]
    planes = tuple(convolve2d(gray, f.weights) for f in bank.filters)
    return CoefficientStack(planes=planes, bank=bank)


def combine_scale(stack: CoefficientStack, s: int) -> Image:
    """Root-sum-of-squares of one scale's directional planes, rescaled to [0, 1].

    A flat (all-equal) combination maps to all zeros rather than dividing
    by a zero range.
    """
    spec = stack.bank.spec
    if not 1 <= s <= spec.num_scales:
        raise ValueError(f"scale index {s} outside [1, {spec.num_scales}]")
    start = (s - 1) * spec.dirs_per_scale
    group = stack.planes[start : start + spec.dirs_per_scale]
    rss = np.sqrt(np.sum([np.abs(p) ** 2 for p in group], axis=0))
    lo, hi = rss.min(), rss.max()
    if hi - lo == 0.0:
        scaled = np.zeros_like(rss)
    else:
        scaled = (rss - lo) / (hi - lo)
    return Image(pixels=scaled[..., np.newaxis])
