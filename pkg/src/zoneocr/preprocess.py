"""Letter preprocessing: Otsu binarization, speck removal, resize and centering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .raster import BinaryImage, GrayImage

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class PreprocessConfig:
    canvas_w: int = 44
    canvas_h: int = 44
    speck_max_area: int = 4
    threshold_override: Optional[int] = None

    def __post_init__(self):
        if self.canvas_w < 1 or self.canvas_h < 1:
            raise ValueError("canvas dimensions must be >= 1")
        if self.speck_max_area < 0:
            raise ValueError("speck_max_area must be >= 0")
        if self.threshold_override is not None and not 0 <= self.threshold_override <= 255:
            raise ValueError("threshold_override must lie in 0..255")


@dataclass(frozen=True)
class Diagnostics:
    threshold: int
    specks_removed: int
    clipped: int


def otsu_threshold(img: GrayImage) -> int:
    """Threshold t maximizing between-class variance of {p <= t} vs {p > t}.

    Ties go to the smallest t. A single-intensity image returns that intensity.
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256).astype(np.float64)
    levels = np.flatnonzero(hist)
    if levels.size == 1:
        return int(levels[0])
    total = hist.sum()
    weighted = hist * np.arange(256)
    n0 = np.cumsum(hist)
    s0 = np.cumsum(weighted)
    n1 = total - n0
    s1 = weighted.sum() - s0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = s0 / n0
        mu1 = s1 / n1
        between = n0 * n1 * (mu0 - mu1) ** 2
    between[(n0 == 0) | (n1 == 0)] = 0.0
    return int(np.argmax(between))


def binarize(img: GrayImage, t: int) -> BinaryImage:
    """Pixels at or below ``t`` become ink."""
    return BinaryImage(img.pixels <= t)


def _remove_specks(img: BinaryImage, max_area: int) -> tuple[BinaryImage, int]:
    if max_area <= 0 or not img.mask.any():
        return img, 0
    labels, n = ndimage.label(img.mask, structure=_EIGHT_CONNECTED)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    small = areas <= max_area
    small[0] = False
    removed = int(small.sum())
    if removed == 0:
        return img, 0
    return BinaryImage(img.mask & ~small[labels]), removed


def remove_specks(img: BinaryImage, max_area: int) -> BinaryImage:
    """Erase every 8-connected ink component of at most ``max_area`` pixels."""
    return _remove_specks(img, max_area)[0]


def _centralize(img: BinaryImage) -> tuple[BinaryImage, int]:
    ys, xs = np.nonzero(img.mask)
    if xs.size == 0:
        return img, 0
    h, w = img.mask.shape
    # centroid rounded half-up, exact in integer arithmetic
    cx = (2 * int(xs.sum()) + xs.size) // (2 * xs.size)
    cy = (2 * int(ys.sum()) + ys.size) // (2 * ys.size)
    dx, dy = w // 2 - cx, h // 2 - cy
    nx, ny = xs + dx, ys + dy
    keep = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
    out = np.zeros_like(img.mask)
    out[ny[keep], nx[keep]] = True
    return BinaryImage(out), int(xs.size - keep.sum())


def centralize(img: BinaryImage) -> BinaryImage:
    """Translate the ink so its (rounded) centroid lands on (w // 2, h // 2)."""
    return _centralize(img)[0]


def centralize_clipped(img: BinaryImage) -> tuple[BinaryImage, int]:
    """Like :func:`centralize`, also returning how many ink pixels fell off the canvas."""
    return _centralize(img)


def resize_nearest(img: BinaryImage, w: int, h: int) -> BinaryImage:
    if w < 1 or h < 1:
        raise ValueError("target size must be >= 1")
    in_h, in_w = img.mask.shape
    src_x = (np.arange(w) * in_w) // w
    src_y = (np.arange(h) * in_h) // h
    return BinaryImage(img.mask[np.ix_(src_y, src_x)])


def preprocess_with_diagnostics(
    img: GrayImage, cfg: PreprocessConfig = PreprocessConfig()
) -> tuple[BinaryImage, Diagnostics]:
    if cfg.threshold_override is not None:
        t = cfg.threshold_override
        binary = binarize(img, t)
    else:
        t = otsu_threshold(img)
        if img.pixels.min() == img.pixels.max():
            # a uniform page has no ink/paper contrast, so nothing is ink
            binary = BinaryImage(np.zeros(img.pixels.shape, dtype=bool))
        else:
            binary = binarize(img, t)
    cleaned, specks = _remove_specks(binary, cfg.speck_max_area)
    resized = resize_nearest(cleaned, cfg.canvas_w, cfg.canvas_h)
    centered, clipped = _centralize(resized)
    return centered, Diagnostics(threshold=t, specks_removed=specks, clipped=clipped)


def preprocess_pipeline(img: GrayImage, cfg: PreprocessConfig = PreprocessConfig()) -> BinaryImage:
    """binarize -> remove_specks -> resize_nearest -> centralize."""
    return preprocess_with_diagnostics(img, cfg)[0]
