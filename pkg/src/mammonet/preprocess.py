"""Grayscale preprocessing: denoise, contrast, geometry, and model-input packing.

All functions take 2-D uint8 arrays. The chain used when preparing a dataset
is median_filter -> histogram_equalize -> (optional crop) -> bicubic_resize,
then to_model_input at the point a sample is fed to the network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, InputError


def _check_image(image: np.ndarray, who: str) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InputError(f"{who} expects a 2-D grayscale array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise InputError(f"{who} expects uint8 pixels, got {arr.dtype}")
    return arr


def median_filter(image: np.ndarray, window: int = 3) -> np.ndarray:
    """Median filter with edge replication; window must be odd."""
    arr = _check_image(image, "median_filter")
    if window < 1 or window % 2 == 0:
        raise ConfigurationError(f"median window must be a positive odd integer, got {window}")
    if window == 1:
        return arr.copy()
    half = window // 2
    padded = np.pad(arr, half, mode="edge")
    windows = sliding_window_view(padded, (window, window))
    # odd window -> odd count, so the median is an exact pixel value
    return np.median(windows, axis=(2, 3)).astype(np.uint8)


def histogram_equalize(image: np.ndarray) -> np.ndarray:
    """Classic histogram equalization over the 0..255 range.

    v -> round(255 * (cdf(v) - cdf_min) / (N - cdf_min)); a constant image maps
    to all zeros.
    """
    arr = _check_image(image, "histogram_equalize")
    counts = np.bincount(arr.ravel(), minlength=256)
    cdf = np.cumsum(counts)
    cdf_min = int(counts[np.flatnonzero(counts)[0]])
    denom = int(cdf[-1]) - cdf_min
    if denom == 0:
        return np.zeros_like(arr)
    lut = np.floor(255.0 * (cdf - cdf_min) / denom + 0.5)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[arr]


def _cubic_weight(t: np.ndarray) -> np.ndarray:
    # Keys kernel, a = -0.5 (Catmull-Rom)
    a = -0.5
    t = np.abs(t)
    w = np.where(t <= 1.0,
                 (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0,
                 np.where(t < 2.0,
                          a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a,
                          0.0))
    return w


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) interpolation weights for one axis, edge-clamped."""
    scale = n_in / n_out
    dst = np.arange(n_out)
    src = (dst + 0.5) * scale - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    mat = np.zeros((n_out, n_in))
    for k in (-1, 0, 1, 2):
        idx = np.clip(base + k, 0, n_in - 1)
        w = _cubic_weight(frac - k)
        np.add.at(mat, (dst, idx), w)
    # guard constant-image preservation against float drift
    mat /= mat.sum(axis=1, keepdims=True)
    return mat


def bicubic_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable Catmull-Rom bicubic resize with pixel-center alignment."""
    arr = _check_image(image, "bicubic_resize")
    if out_h < 1 or out_w < 1:
        raise ConfigurationError(f"resize target must be positive, got {out_h}x{out_w}")
    h, w = arr.shape
    rows = _resize_matrix(h, out_h)
    cols = _resize_matrix(w, out_w)
    out = rows @ arr.astype(np.float64) @ cols.T
    return np.floor(np.clip(out, 0.0, 255.0) + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class RoiBox:
    """Rectangular region: top-left (row, col) plus extent."""

    row: int
    col: int
    height: int
    width: int


def crop_roi(image: np.ndarray, box: RoiBox) -> np.ndarray:
    """Copy the region described by `box`; the box must lie inside the image."""
    arr = _check_image(image, "crop_roi")
    if box.height < 1 or box.width < 1:
        raise InputError(f"ROI extent must be positive, got {box.height}x{box.width}")
    if (box.row < 0 or box.col < 0
            or box.row + box.height > arr.shape[0]
            or box.col + box.width > arr.shape[1]):
        raise InputError(
            f"ROI {box} exceeds image bounds {arr.shape[0]}x{arr.shape[1]}")
    return arr[box.row:box.row + box.height, box.col:box.col + box.width].copy()


def _patch_origins(size: int, patch: int, stride: int) -> list[int]:
    xs = list(range(0, size - patch + 1, stride))
    if xs[-1] + patch < size:
        # shift a final patch inward so coverage reaches the far edge
        xs.append(size - patch)
    return xs


def extract_patches(image: np.ndarray, patch: int,
                    overlap: int) -> list[tuple[np.ndarray, tuple[int, int]]]:
    """Tile the image into overlapping square patches.

    Stride is patch - overlap; if the grid does not reach the bottom/right
    edge, one extra row/column of patches is placed flush with that edge.
    Returns (patch, (row, col)) pairs in row-major origin order.
    """
    arr = _check_image(image, "extract_patches")
    if not 0 <= overlap < patch:
        raise ConfigurationError(f"overlap must satisfy 0 <= overlap < patch, "
                                 f"got overlap={overlap} patch={patch}")
    if patch > arr.shape[0] or patch > arr.shape[1]:
        raise InputError(f"patch size {patch} exceeds image {arr.shape[0]}x{arr.shape[1]}")
    stride = patch - overlap
    out = []
    for r in _patch_origins(arr.shape[0], patch, stride):
        for c in _patch_origins(arr.shape[1], patch, stride):
            out.append((arr[r:r + patch, c:c + patch].copy(), (r, c)))
    return out


def to_model_input(image: np.ndarray) -> np.ndarray:
    """uint8 (H, W) -> float64 (H, W, 3): scale to [0, 1], replicate channels."""
    arr = _check_image(image, "to_model_input")
    chan = arr.astype(np.float64) / 255.0
    return np.repeat(chan[:, :, None], 3, axis=2)


def prepare_image(image: np.ndarray, size: int = 225, median_window: int = 3,
                  roi: RoiBox | None = None) -> np.ndarray:
    """Full preparation chain producing a size x size uint8 image."""
    out = median_filter(image, median_window)
    out = histogram_equalize(out)
    if roi is not None:
        out = crop_roi(out, roi)
    return bicubic_resize(out, size, size)
