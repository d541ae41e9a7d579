"""Raster preprocessing: binarize, strip rules, resize, dilate, normalize.

Images are 2-D numpy arrays indexed ``[y, x]``. Grayscale input is uint8
luminance (0 black, 255 white); binary images are uint8 with 1 = ink.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .model import Axis

DYNAMIC_RANGE = 128.0


@dataclass(frozen=True)
class PreprocessConfig:
    target_width: int = 1600
    target_height: int = 512
    dilation_iterations: int = 3
    column_kernel: tuple = (3, 5)  # (width, height)
    row_kernel: tuple = (5, 3)
    binarize_window: int = 31
    binarize_k: float = 0.3

    def __post_init__(self):
        if self.target_width <= 0 or self.target_height <= 0:
            raise InvalidInputError("target dimensions must be positive")
        if self.dilation_iterations < 0:
            raise InvalidInputError("dilation_iterations must be >= 0")
        for kernel in (self.column_kernel, self.row_kernel):
            if len(kernel) != 2 or any(k < 1 or k % 2 == 0 for k in kernel):
                raise InvalidInputError(f"kernel dimensions must be odd and >= 1: {kernel}")
        if self.binarize_window < 1:
            raise InvalidInputError("binarize_window must be >= 1")
        if not 0 < self.binarize_k < 1:
            raise InvalidInputError("binarize_k must lie in (0, 1)")

    def kernel_for(self, axis):
        return self.column_kernel if Axis(axis) is Axis.COLUMN else self.row_kernel


def _check_2d(img, what):
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise InvalidInputError(f"{what} must be a non-empty 2-D array, got shape {img.shape}")
    return img


def _check_binary(img):
    img = _check_2d(img, "binary image")
    if not np.all((img == 0) | (img == 1)):
        raise InvalidInputError("binary image values must be 0 or 1")
    return img.astype(np.uint8, copy=False)


def effective_window(cfg, height, width):
    """Window side clamped to the image and kept odd."""
    w = min(cfg.binarize_window, height, width)
    return w if w % 2 == 1 else w - 1


def binarize(img, cfg=PreprocessConfig()):
    """Sauvola thresholding with integral images.

    The window is clipped at the borders; mean and deviation use only the
    pixels inside the image. A pixel is ink when its luminance is at or
    below ``mean * (1 + k * (std / 128 - 1))``; the inclusive comparison
    keeps uniformly black regions (threshold 0) as ink.
    """
    img = _check_2d(img, "grayscale image")
    h, w = img.shape
    r = effective_window(cfg, h, w) // 2
    vals = img.astype(np.int64)
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii2 = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = vals.cumsum(0).cumsum(1)
    ii2[1:, 1:] = (vals * vals).cumsum(0).cumsum(1)

    y0 = np.clip(np.arange(h) - r, 0, h)[:, None]
    y1 = np.clip(np.arange(h) + r + 1, 0, h)[:, None]
    x0 = np.clip(np.arange(w) - r, 0, w)[None, :]
    x1 = np.clip(np.arange(w) + r + 1, 0, w)[None, :]

    def box(table):
        return table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]

    n = ((y1 - y0) * (x1 - x0)).astype(np.float64)
    mean = box(ii).astype(np.float64) / n
    var = box(ii2).astype(np.float64) / n - mean * mean
    std = np.sqrt(np.maximum(var, 0.0))
    threshold = mean * (1.0 + cfg.binarize_k * (std / DYNAMIC_RANGE - 1.0))
    return (vals <= threshold).astype(np.uint8)


def _rule_mask(widths, heights, img_w, img_h):
    long_side = np.maximum(widths, heights)
    short_side = np.minimum(widths, heights)
    long_dim = np.where(widths >= heights, img_w, img_h)
    horizontal = (widths >= 0.5 * img_w) & (heights <= 5)
    vertical = (heights >= 0.5 * img_h) & (widths <= 5)
    elongated = (long_side >= 20 * short_side) & (long_side >= 0.3 * long_dim)
    return horizontal | vertical | elongated


def remove_nontext(bin_img):
    """Delete 8-connected components whose bounding box looks like a rule."""
    bin_img = _check_binary(bin_img)
    labels, count = ndimage.label(bin_img, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return bin_img.copy()
    boxes = ndimage.find_objects(labels)
    heights = np.array([s[0].stop - s[0].start for s in boxes])
    widths = np.array([s[1].stop - s[1].start for s in boxes])
    img_h, img_w = bin_img.shape
    drop = np.concatenate([[False], _rule_mask(widths, heights, img_w, img_h)])
    out = bin_img.copy()
    out[drop[labels]] = 0
    return out


def _overlap_matrix(n_in, n_out):
    """Integer overlap of source pixel i with output pixel j on a common
    grid where a source pixel spans n_out units and an output pixel n_in."""
    src = np.arange(n_in)
    dst = np.arange(n_out)
    lo = np.maximum(src[None, :] * n_out, dst[:, None] * n_in)
    hi = np.minimum((src[None, :] + 1) * n_out, (dst[:, None] + 1) * n_in)
    return np.maximum(hi - lo, 0).astype(np.float64)


def resize_binary(bin_img, cfg=PreprocessConfig()):
    """Box-filter resize to the target size, re-thresholded at 0.5 coverage
    (exactly half counts as ink). All arithmetic stays in exact integers."""
    bin_img = _check_binary(bin_img)
    h, w = bin_img.shape
    th, tw = cfg.target_height, cfg.target_width
    if (h, w) == (th, tw):
        return bin_img.copy()
    ay = _overlap_matrix(h, th)
    ax = _overlap_matrix(w, tw)
    coverage = ay @ bin_img.astype(np.float64) @ ax.T
    return (2.0 * coverage >= float(h) * float(w)).astype(np.uint8)


def _dilate_1d(img, radius, axis):
    if radius == 0:
        return img
    out = img.copy()
    n = img.shape[axis]
    for s in range(1, min(radius, n - 1) + 1):
        if axis == 0:
            out[s:] |= img[:-s]
            out[:-s] |= img[s:]
        else:
            out[:, s:] |= img[:, :-s]
            out[:, :-s] |= img[:, s:]
    return out


def dilate(bin_img, kernel_width, kernel_height, iterations=1):
    """Binary dilation by a centered filled rectangle, repeated ``iterations``
    times; pixels outside the image count as background."""
    bin_img = _check_binary(bin_img)
    if kernel_width < 1 or kernel_height < 1 or kernel_width % 2 == 0 or kernel_height % 2 == 0:
        raise InvalidInputError(f"kernel dimensions must be odd: {kernel_width}x{kernel_height}")
    if iterations < 0:
        raise InvalidInputError("iterations must be >= 0")
    out = bin_img.copy()
    for _ in range(iterations):
        out = _dilate_1d(out, kernel_width // 2, axis=1)
        out = _dilate_1d(out, kernel_height // 2, axis=0)
    return out


def normalize(bin_img):
    return _check_binary(bin_img).astype(np.float64)


def preprocess_stages(img, axis, cfg=PreprocessConfig()):
    """Every intermediate raster of the pipeline, in order."""
    stages = {}
    stages["binarized"] = binarize(img, cfg)
    stages["cleaned"] = remove_nontext(stages["binarized"])
    stages["resized"] = resize_binary(stages["cleaned"], cfg)
    kw, kh = cfg.kernel_for(axis)
    stages["dilated"] = dilate(stages["resized"], kw, kh, cfg.dilation_iterations)
    stages["normalized"] = normalize(stages["dilated"])
    return stages


def preprocess(img, axis, cfg=PreprocessConfig()):
    """Grayscale table image -> target-size float raster for one axis."""
    return preprocess_stages(img, axis, cfg)["normalized"]


def foreground(img, cfg=PreprocessConfig()):
    """Ink mask at the original resolution (binarized, rules removed)."""
    return remove_nontext(binarize(img, cfg))
