"""Grayscale image file I/O (PNG, PGM) through Pillow."""

import io

import numpy as np
from PIL import Image

from .checkpoint import atomic_write


def read_gray(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def encode_png(array):
    buf = io.BytesIO()
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, array):
    atomic_write(path, encode_png(array))


def binary_to_gray(bin_img):
    """Ink (1) renders black, background white."""
    return np.where(np.asarray(bin_img) > 0, 0, 255).astype(np.uint8)


def overlay(gray, row_positions=(), column_positions=()):
    """RGB copy of ``gray`` with separators drawn as colored lines; PNG bytes."""
    rgb = np.repeat(np.asarray(gray, dtype=np.uint8)[:, :, None], 3, axis=2)
    for y in row_positions:
        rgb[int(y), :] = (220, 0, 0)
    for x in column_positions:
        rgb[:, int(x)] = (0, 0, 220)
    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG")
    return buf.getvalue()
