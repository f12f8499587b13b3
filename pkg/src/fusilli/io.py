"""Grayscale image I/O and geometry helpers shared by the fusion pipeline.

An image is a plain 2-D ``float64`` array in (height, width) layout with
intensities nominally in [0, 1].  Files are read and written as 8-bit binary
PGM (P5) or PNG; RGB inputs are collapsed to Rec.601 luma.  Padding is mirror
padding without edge duplication, so feature extraction near borders never
sees a fabricated hard edge.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as _PILImage

__all__ = [
    "read_image",
    "write_image",
    "quantize",
    "pad_reflect",
    "crop",
    "pad_to_multiple",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # Rec.601

_WRITE_SUFFIXES = (".pgm", ".png")


def read_image(path):
    """Load an 8-bit grayscale or RGB image as float64 in [0, 1].

    RGB files are converted with Rec.601 luma weights (0.299, 0.587, 0.114)
    after scaling to [0, 1].  Anything that is not 8-bit grayscale or RGB
    (16-bit rasters, palette or alpha images) is rejected.

    Parameters
    ----------
    path : str or Path
        PGM (binary P5) or PNG file.

    Returns
    -------
    np.ndarray
        2-D float64 array, values in [0, 1].
    """
    with _PILImage.open(path) as img:
        img.load()  # force full decode so truncation surfaces here
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64) / 255.0
        if img.mode == "RGB":
            rgb = np.asarray(img, dtype=np.float64) / 255.0
            r, g, b = LUMA_WEIGHTS
            return rgb[..., 0] * r + rgb[..., 1] * g + rgb[..., 2] * b
        raise ValueError(
            f"unsupported image mode {img.mode!r} in {path}: "
            "expected 8-bit grayscale or RGB"
        )


def quantize(image):
    """Clamp to [0, 1] and quantize to 8 bits with round-half-up.

    Round-half-up (rather than banker's rounding) is pinned so that written
    files are reproducible byte for byte.
    """
    image = np.asarray(image, dtype=np.float64)
    clamped = np.clip(image, 0.0, 1.0)
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


def write_image(image, path):
    """Write an image as 8-bit grayscale PGM or PNG (chosen by suffix).

    ``uint8`` arrays are written as-is; float images are clamped to [0, 1]
    and quantized by round(x*255) half-up first.
    """
    path = str(path)
    suffix = path[path.rfind("."):].lower() if "." in path else ""
    if suffix not in _WRITE_SUFFIXES:
        raise ValueError(f"unsupported output suffix {suffix!r}: expected one of {_WRITE_SUFFIXES}")
    data = np.asarray(image)
    if data.dtype != np.uint8:
        data = quantize(data)
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {data.shape}")
    _PILImage.fromarray(data, mode="L").save(path)


def pad_reflect(image, pads):
    """Mirror-pad an image without repeating the edge sample.

    ``pads`` is (top, bottom, left, right).  A 1-pixel pad of the row
    [a, b, c] yields [b, a, b, c, b].  Each pad amount must be smaller than
    the corresponding image dimension.
    """
    image = np.asarray(image)
    top, bottom, left, right = _check_pads(image, pads)
    return np.pad(image, ((top, bottom), (left, right)), mode="reflect")


def crop(image, pads):
    """Undo :func:`pad_reflect`: remove (top, bottom, left, right) margins."""
    image = np.asarray(image)
    top, bottom, left, right = pads
    if min(pads) < 0:
        raise ValueError(f"negative crop amounts {pads}")
    h, w = image.shape
    if top + bottom >= h or left + right >= w:
        raise ValueError(f"crop {pads} leaves no pixels for shape {image.shape}")
    return image[top:h - bottom, left:w - right]


def pad_to_multiple(image, multiple):
    """Reflect-pad right/bottom so both dimensions divide ``multiple``.

    Returns ``(padded, pads)`` where ``pads`` feeds :func:`crop` to undo.
    """
    image = np.asarray(image)
    h, w = image.shape
    pads = (0, (-h) % multiple, 0, (-w) % multiple)
    if pads == (0, 0, 0, 0):
        return image, pads
    return pad_reflect(image, pads), pads


def _check_pads(image, pads):
    if len(pads) != 4:
        raise ValueError(f"pads must be (top, bottom, left, right), got {pads!r}")
    top, bottom, left, right = (int(p) for p in pads)
    if min(top, bottom, left, right) < 0:
        raise ValueError(f"negative pad amounts {pads}")
    h, w = image.shape
    if max(top, bottom) >= h or max(left, right) >= w:
        raise ValueError(
            f"reflect pad {pads} must stay below the image dimensions {image.shape}"
        )
    return top, bottom, left, right
