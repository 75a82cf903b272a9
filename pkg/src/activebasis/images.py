"""Image ingestion, normalization, response maps, and resolution pyramids.

Grayscale images are plain ``(H, W)`` float64 arrays with values nominally
in [0, 1] before normalization.  Filter responses are only defined where the
full wavelet support fits; entries within ``margin`` of the border are kept
at zero and excluded from every argmax.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import kernels
from .errors import DataError, DegenerateImageError, SizeError
from .gabor import Dictionary

__all__ = [
    "load_gray",
    "normalize_image",
    "compute_responses",
    "build_pyramid",
    "resample",
    "rotate_image",
    "ResponseMaps",
    "ImagePyramid",
    "save_response_dump",
    "load_response_dump",
]

DEFAULT_LUMA = (0.299, 0.587, 0.114)


def load_gray(path: str | Path, luma: tuple[float, float, float] = DEFAULT_LUMA) -> np.ndarray:
    """Load a raster file as a luminance image in [0, 1].

    Grayscale inputs are scaled by their bit depth; color inputs are reduced
    with the given luma weights.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode in ("L", "P", "1"):
                arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
            elif img.mode in ("I", "I;16", "I;16B", "I;16L"):
                arr = np.asarray(img, dtype=np.float64) / 65535.0
            elif img.mode == "F":
                arr = np.asarray(img, dtype=np.float64)
            else:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
                arr = rgb @ np.asarray(luma, dtype=np.float64)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return np.ascontiguousarray(arr, dtype=np.float64)


@dataclass
class ResponseMaps:
    """Per-orientation cosine/sine projections and their energy.

    Arrays have shape (O, H, W); entries within ``margin`` of the border are
    zero and must be treated as invalid.  Instances produced by
    :func:`compute_responses` should be copied before mutation.
    """

    cos: np.ndarray
    sin: np.ndarray
    energy: np.ndarray
    margin: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.cos.shape[1], self.cos.shape[2]

    @property
    def orientations(self) -> int:
        return self.cos.shape[0]

    def valid_box(self) -> tuple[int, int, int, int]:
        """Inclusive (row0, row1, col0, col1) bounds of the valid region."""
        h, w = self.shape
        m = self.margin
        return m, h - 1 - m, m, w - 1 - m

    def is_valid(self, row: int, col: int) -> bool:
        r0, r1, c0, c1 = self.valid_box()
        return r0 <= row <= r1 and c0 <= col <= c1

    def copy(self) -> "ResponseMaps":
        return ResponseMaps(
            self.cos.copy(), self.sin.copy(), self.energy.copy(), self.margin
        )


def compute_responses(image: np.ndarray, dictionary: Dictionary) -> ResponseMaps:
    """Project the image onto every dictionary element at every position."""
    height, width = image.shape
    length = dictionary.length
    if height < length or width < length:
        raise SizeError(
            f"image {height}x{width} smaller than wavelet support {length}"
        )
    m = dictionary.margin
    n_orient = dictionary.orientations
    stack = kernels.correlate_valid(
        np.ascontiguousarray(image, dtype=np.float64), dictionary.kernel_stack
    )
    cos = np.zeros((n_orient, height, width))
    sin = np.zeros((n_orient, height, width))
    cos[:, m : height - m, m : width - m] = stack[:n_orient]
    sin[:, m : height - m, m : width - m] = stack[n_orient:]
    energy = cos * cos + sin * sin
    return ResponseMaps(cos=cos, sin=sin, energy=energy, margin=m)


def response_scale(image: np.ndarray, dictionary: Dictionary) -> float:
    """Root mean energy over valid positions and all orientations."""
    resp = compute_responses(image, dictionary)
    m = resp.margin
    h, w = resp.shape
    valid = resp.energy[:, m : h - m, m : w - m]
    if valid.size == 0:
        raise SizeError("no valid response positions")
    return float(np.sqrt(valid.mean()))


def normalize_image(image: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    """Scale the image so its root mean filter energy equals one.

    Raises :class:`DegenerateImageError` for images with no filter response
    (all zero-mean filters respond 0 on a constant image).
    """
    sigma = response_scale(image, dictionary)
    if sigma <= 0.0 or not np.isfinite(sigma):
        raise DegenerateImageError("image has zero response variance")
    return image / sigma


@dataclass
class ImagePyramid:
    """Resolution ladder: (resize factor, image) pairs, factors decreasing."""

    levels: list[tuple[float, np.ndarray]]

    def __iter__(self):
        return iter(self.levels)

    def __len__(self) -> int:
        return len(self.levels)


def resample(image: np.ndarray, factor: float) -> np.ndarray:
    """Bilinear resampling by a scale factor (pixel-center convention)."""
    if factor <= 0:
        raise ValueError("resample factor must be positive")
    if factor == 1.0:
        return image.copy()
    height, width = image.shape
    new_h = max(1, int(round(height * factor)))
    new_w = max(1, int(round(width * factor)))
    rows = (np.arange(new_h) + 0.5) / factor - 0.5
    cols = (np.arange(new_w) + 0.5) / factor - 0.5
    rows = np.clip(rows, 0.0, height - 1.0)
    cols = np.clip(cols, 0.0, width - 1.0)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, height - 1)
    c1 = np.minimum(c0 + 1, width - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = image[np.ix_(r0, c0)] * (1 - fc) + image[np.ix_(r0, c1)] * fc
    bot = image[np.ix_(r1, c0)] * (1 - fc) + image[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def build_pyramid(
    image: np.ndarray, factors: list[float], dictionary: Dictionary | None = None
) -> ImagePyramid:
    """Resample the base image at each factor, dropping undersized levels."""
    if not factors:
        raise SizeError("empty pyramid factor list")
    if any(f <= 0 for f in factors):
        raise ValueError("pyramid factors must be positive")
    if any(b >= a for a, b in zip(factors, factors[1:])):
        raise ValueError("pyramid factors must be strictly decreasing")
    min_side = dictionary.length if dictionary is not None else 1
    levels = []
    for f in factors:
        resized = resample(image, f)
        if min(resized.shape) < min_side:
            warnings.warn(
                f"pyramid level {f} dropped: {resized.shape} below support {min_side}",
                stacklevel=2,
            )
            continue
        levels.append((f, resized))
    if not levels:
        raise SizeError("no pyramid level large enough for the wavelet support")
    return ImagePyramid(levels)


def rotate_image(image: np.ndarray, angle: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate image content by ``angle`` about the center (bilinear).

    Returns the rotated image and a boolean mask of pixels whose four
    bilinear source neighbors all fell inside the input.  A structure at
    orientation ``a`` in the input appears at ``a + angle`` in the output.
    """
    height, width = image.shape
    cy = (height - 1) / 2.0
    cx = (width - 1) / 2.0
    rr, cc = np.mgrid[0:height, 0:width].astype(np.float64)
    # Sample from the source rotated the opposite way.
    ca, sa = np.cos(-angle), np.sin(-angle)
    x = cc - cx
    y = rr - cy
    src_x = ca * x - sa * y + cx
    src_y = sa * x + ca * y + cy
    valid = (src_x >= 0) & (src_x <= width - 1) & (src_y >= 0) & (src_y <= height - 1)
    sx = np.clip(src_x, 0, width - 1)
    sy = np.clip(src_y, 0, height - 1)
    c0 = np.floor(sx).astype(np.intp)
    r0 = np.floor(sy).astype(np.intp)
    c1 = np.minimum(c0 + 1, width - 1)
    r1 = np.minimum(r0 + 1, height - 1)
    fc = sx - c0
    fr = sy - r0
    out = (
        image[r0, c0] * (1 - fr) * (1 - fc)
        + image[r0, c1] * (1 - fr) * fc
        + image[r1, c0] * fr * (1 - fc)
        + image[r1, c1] * fr * fc
    )
    out[~valid] = 0.0
    return out, valid


_DUMP_MAGIC = "<iii"


def save_response_dump(resp: ResponseMaps, path: str | Path, component: str = "energy") -> None:
    """Flat binary dump: width, height, O as little-endian int32, then
    float64 values in (orientation, row, col) order."""
    arr = getattr(resp, component)
    n_orient, height, width = arr.shape
    payload = struct.pack(_DUMP_MAGIC, width, height, n_orient)
    payload += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(payload)


def load_response_dump(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    head = struct.calcsize(_DUMP_MAGIC)
    width, height, n_orient = struct.unpack(_DUMP_MAGIC, raw[:head])
    count = width * height * n_orient
    arr = np.frombuffer(raw[head:], dtype="<f8", count=count)
    return arr.reshape(n_orient, height, width).copy()
