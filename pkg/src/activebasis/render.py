"""Bar-sketch rendering of templates and detection overlays."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .gabor import Dictionary
from .pursuit import ActiveBasisTemplate, DeformedTemplate

__all__ = [
    "render_sketch",
    "render_template_signal",
    "overlay_sketch",
    "save_png",
]

BAR_THICKNESS = 2.0


def _draw_bar(
    canvas: np.ndarray,
    row: float,
    col: float,
    angle: float,
    length: float,
    intensity: float,
    thickness: float = BAR_THICKNESS,
) -> None:
    """Max-composite a bar along the element's elongated axis."""
    # The wave runs along (cos a, sin a); the stroke is the perpendicular.
    ax_c, ax_r = -math.sin(angle), math.cos(angle)
    half = length / 2.0
    r_lo = max(0, int(math.floor(row - half - thickness)))
    r_hi = min(canvas.shape[0] - 1, int(math.ceil(row + half + thickness)))
    c_lo = max(0, int(math.floor(col - half - thickness)))
    c_hi = min(canvas.shape[1] - 1, int(math.ceil(col + half + thickness)))
    if r_lo > r_hi or c_lo > c_hi:
        return
    rr, cc = np.mgrid[r_lo : r_hi + 1, c_lo : c_hi + 1]
    dr = rr - row
    dc = cc - col
    along = dr * ax_r + dc * ax_c
    across = dr * ax_c - dc * ax_r
    hit = (np.abs(along) <= half) & (np.abs(across) <= thickness / 2.0)
    region = canvas[r_lo : r_hi + 1, c_lo : c_hi + 1]
    np.maximum(region, np.where(hit, intensity, 0.0), out=region)


def render_sketch(
    template: ActiveBasisTemplate,
    canvas_shape: tuple[int, int] | None = None,
    deformed: DeformedTemplate | None = None,
    n: int | None = None,
) -> np.ndarray:
    """Draw each element as a bar at its (possibly perturbed) pose.

    Bar intensity is the element weight normalized by the template maximum;
    an empty template yields a blank canvas.  ``n`` limits rendering to the
    first selected elements, which reproduces the per-step sketch sequence.
    """
    shape = canvas_shape or template.shape
    canvas = np.zeros(shape)
    count = template.n if n is None else min(n, template.n)
    if count == 0:
        return canvas
    lam_max = max((w.lam for w in template.weights[:count]), default=0.0)
    step = math.pi / template.params.orientations
    for i in range(count):
        elem = template.elements[i]
        row, col, o = elem.row, elem.col, elem.orientation
        if deformed is not None:
            drow, dcol = deformed.offsets[i]
            row, col = row + drow, col + dcol
            o = (o + deformed.activities[i][1]) % template.params.orientations
        intensity = (
            template.weights[i].lam / lam_max if lam_max > 0 else 0.0
        )
        _draw_bar(canvas, row, col, o * step, template.params.length_px, intensity)
    return canvas


def render_template_signal(
    template: ActiveBasisTemplate,
    dictionary: Dictionary,
    canvas_shape: tuple[int, int] | None = None,
    center: tuple[int, int] | None = None,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Superpose the cosine component of every element onto a canvas.

    Produces an image whose filter responses peak exactly at the template
    poses; used for render-and-detect round trips.
    """
    shape = canvas_shape or template.shape
    canvas = np.zeros(shape)
    cy, cx = center if center is not None else (shape[0] // 2, shape[1] // 2)
    half = dictionary.margin
    for dr, dc, o in template.offsets_from_center():
        r, c = cy + dr, cx + dc
        if r - half < 0 or r + half >= shape[0] or c - half < 0 or c + half >= shape[1]:
            continue
        canvas[r - half : r + half + 1, c - half : c + half + 1] += (
            amplitude * dictionary.prototypes[o].cos_map
        )
    return canvas


def render_detection_sketch(
    template: ActiveBasisTemplate,
    detection,
    canvas_shape: tuple[int, int],
) -> np.ndarray:
    """Bars of the deformed template at a detected placement."""
    canvas = np.zeros(canvas_shape)
    lam_max = max((w.lam for w in template.weights), default=0.0)
    step = math.pi / template.params.orientations
    for (dr, dc, o), (_, do), (orow, ocol), w in zip(
        template.offsets_from_center(),
        detection.activities,
        detection.offsets,
        template.weights,
    ):
        angle = ((o + do) % template.params.orientations) * step
        intensity = w.lam / lam_max if lam_max > 0 else 0.0
        _draw_bar(
            canvas,
            detection.row + dr + orow,
            detection.col + dc + ocol,
            angle,
            template.params.length_px,
            intensity,
        )
    return canvas


def overlay_sketch(image: np.ndarray, sketch: np.ndarray) -> np.ndarray:
    """Dim the image and max-composite the sketch on top."""
    lo, hi = float(image.min()), float(image.max())
    base = (image - lo) / (hi - lo) if hi > lo else np.zeros_like(image)
    return np.maximum(0.6 * base, sketch)


def save_png(array: np.ndarray, path: str | Path) -> None:
    """Write a [0, 1] grayscale array as an 8-bit PNG."""
    clipped = np.clip(array, 0.0, 1.0)
    data = np.rint(clipped * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")
