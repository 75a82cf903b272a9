"""Bundled synthetic background corpus.

A stand-in for a natural-image directory when none is supplied: dead-leaves
style textures (opaquely layered random discs) whose occlusion boundaries
give filter responses the heavy-tailed statistics the reference model needs.
Generation is seeded and independent of run configuration, so the corpus is
stable across runs like shipped data would be.
"""

from __future__ import annotations

import numpy as np

__all__ = ["synthetic_backgrounds", "SYNTHETIC_LABEL"]

SYNTHETIC_LABEL = "bundled-synthetic-dead-leaves-v1"
_SEED = 0x5EED5


def synthetic_backgrounds(
    count: int = 6, shape: tuple[int, int] = (96, 96), discs: int = 80
) -> list[np.ndarray]:
    rng = np.random.default_rng(_SEED)
    height, width = shape
    rr, cc = np.mgrid[0:height, 0:width]
    images = []
    for _ in range(count):
        canvas = np.full(shape, 0.5)
        for _ in range(discs):
            cy = rng.uniform(0, height)
            cx = rng.uniform(0, width)
            radius = rng.uniform(2.0, min(height, width) / 5.0)
            shade = rng.uniform(0.0, 1.0)
            canvas[(rr - cy) ** 2 + (cc - cx) ** 2 <= radius**2] = shade
        images.append(canvas)
    return images
