"""Numpy/scipy reference implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable and
the ground truth the extension is tested against.  Both kernels use direct
(non-FFT) arithmetic so results are deterministic and exactly translation
equivariant.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import correlate


def correlate_valid(image: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Valid-mode sliding dot products of ``kernels`` (K, L, L) over ``image``."""
    out = [
        correlate(image, k, mode="valid", method="direct") for k in kernels
    ]
    return np.stack(out)


def local_max_pool(
    maps: np.ndarray, offsets: np.ndarray, counts: np.ndarray
) -> np.ndarray:
    """Max over perturbed poses for every entry of orientation maps.

    ``maps`` has shape (O, H, W).  ``offsets[o, :counts[o]]`` lists the
    ``(do, drow, dcol)`` perturbations for nominal orientation ``o``;
    orientation indices wrap modulo O and out-of-bounds spatial candidates
    are skipped.
    """
    n_orient, height, width = maps.shape
    out = np.empty_like(maps)
    for o in range(n_orient):
        acc = None
        for do, dr, dc in offsets[o, : counts[o]]:
            src = maps[(o + do) % n_orient]
            t_r0, t_r1 = max(0, -dr), height - max(0, dr)
            t_c0, t_c1 = max(0, -dc), width - max(0, dc)
            if t_r0 >= t_r1 or t_c0 >= t_c1:
                continue
            view = src[t_r0 + dr : t_r1 + dr, t_c0 + dc : t_c1 + dc]
            if acc is None:
                acc = np.full((height, width), -np.inf)
                acc[t_r0:t_r1, t_c0:t_c1] = view
            else:
                np.maximum(acc[t_r0:t_r1, t_c0:t_c1], view, out=acc[t_r0:t_r1, t_c0:t_c1])
        out[o] = acc
    return out
