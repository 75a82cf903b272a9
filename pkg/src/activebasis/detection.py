"""Template matching by sum-max maps.

Scoring a template everywhere factors into three passes: saturate all
response energies (SUM1), pool each pose over its activity set (MAX1), and
accumulate the weighted template sum at every placement (SUM2).  Detection
runs the passes at several resolutions and keeps the best-scoring placement,
then retrieves the per-element perturbations at that placement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SizeError
from .gabor import Dictionary
from .images import ResponseMaps, compute_responses, normalize_image, resample
from .pursuit import ActiveBasisTemplate, ActivitySet, retrieve_activity
from .stats import ReferenceModel, saturate

__all__ = ["sum1", "max1", "sum2", "detect", "Sum2Map", "Detection"]


def sum1(image: np.ndarray, dictionary: Dictionary, ref: ReferenceModel) -> np.ndarray:
    """Saturated response energies h(|<I, B>|^2), shape (O, H, W)."""
    resp = compute_responses(image, dictionary)
    return saturate(resp.energy, ref.xi)


def max1(
    sum1_map: np.ndarray, act: ActivitySet, dictionary: Dictionary
) -> np.ndarray:
    """Local max of SUM1 over each pose's activity set.

    Margin entries are reset to zero afterwards so they stay invalid.
    """
    offsets, counts = act.offsets(dictionary.orientations)
    pooled = kernels.local_max_pool(
        np.ascontiguousarray(sum1_map), np.ascontiguousarray(offsets[:, :, :3]), counts
    )
    m = dictionary.margin
    pooled[:, :m, :] = 0.0
    pooled[:, pooled.shape[1] - m :, :] = 0.0
    pooled[:, :, :m] = 0.0
    pooled[:, :, pooled.shape[2] - m :] = 0.0
    return pooled


@dataclass
class Sum2Map:
    """Template score over valid placements of the template center.

    ``scores[i, j]`` is the score with the center at ``(row0 + i, col0 + j)``.
    Placements are restricted so the whole template, expanded by the maximal
    location perturbation, stays inside the valid response region.
    """

    scores: np.ndarray
    row0: int
    col0: int
    factor: float = 1.0

    def argmax(self) -> tuple[int, int, float]:
        """Best placement (row, col, score); ties resolve row-major."""
        flat = int(np.argmax(self.scores))
        r, c = divmod(flat, self.scores.shape[1])
        return self.row0 + r, self.col0 + c, float(self.scores[r, c])


def _placement_bounds(
    shape: tuple[int, int],
    template: ActiveBasisTemplate,
    act: ActivitySet,
    margin: int,
    fit_shape: tuple[int, int] | None = None,
) -> tuple[int, int, int, int]:
    height, width = shape
    offs = template.offsets_from_center()
    drs = [dr for dr, _, _ in offs] or [0]
    dcs = [dc for _, dc, _ in offs] or [0]
    pad = margin + act.b1
    r0 = pad - min(drs)
    r1 = height - 1 - pad - max(drs)
    c0 = pad - min(dcs)
    c1 = width - 1 - pad - max(dcs)
    if fit_shape is not None:
        th, tw = fit_shape
        cy, cx = th // 2, tw // 2
        r0 = max(r0, cy)
        r1 = min(r1, height - (th - cy))
        c0 = max(c0, cx)
        c1 = min(c1, width - (tw - cx))
    if r1 < r0 or c1 < c0:
        raise SizeError(
            f"template does not fit a {height}x{width} lattice at margin {margin}"
        )
    return r0, r1, c0, c1


def sum2(
    max1_map: np.ndarray,
    template: ActiveBasisTemplate,
    act: ActivitySet,
    dictionary: Dictionary,
    fit_shape: tuple[int, int] | None = None,
) -> Sum2Map:
    """Accumulate the per-element score terms at every valid placement."""
    _, height, width = max1_map.shape
    r0, r1, c0, c1 = _placement_bounds(
        (height, width), template, act, dictionary.margin, fit_shape
    )
    scores = np.zeros((r1 - r0 + 1, c1 - c0 + 1))
    for (dr, dc, o), w in zip(template.offsets_from_center(), template.weights):
        scores += (
            w.lam * max1_map[o, r0 + dr : r1 + dr + 1, c0 + dc : c1 + dc + 1]
            - w.log_z
        )
    return Sum2Map(scores=scores, row0=r0, col0=c0)


@dataclass
class Detection:
    """Best placement with the deformed template retrieved there."""

    row: int  # template-center placement in level coordinates
    col: int
    factor: float
    score: float
    level_shape: tuple[int, int]
    activities: list[tuple[int, int]]  # (d, dalpha index) per element
    offsets: list[tuple[int, int]]
    coefficients: list[tuple[float, float]]
    energies: list[float]

    def score_from_activities(self, template: ActiveBasisTemplate) -> float:
        """Recompute the score from retrieved energies; must match `score`."""
        total = 0.0
        for r, w in zip(self.energies, template.weights):
            total += w.lam * saturate(r, template.ref.xi) - w.log_z
        return total


def _retrieve_at(
    resp: ResponseMaps,
    template: ActiveBasisTemplate,
    act: ActivitySet,
    row: int,
    col: int,
) -> tuple[list, list, list, list]:
    activities, offsets, coefficients, energies = [], [], [], []
    for dr, dc, o in template.offsets_from_center():
        a = retrieve_activity(resp, row + dr, col + dc, o, act)
        activities.append((a.d, a.dalpha_steps))
        offsets.append((a.drow, a.dcol))
        coefficients.append(a.coeff)
        energies.append(a.energy)
    return activities, offsets, coefficients, energies


def detect(
    image: np.ndarray,
    template: ActiveBasisTemplate,
    factors: list[float],
    act: ActivitySet,
    dictionary: Dictionary,
    fit_shape: tuple[int, int] | None = None,
) -> Detection:
    """Find the maximum-likelihood placement over locations and resolutions.

    Each pyramid level is normalized independently.  Resolutions are scanned
    from the highest factor down, so score ties keep the higher-resolution
    level; within a level ties resolve row-major.
    """
    best = None
    for factor in sorted(set(factors), reverse=True):
        level = resample(image, factor)
        if min(level.shape) < dictionary.length:
            warnings.warn(f"resolution {factor} skipped: level too small", stacklevel=2)
            continue
        try:
            normalized = normalize_image(level, dictionary)
            s1 = sum1(normalized, dictionary, template.ref)
            m1 = max1(s1, act, dictionary)
            s2 = sum2(m1, template, act, dictionary, fit_shape)
        except SizeError as exc:
            warnings.warn(f"resolution {factor} skipped: {exc}", stacklevel=2)
            continue
        row, col, score = s2.argmax()
        if best is None or score > best[0]:
            best = (score, factor, row, col, level.shape, normalized)
    if best is None:
        raise SizeError("no pyramid level admits the template")
    score, factor, row, col, level_shape, normalized = best
    resp = compute_responses(normalized, dictionary)
    activities, offsets, coefficients, energies = _retrieve_at(
        resp, template, act, row, col
    )
    return Detection(
        row=row,
        col=col,
        factor=factor,
        score=score,
        level_shape=level_shape,
        activities=activities,
        offsets=offsets,
        coefficients=coefficients,
        energies=energies,
    )
