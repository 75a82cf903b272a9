"""Weakly supervised template learning by EM-type alternation.

Three latent-variable settings share one skeleton: a recognition E-step
imputes what is unknown about each training image (mirror state, rotation,
or location and scale) using the current template, and the M-step relearns
the template from the re-aligned evidence with the weighted shared sketch.

Flip and rotation learning keep soft posterior weights over the variant
copies of every image; location learning imputes the best placement hard,
because the placement posterior is sharply peaked in practice.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .detection import detect
from .errors import ConfigurationError, SizeError
from .gabor import Dictionary
from .images import compute_responses, normalize_image, resample, rotate_image
from .pursuit import (
    ActiveBasisTemplate,
    ActivitySet,
    DeformedTemplate,
    WeightedImage,
    shared_sketch,
)
from .stats import ReferenceModel

__all__ = [
    "mirror",
    "em_flip",
    "em_rotate",
    "em_locate",
    "FlipState",
    "RotationState",
    "AlignState",
]


def mirror(image: np.ndarray) -> np.ndarray:
    """Horizontal reflection about the vertical center axis."""
    return np.ascontiguousarray(image[:, ::-1])


def flip_posterior(
    score_kept: np.ndarray, score_mirrored: np.ndarray, rho: float
) -> np.ndarray:
    """Posterior probability that each image is in template orientation.

    Computed in log space so score differences of hundreds of nats neither
    overflow nor underflow.
    """
    if rho <= 0.0:
        return np.zeros_like(np.asarray(score_kept, dtype=np.float64))
    if rho >= 1.0:
        return np.ones_like(np.asarray(score_kept, dtype=np.float64))
    logit = (
        math.log(rho)
        - math.log1p(-rho)
        + np.asarray(score_kept, dtype=np.float64)
        - np.asarray(score_mirrored, dtype=np.float64)
    )
    out = np.empty_like(logit)
    pos = logit >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-logit[pos]))
    enl = np.exp(logit[~pos])
    out[~pos] = enl / (1.0 + enl)
    return out


@dataclass
class FlipState:
    """Per-image posterior of being un-mirrored, plus the mixture prior."""

    z_hat: np.ndarray
    rho: float

    @property
    def assignments(self) -> np.ndarray:
        return self.z_hat > 0.5


@dataclass
class RotationState:
    """Per-image posterior over the discrete rotation set."""

    weights: np.ndarray  # (M, R), rows sum to 1
    priors: np.ndarray  # (R,)

    @property
    def assignments(self) -> np.ndarray:
        return np.argmax(self.weights, axis=1)


@dataclass
class AlignState:
    """Hard-imputed placement, resolution, and score per image."""

    rows: np.ndarray
    cols: np.ndarray
    factors: np.ndarray
    scores: np.ndarray
    flipped: np.ndarray
    included: np.ndarray


def _normalized_responses(images, dictionary):
    return [compute_responses(normalize_image(img, dictionary), dictionary) for img in images]


def em_flip(
    images: list[np.ndarray],
    dictionary: Dictionary,
    act: ActivitySet,
    ref: ReferenceModel,
    n: int,
    iters: int = 3,
    seed: int = 0,
    eps: float = 0.1,
    inhibition: str = "zero",
) -> tuple[ActiveBasisTemplate, FlipState, list[DeformedTemplate], list[dict]]:
    """Learn a template when each image may be mirrored.

    Every M-step sketches over the doubled image set, one original and one
    mirrored copy per image, weighted by the current posterior; the E-step
    recomputes the posteriors from the two matching scores.  The run report
    lists, per iteration, the prior estimate and posteriors, and flags the
    degenerate case where all score differences vanish.
    """
    m_count = len(images)
    if m_count < 2:
        raise ConfigurationError("flip learning needs at least two images")
    if iters < 1:
        raise ConfigurationError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    z_hat = rng.uniform(size=m_count)
    rho = float(z_hat.mean())

    resp_orig = _normalized_responses(images, dictionary)
    resp_mirr = _normalized_responses([mirror(img) for img in images], dictionary)

    template = None
    deformed_pairs: list[DeformedTemplate] = []
    report: list[dict] = []
    for it in range(iters):
        weighted = []
        for m in range(m_count):
            weighted.append(
                WeightedImage(resp_orig[m].copy(), float(z_hat[m]), (m, "kept"))
            )
            weighted.append(
                WeightedImage(resp_mirr[m].copy(), float(1.0 - z_hat[m]), (m, "mirrored"))
            )
        template, deformed_pairs, scores = shared_sketch(
            weighted, dictionary, act, ref, n, eps=eps, inhibition=inhibition
        )
        score_kept = scores[0::2]
        score_mirr = scores[1::2]
        degenerate = bool(np.max(np.abs(score_kept - score_mirr)) < 1e-12)
        if degenerate:
            warnings.warn("flip scores identical for all images", stacklevel=2)
        z_hat = flip_posterior(score_kept, score_mirr, rho)
        rho = float(z_hat.mean())
        report.append(
            {
                "iteration": it,
                "rho": rho,
                "z_hat": z_hat.tolist(),
                "score_kept": score_kept.tolist(),
                "score_mirrored": score_mirr.tolist(),
                "degenerate": degenerate,
                "template_elements": template.n,
                "template_snapshot": template,
            }
        )

    chosen = [
        deformed_pairs[2 * m] if z_hat[m] > 0.5 else deformed_pairs[2 * m + 1]
        for m in range(m_count)
    ]
    return template, FlipState(z_hat=z_hat, rho=rho), chosen, report


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=1, keepdims=True)


def _rotation_crop_box(shape: tuple[int, int], angles) -> tuple[slice, slice]:
    """Largest centered box valid under every rotation in the set."""
    height, width = shape
    mask = np.ones(shape, dtype=bool)
    for angle in angles:
        _, valid = rotate_image(np.zeros(shape), angle)
        mask &= valid
    for inset in range(0, min(height, width) // 2):
        r0, r1 = inset, height - inset
        c0, c1 = inset, width - inset
        if mask[r0:r1, c0:c1].all():
            return slice(r0, r1), slice(c0, c1)
    raise SizeError("rotation set leaves no valid interior")


def em_rotate(
    images: list[np.ndarray],
    dictionary: Dictionary,
    act: ActivitySet,
    ref: ReferenceModel,
    n: int,
    rotations: list[float],
    iters: int = 5,
    seed: int = 0,
    eps: float = 0.1,
) -> tuple[ActiveBasisTemplate, RotationState, list[DeformedTemplate], list[dict]]:
    """Learn a template when each image is rotated by an unknown member of a
    discrete angle set.

    The variant copies are the images resampled by each candidate's inverse
    rotation, cropped to the interior valid under all candidates; the E-step
    reweights the copies by the posterior over angles.
    """
    if 0.0 not in rotations:
        raise ConfigurationError("rotation set must include 0")
    if iters < 1:
        raise ConfigurationError("iters must be >= 1")
    m_count = len(images)
    if m_count < 1:
        raise ConfigurationError("rotation learning needs at least one image")
    n_rot = len(rotations)
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(n_rot), size=m_count)
    priors = weights.mean(axis=0)

    shape = images[0].shape
    rows, cols = _rotation_crop_box(shape, rotations)
    variants = []
    for img in images:
        if img.shape != shape:
            raise ConfigurationError("rotation learning requires a shared lattice")
        per = []
        for angle in rotations:
            rotated, _ = rotate_image(img, -angle)
            per.append(rotated[rows, cols])
        variants.append(_normalized_responses(per, dictionary))

    template = None
    deformed_all: list[DeformedTemplate] = []
    report: list[dict] = []
    for it in range(iters):
        weighted = []
        for m in range(m_count):
            for r in range(n_rot):
                weighted.append(
                    WeightedImage(variants[m][r].copy(), float(weights[m, r]), (m, r))
                )
        template, deformed_all, scores = shared_sketch(
            weighted, dictionary, act, ref, n, eps=eps
        )
        score_mat = scores.reshape(m_count, n_rot)
        with np.errstate(divide="ignore"):
            log_pri = np.where(priors > 0, np.log(priors, where=priors > 0), -np.inf)
        weights = _softmax_rows(log_pri[None, :] + score_mat)
        priors = weights.mean(axis=0)
        report.append(
            {
                "iteration": it,
                "priors": priors.tolist(),
                "weights": weights.tolist(),
                "scores": score_mat.tolist(),
                "template_elements": template.n,
                "template_snapshot": template,
            }
        )

    state = RotationState(weights=weights, priors=priors)
    chosen = [
        deformed_all[m * n_rot + int(state.assignments[m])] for m in range(m_count)
    ]
    return template, state, chosen, report


def _center_crop(image: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    th, tw = shape
    height, width = image.shape
    if height < th or width < tw:
        raise SizeError(f"image {image.shape} smaller than template lattice {shape}")
    r0 = (height - th) // 2
    c0 = (width - tw) // 2
    return image[r0 : r0 + th, c0 : c0 + tw].copy()


def _crop_at(level: np.ndarray, row: int, col: int, shape: tuple[int, int]) -> np.ndarray:
    th, tw = shape
    r0 = row - th // 2
    c0 = col - tw // 2
    return level[r0 : r0 + th, c0 : c0 + tw].copy()


def em_locate(
    images: list[np.ndarray],
    dictionary: Dictionary,
    act: ActivitySet,
    ref: ReferenceModel,
    n: int,
    factors: list[float],
    iters: int = 3,
    template_shape: tuple[int, int] | None = None,
    allow_flip: bool = False,
    eps: float = 0.1,
) -> tuple[ActiveBasisTemplate, AlignState, list[DeformedTemplate], list[dict]]:
    """Learn a template when objects sit at unknown locations and scales.

    Starts from a rigid sketch of the first image's center crop, then
    alternates detection (imputing each image's best placement and
    resolution, hard) with supervised sketching of the aligned crops.  With
    ``allow_flip`` the E-step also considers each image's mirror copy.
    """
    if not images:
        raise ConfigurationError("location learning needs at least one image")
    if iters < 1:
        raise ConfigurationError("iters must be >= 1")
    if template_shape is None:
        raise ConfigurationError("location learning requires a template lattice size")
    th, tw = template_shape
    if min(th, tw) < dictionary.length:
        raise ConfigurationError("template lattice smaller than the wavelet support")

    # Rigid single-image start: no perturbations while sketching image one.
    init_crop = None
    for factor in sorted(set(factors), key=lambda f: (abs(math.log(f)), -f)):
        level = resample(images[0], factor)
        if level.shape[0] >= th and level.shape[1] >= tw:
            init_crop = _center_crop(level, template_shape)
            break
    if init_crop is None:
        raise SizeError("first image admits no level as large as the template lattice")
    rigid = ActivitySet(0, 0.0)
    seed_image = WeightedImage(
        compute_responses(normalize_image(init_crop, dictionary), dictionary), 1.0, 0
    )
    template, _, _ = shared_sketch([seed_image], dictionary, rigid, ref, n, eps=eps)

    m_count = len(images)
    state = AlignState(
        rows=np.zeros(m_count, dtype=int),
        cols=np.zeros(m_count, dtype=int),
        factors=np.ones(m_count),
        scores=np.full(m_count, -np.inf),
        flipped=np.zeros(m_count, dtype=bool),
        included=np.zeros(m_count, dtype=bool),
    )
    report: list[dict] = []
    deformed: list[DeformedTemplate] = []
    prev_total = -np.inf
    for it in range(iters):
        crops = []
        for m, img in enumerate(images):
            candidates = [(img, False)]
            if allow_flip:
                candidates.append((mirror(img), True))
            best = None
            for cand, flipped in candidates:
                try:
                    det = detect(
                        cand, template, factors, act, dictionary,
                        fit_shape=template_shape,
                    )
                except SizeError:
                    continue
                if best is None or det.score > best[0].score:
                    best = (det, cand, flipped)
            if best is None:
                warnings.warn(f"image {m} admits no placement; excluded", stacklevel=2)
                state.included[m] = False
                continue
            det, cand, flipped = best
            state.rows[m] = det.row
            state.cols[m] = det.col
            state.factors[m] = det.factor
            state.scores[m] = det.score
            state.flipped[m] = flipped
            state.included[m] = True
            level = resample(cand, det.factor)
            crops.append((m, _crop_at(level, det.row, det.col, template_shape)))
        if not crops:
            raise SizeError("no image admits the template at any resolution")
        total = float(state.scores[state.included].sum())
        monotone = total >= prev_total - 1e-9
        weighted = [
            WeightedImage(
                compute_responses(normalize_image(crop, dictionary), dictionary),
                1.0,
                m,
            )
            for m, crop in crops
        ]
        template, deformed, _ = shared_sketch(
            weighted, dictionary, act, ref, n, eps=eps
        )
        report.append(
            {
                "iteration": it,
                "total_score": total,
                "monotone": monotone,
                "rows": state.rows.tolist(),
                "cols": state.cols.tolist(),
                "factors": state.factors.tolist(),
                "flipped": state.flipped.tolist(),
                "included": state.included.tolist(),
                "template_elements": template.n,
                "template_snapshot": template,
            }
        )
        if not monotone:
            warnings.warn(
                f"total imputed score decreased at iteration {it}", stacklevel=2
            )
        prev_total = total
    return template, state, deformed, report
