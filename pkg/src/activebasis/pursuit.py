"""Greedy template learning by shared sketching.

The shared sketch loop selects wavelet elements one at a time.  Each step
picks the pose whose weighted sum of locally max-pooled saturated energies
over the training images is largest, lets every image perturb that element
within its activity set, fits the element's tilt weight from the weighted
mean of saturated energies, and then suppresses responses correlated with
each image's perturbed copy so later elements stay nearly orthogonal.

A single-image matching pursuit with residual subtraction is also provided;
it drives the single-image initialization path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, MarginError, SizeError
from .gabor import Dictionary, GaborParams
from .images import ResponseMaps, compute_responses
from .stats import ElementWeight, ReferenceModel, saturate

__all__ = [
    "ActivitySet",
    "Activity",
    "TemplateElement",
    "ActiveBasisTemplate",
    "DeformedTemplate",
    "WeightedImage",
    "matching_pursuit",
    "shared_sketch",
    "retrieve_activity",
    "inhibit",
    "inhibition_footprint",
]

DEFAULT_EPSILON = 0.1


@lru_cache(maxsize=32)
def _activity_offsets(
    b1: int, b2: float, orientations: int
) -> tuple[np.ndarray, np.ndarray]:
    """Integer perturbations per nominal orientation, in tie-break order.

    Returns ``(offsets, counts)`` where ``offsets[o, :counts[o]]`` holds
    ``(do, drow, dcol, d)`` rows.  Candidates are ordered by (|d|, |dalpha|,
    d, dalpha) so that an argmax scanned in order resolves ties toward the
    smallest perturbation; duplicates after lattice rounding keep the
    earliest entry.
    """
    step = math.pi / orientations
    n_do = int(math.floor(b2 / step + 1e-9))
    pairs = sorted(
        (
            (d, do)
            for d in range(-b1, b1 + 1)
            for do in range(-n_do, n_do + 1)
        ),
        key=lambda p: (abs(p[0]), abs(p[1]), p[0], p[1]),
    )
    per_orient = []
    for k in range(orientations):
        alpha = k * step
        seen = set()
        rows = []
        for d, do in pairs:
            drow = int(np.rint(d * math.sin(alpha)))
            dcol = int(np.rint(d * math.cos(alpha)))
            key = (do, drow, dcol)
            if key in seen:
                continue
            seen.add(key)
            rows.append((do, drow, dcol, d))
        per_orient.append(rows)
    counts = np.array([len(r) for r in per_orient], dtype=np.int64)
    offsets = np.zeros((orientations, int(counts.max()), 4), dtype=np.int64)
    for k, rows in enumerate(per_orient):
        offsets[k, : len(rows)] = rows
    return offsets, counts


@dataclass(frozen=True)
class ActivitySet:
    """Allowed per-image perturbations of a template element.

    ``b1`` bounds the shift along the element normal in pixels and ``b2``
    the orientation shift in radians; the no-perturbation option is always
    a member.
    """

    b1: int = 6
    b2: float = math.pi / 15

    def __post_init__(self) -> None:
        if self.b1 < 0 or self.b2 < 0:
            raise ConfigurationError("activity bounds must be nonnegative")

    def offsets(self, orientations: int) -> tuple[np.ndarray, np.ndarray]:
        return _activity_offsets(self.b1, self.b2, orientations)


@dataclass(frozen=True)
class TemplateElement:
    row: int
    col: int
    orientation: int  # dictionary orientation index


@dataclass
class ActiveBasisTemplate:
    """Selected elements with their tilt weights: the deformable template."""

    shape: tuple[int, int]  # training lattice (H, W)
    params: GaborParams
    elements: list[TemplateElement]
    weights: list[ElementWeight]
    ref: ReferenceModel

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def center(self) -> tuple[int, int]:
        return self.shape[0] // 2, self.shape[1] // 2

    def offsets_from_center(self) -> list[tuple[int, int, int]]:
        """(drow, dcol, orientation) for each element, center-relative."""
        cy, cx = self.center
        return [(e.row - cy, e.col - cx, e.orientation) for e in self.elements]

    def prefix(self, n: int) -> "ActiveBasisTemplate":
        """Template restricted to the first ``n`` selected elements."""
        return ActiveBasisTemplate(
            self.shape, self.params, self.elements[:n], self.weights[:n], self.ref
        )


@dataclass
class DeformedTemplate:
    """One image's perturbed copy of the template with its coefficients."""

    image_id: object
    activities: list[tuple[int, int]]  # (d, dalpha index) per element
    offsets: list[tuple[int, int]]  # rounded (drow, dcol) per element
    coefficients: list[tuple[float, float]]
    energies: list[float]

    def poses(self, template: ActiveBasisTemplate) -> list[tuple[int, int, int]]:
        """Absolute (row, col, orientation) of each deformed element."""
        n_orient = template.params.orientations
        out = []
        for elem, (_, do), (drow, dcol) in zip(
            template.elements, self.activities, self.offsets
        ):
            out.append(
                (elem.row + drow, elem.col + dcol, (elem.orientation + do) % n_orient)
            )
        return out

    def score(self, template: ActiveBasisTemplate) -> float:
        """Recompute the matching score from stored energies."""
        total = 0.0
        for r, w in zip(self.energies, template.weights):
            total += w.lam * saturate(r, template.ref.xi) - w.log_z
        return total


@dataclass
class WeightedImage:
    """Mutable working response maps plus this image's vote weight."""

    responses: ResponseMaps
    weight: float = 1.0
    image_id: object = None


class Activity(tuple):
    """Retrieved perturbation: (d, dalpha_steps, drow, dcol, coeff, energy)."""

    __slots__ = ()

    @property
    def d(self) -> int:
        return self[0]

    @property
    def dalpha_steps(self) -> int:
        return self[1]

    @property
    def drow(self) -> int:
        return self[2]

    @property
    def dcol(self) -> int:
        return self[3]

    @property
    def coeff(self) -> tuple[float, float]:
        return self[4]

    @property
    def energy(self) -> float:
        return self[5]


def retrieve_activity(
    responses: ResponseMaps,
    row: int,
    col: int,
    orientation: int,
    act: ActivitySet,
) -> Activity:
    """Best perturbation of a nominal pose by response energy.

    Ties resolve toward the smallest shift, then the smallest orientation
    change.  Candidates outside the valid region are skipped; if none is
    valid a :class:`MarginError` is raised.
    """
    n_orient = responses.orientations
    offsets, counts = act.offsets(n_orient)
    r0, r1, c0, c1 = responses.valid_box()
    base = offsets[orientation % n_orient, : counts[orientation % n_orient]]
    best = None
    for do, drow, dcol, d in base:
        rr = row + drow
        cc = col + dcol
        if not (r0 <= rr <= r1 and c0 <= cc <= c1):
            continue
        o = (orientation + do) % n_orient
        e = responses.energy[o, rr, cc]
        if best is None or e > best[0]:
            best = (e, d, do, drow, dcol, o, rr, cc)
    if best is None:
        raise MarginError(f"no valid activity candidate at ({row}, {col})")
    e, d, do, drow, dcol, o, rr, cc = best
    coeff = (float(responses.cos[o, rr, cc]), float(responses.sin[o, rr, cc]))
    return Activity((int(d), int(do), int(drow), int(dcol), coeff, float(e)))


def inhibition_footprint(
    dictionary: Dictionary,
    shape: tuple[int, int],
    row: int,
    col: int,
    orientation: int,
    eps: float = DEFAULT_EPSILON,
) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Poses correlated above ``eps`` with the element at the given pose.

    Returns per-orientation ``(o, rows, cols)`` index arrays clipped to the
    lattice.
    """
    height, width = shape
    foot = dictionary.footprint(eps)[orientation % dictionary.orientations]
    out = []
    for o in range(dictionary.orientations):
        dys, dxs = foot[o]
        rows = row - dys
        cols = col - dxs
        keep = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
        if np.any(keep):
            out.append((o, rows[keep], cols[keep]))
    return out


def inhibit(
    responses: ResponseMaps,
    dictionary: Dictionary,
    row: int,
    col: int,
    orientation: int,
    eps: float = DEFAULT_EPSILON,
) -> None:
    """Zero all responses correlated above ``eps`` with the given pose."""
    for o, rows, cols in inhibition_footprint(
        dictionary, responses.shape, row, col, orientation, eps
    ):
        responses.cos[o, rows, cols] = 0.0
        responses.sin[o, rows, cols] = 0.0
        responses.energy[o, rows, cols] = 0.0


def _soft_update(
    responses: ResponseMaps,
    dictionary: Dictionary,
    row: int,
    col: int,
    orientation: int,
    coeff: tuple[float, float],
) -> None:
    """Residual-style response update: subtract the selected element's
    projection from every overlapping pose instead of zeroing."""
    length = dictionary.length
    height, width = responses.shape
    table = dictionary.pair_inner_table
    c0, c1 = coeff
    r_lo = max(0, row - (length - 1))
    r_hi = min(height - 1, row + (length - 1))
    c_lo = max(0, col - (length - 1))
    c_hi = min(width - 1, col + (length - 1))
    rows = np.arange(r_lo, r_hi + 1)
    cols = np.arange(c_lo, c_hi + 1)
    dys = (row - rows) + (length - 1)
    dxs = (col - cols) + (length - 1)
    for o in range(dictionary.orientations):
        block = table[o, orientation % dictionary.orientations][np.ix_(dys, dxs)]
        responses.cos[o, r_lo : r_hi + 1, c_lo : c_hi + 1] -= (
            c0 * block[..., 0, 0] + c1 * block[..., 0, 1]
        )
        responses.sin[o, r_lo : r_hi + 1, c_lo : c_hi + 1] -= (
            c0 * block[..., 1, 0] + c1 * block[..., 1, 1]
        )
    region = (slice(None), slice(r_lo, r_hi + 1), slice(c_lo, c_hi + 1))
    responses.energy[region] = (
        responses.cos[region] ** 2 + responses.sin[region] ** 2
    )


def _zero_margins(maps: np.ndarray, margin: int) -> None:
    maps[:, :margin, :] = 0.0
    maps[:, maps.shape[1] - margin :, :] = 0.0
    maps[:, :, :margin] = 0.0
    maps[:, :, maps.shape[2] - margin :] = 0.0


def _argmax_pose(index: np.ndarray, margin: int) -> tuple[int, int, int, float]:
    """Argmax over the valid region with row-major, then orientation ties."""
    n_orient, height, width = index.shape
    interior = index[:, margin : height - margin, margin : width - margin]
    scan = np.moveaxis(interior, 0, -1)  # (h, w, O): row-major then orientation
    flat = int(np.argmax(scan))
    value = float(scan.flat[flat])
    h_i = scan.shape[1] * scan.shape[2]
    r = flat // h_i
    c = (flat % h_i) // scan.shape[2]
    o = flat % scan.shape[2]
    return o, r + margin, c + margin, value


def shared_sketch(
    images: Sequence[WeightedImage],
    dictionary: Dictionary,
    act: ActivitySet,
    ref: ReferenceModel,
    n: int,
    eps: float = DEFAULT_EPSILON,
    inhibition: str = "zero",
    trace: list | None = None,
) -> tuple[ActiveBasisTemplate, list[DeformedTemplate], np.ndarray]:
    """Learn a template shared by weighted images.

    The per-image response maps are consumed as working state.  Returns the
    template, one deformed copy per image, and the per-image matching
    scores accumulated element by element.  Stops early (with a warning)
    when every remaining response has been suppressed.
    """
    if not images:
        raise ConfigurationError("shared_sketch needs at least one image")
    if inhibition not in ("zero", "subtract"):
        raise ConfigurationError(f"unknown inhibition mode {inhibition!r}")
    shapes = {im.responses.shape for im in images}
    if len(shapes) != 1:
        raise ConfigurationError(f"images must share one lattice, got {shapes}")
    height, width = shapes.pop()
    weights_arr = np.array([im.weight for im in images], dtype=np.float64)
    if np.any(weights_arr < 0) or weights_arr.sum() <= 0:
        raise ConfigurationError("image weights must be nonnegative with positive sum")
    n_orient = dictionary.orientations
    margin = dictionary.margin
    offsets, counts = act.offsets(n_orient)

    h_maps = []
    for im in images:
        hm = saturate(im.responses.energy, ref.xi)
        _zero_margins(hm, margin)
        h_maps.append(hm)

    elements: list[TemplateElement] = []
    elem_weights: list[ElementWeight] = []
    deformed = [
        DeformedTemplate(im.image_id if im.image_id is not None else k, [], [], [], [])
        for k, im in enumerate(images)
    ]
    scores = np.zeros(len(images))
    weight_total = float(weights_arr.sum())

    pool_offsets = np.ascontiguousarray(offsets[:, :, :3])
    for step in range(n):
        index = np.zeros((n_orient, height, width))
        for k, im in enumerate(images):
            if weights_arr[k] == 0.0:
                continue
            pooled = kernels.local_max_pool(h_maps[k], pool_offsets, counts)
            index += weights_arr[k] * pooled
        o_sel, r_sel, c_sel, value = _argmax_pose(index, margin)
        if value <= 0.0:
            warnings.warn(
                f"responses exhausted after {step} elements (requested {n})",
                stacklevel=2,
            )
            break

        h_sum = 0.0
        retrieved = []
        for k, im in enumerate(images):
            a = retrieve_activity(im.responses, r_sel, c_sel, o_sel, act)
            retrieved.append(a)
            h_sum += weights_arr[k] * saturate(a.energy, ref.xi)
        target = h_sum / weight_total
        weight = ref.solve(target)

        elements.append(TemplateElement(r_sel, c_sel, o_sel))
        elem_weights.append(weight)
        for k, a in enumerate(retrieved):
            dt = deformed[k]
            dt.activities.append((a.d, a.dalpha_steps))
            dt.offsets.append((a.drow, a.dcol))
            dt.coefficients.append(a.coeff)
            dt.energies.append(a.energy)
            scores[k] += weight.lam * saturate(a.energy, ref.xi) - weight.log_z

            coeff = a.coeff
            pose_r, pose_c = r_sel + a.drow, c_sel + a.dcol
            pose_o = (o_sel + a.dalpha_steps) % n_orient
            im = images[k]
            if inhibition == "zero":
                foot = inhibition_footprint(
                    dictionary, (height, width), pose_r, pose_c, pose_o, eps
                )
                for o, rows, cols in foot:
                    im.responses.cos[o, rows, cols] = 0.0
                    im.responses.sin[o, rows, cols] = 0.0
                    im.responses.energy[o, rows, cols] = 0.0
                    h_maps[k][o, rows, cols] = 0.0
            else:
                _soft_update(im.responses, dictionary, pose_r, pose_c, pose_o, coeff)
                h_maps[k] = saturate(im.responses.energy, ref.xi)
                _zero_margins(h_maps[k], margin)

        if trace is not None:
            trace.append(
                {
                    "step": step,
                    "row": r_sel,
                    "col": c_sel,
                    "orientation": o_sel,
                    "index": value,
                    "target": target,
                    "lam": weight.lam,
                }
            )

    template = ActiveBasisTemplate(
        shape=(height, width),
        params=dictionary.params,
        elements=elements,
        weights=elem_weights,
        ref=ref,
    )
    return template, deformed, scores


def matching_pursuit(
    image: np.ndarray, dictionary: Dictionary, n: int
) -> tuple[list[TemplateElement], list[tuple[float, float]], np.ndarray]:
    """Single-image matching pursuit with residual subtraction.

    Each step selects the pose with maximal residual energy, records its
    cosine/sine coefficients and subtracts the projection from the residual.
    Only responses whose support overlaps the update window are recomputed.
    """
    height, width = image.shape
    length = dictionary.length
    margin = dictionary.margin
    valid_positions = (
        max(0, height - 2 * margin) * max(0, width - 2 * margin)
    ) * dictionary.orientations
    if n < 1 or n > valid_positions:
        raise SizeError(f"cannot select {n} elements from {valid_positions} poses")

    residual = np.array(image, dtype=np.float64, copy=True)
    resp = compute_responses(residual, dictionary)
    elements: list[TemplateElement] = []
    coeffs: list[tuple[float, float]] = []
    half = dictionary.margin
    for _ in range(n):
        o, r, c, value = _argmax_pose(resp.energy, margin)
        c0 = float(resp.cos[o, r, c])
        c1 = float(resp.sin[o, r, c])
        elements.append(TemplateElement(r, c, o))
        coeffs.append((c0, c1))
        proto = dictionary.prototypes[o]
        residual[r - half : r + half + 1, c - half : c + half + 1] -= (
            c0 * proto.cos_map + c1 * proto.sin_map
        )
        # Refresh responses whose support intersects the changed window.
        r_lo = max(margin, r - (length - 1))
        r_hi = min(height - 1 - margin, r + (length - 1))
        c_lo = max(margin, c - (length - 1))
        c_hi = min(width - 1 - margin, c + (length - 1))
        patch = residual[r_lo - half : r_hi + half + 1, c_lo - half : c_hi + half + 1]
        stack = kernels.correlate_valid(
            np.ascontiguousarray(patch), dictionary.kernel_stack
        )
        n_orient = dictionary.orientations
        sl = (slice(None), slice(r_lo, r_hi + 1), slice(c_lo, c_hi + 1))
        resp.cos[sl] = stack[:n_orient]
        resp.sin[sl] = stack[n_orient:]
        resp.energy[sl] = resp.cos[sl] ** 2 + resp.sin[sl] ** 2
    return elements, coeffs, residual
