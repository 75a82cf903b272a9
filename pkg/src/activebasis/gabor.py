"""Fixed-scale Gabor wavelet dictionary.

Each dictionary element is a cosine/sine pair obtained by rotating an
elongated Gaussian envelope modulated by a wave that propagates along the
envelope's short axis.  Both components are truncated to a square support,
mean-subtracted and scaled to unit l2 norm, which makes the pair orthogonal
on a centered odd-sized grid.

Coordinates follow image conventions: a position is ``(row, col)``, the
orientation angle is measured from the horizontal (column) axis toward the
vertical (row) axis, and orientations live on ``[0, pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "GaborParams",
    "GaborElement",
    "Dictionary",
    "make_gabor",
    "correlation",
]


@dataclass(frozen=True)
class GaborParams:
    """Geometry of the wavelet family.

    ``length_px`` is the side of the square support and must be odd so a
    center pixel exists.  ``orientations`` is the number of equally spaced
    orientations ``k * pi / orientations``.  The Gaussian envelope has short
    axis ``sigma1 = sigma1_frac * (length_px - 1) / 2`` and long axis
    ``sigma2 = aspect * sigma1``.  ``cycles`` sets the wave period so that
    the support spans that many full cycles.
    """

    length_px: int = 17
    orientations: int = 15
    aspect: float = 2.0
    sigma1_frac: float = 0.265625
    cycles: float = 2.5

    def __post_init__(self) -> None:
        if self.length_px < 5 or self.length_px % 2 == 0:
            raise ConfigurationError(
                f"length_px must be odd and >= 5, got {self.length_px}"
            )
        if self.orientations < 2:
            raise ConfigurationError(
                f"orientations must be >= 2, got {self.orientations}"
            )
        if self.aspect <= 1.0:
            raise ConfigurationError(f"aspect must exceed 1, got {self.aspect}")
        if self.sigma1_frac <= 0.0:
            raise ConfigurationError("sigma1_frac must be positive")
        if self.cycles <= 0.0:
            raise ConfigurationError("cycles must be positive")

    @property
    def half(self) -> int:
        return self.length_px // 2

    @property
    def margin(self) -> int:
        """Border width inside which responses are undefined."""
        return self.length_px // 2

    @property
    def sigma1(self) -> float:
        return self.sigma1_frac * (self.length_px - 1) / 2.0

    @property
    def sigma2(self) -> float:
        return self.aspect * self.sigma1

    @property
    def scale(self) -> float:
        """Wave period in pixels."""
        return self.length_px / self.cycles

    def angle(self, k: int) -> float:
        """Orientation angle of index ``k``."""
        return (k % self.orientations) * math.pi / self.orientations


@dataclass(frozen=True)
class GaborElement:
    """One cosine/sine pair at a lattice position and orientation.

    The maps are shared, read-only arrays; translating an element never
    re-synthesizes them.
    """

    center: tuple[int, int]  # (row, col)
    orientation: float  # radians in [0, pi)
    orientation_index: int
    scale: float  # wave period in pixels
    cos_map: np.ndarray = field(repr=False)
    sin_map: np.ndarray = field(repr=False)

    @property
    def length(self) -> int:
        return self.cos_map.shape[0]


def _normalize_component(m: np.ndarray) -> np.ndarray:
    m = m - m.mean()
    norm = float(np.linalg.norm(m))
    if norm <= 0.0:
        raise ConfigurationError("degenerate Gabor component (zero norm)")
    m /= norm
    m.setflags(write=False)
    return m


def make_gabor(params: GaborParams, alpha: float, s: float) -> GaborElement:
    """Synthesize one truncated Gabor pair centered at the origin.

    The continuous formula is evaluated at integer grid points, which keeps
    rotation exact and deterministic.  ``s`` is the wave period in pixels.
    """
    if not 0.0 <= alpha < math.pi:
        raise ConfigurationError(f"orientation must be in [0, pi), got {alpha}")
    if s <= 0.0:
        raise ConfigurationError(f"scale must be positive, got {s}")
    h = params.half
    v, u = np.mgrid[-h : h + 1, -h : h + 1].astype(np.float64)
    # Rotate into element coordinates: x1 along the wave, x2 along the bar.
    x1 = u * math.cos(alpha) + v * math.sin(alpha)
    x2 = -u * math.sin(alpha) + v * math.cos(alpha)
    envelope = np.exp(-0.5 * ((x1 / params.sigma1) ** 2 + (x2 / params.sigma2) ** 2))
    phase = (2.0 * math.pi / s) * x1
    cos_map = _normalize_component(envelope * np.cos(phase))
    sin_map = _normalize_component(envelope * np.sin(phase))
    index = int(round(alpha * params.orientations / math.pi)) % params.orientations
    return GaborElement(
        center=(0, 0),
        orientation=alpha,
        orientation_index=index,
        scale=s,
        cos_map=cos_map,
        sin_map=sin_map,
    )


class Dictionary:
    """All orientations of the wavelet pair at one fixed scale.

    Prototypes are synthesized once, centered at the origin; an element at
    any lattice point is the prototype with its center moved.  Instances are
    immutable after construction and safe to share across threads.
    """

    def __init__(self, params: GaborParams | None = None):
        self.params = params or GaborParams()
        p = self.params
        self.prototypes: tuple[GaborElement, ...] = tuple(
            make_gabor(p, p.angle(k), p.scale) for k in range(p.orientations)
        )

    @property
    def orientations(self) -> int:
        return self.params.orientations

    @property
    def length(self) -> int:
        return self.params.length_px

    @property
    def margin(self) -> int:
        return self.params.margin

    def at(self, row: int, col: int, k: int) -> GaborElement:
        """Element of orientation index ``k`` centered at ``(row, col)``."""
        return replace(self.prototypes[k % self.orientations], center=(row, col))

    @cached_property
    def kernel_stack(self) -> np.ndarray:
        """Cosine then sine prototype maps, shape (2*O, L, L)."""
        p = self.prototypes
        stack = np.stack([e.cos_map for e in p] + [e.sin_map for e in p])
        stack.setflags(write=False)
        return stack

    @cached_property
    def pair_inner_table(self) -> np.ndarray:
        """Inner products between every prototype pair at every offset.

        ``table[o1, o2, dy + L - 1, dx + L - 1, e1, e2]`` is the inner
        product of component ``e1`` of orientation ``o1`` at the origin with
        component ``e2`` of orientation ``o2`` centered at ``(dy, dx)``.
        """
        L = self.length
        O = self.orientations
        comp = np.stack(
            [[e.cos_map, e.sin_map] for e in self.prototypes]
        )  # (O, 2, L, L)
        flat_dim = 2 * O
        table = np.zeros((O, O, 2 * L - 1, 2 * L - 1, 2, 2))
        for dy in range(-L + 1, L):
            a_r0, a_r1 = max(0, dy), L + min(0, dy)
            b_r0, b_r1 = max(0, -dy), L + min(0, -dy)
            for dx in range(-L + 1, L):
                a_c0, a_c1 = max(0, dx), L + min(0, dx)
                b_c0, b_c1 = max(0, -dx), L + min(0, -dx)
                a = comp[:, :, a_r0:a_r1, a_c0:a_c1].reshape(flat_dim, -1)
                b = comp[:, :, b_r0:b_r1, b_c0:b_c1].reshape(flat_dim, -1)
                prod = (a @ b.T).reshape(O, 2, O, 2)
                table[:, :, dy + L - 1, dx + L - 1] = prod.transpose(0, 2, 1, 3)
        table.setflags(write=False)
        return table

    @cached_property
    def correlation_table(self) -> np.ndarray:
        """Sum of squared pair inner products, shape (O, O, 2L-1, 2L-1)."""
        t = (self.pair_inner_table**2).sum(axis=(-2, -1))
        t.setflags(write=False)
        return t

    def footprint(self, eps: float) -> list[list[tuple[np.ndarray, np.ndarray]]]:
        """Relative poses correlated above ``eps`` with a selected element.

        ``footprint(eps)[o_sel][o]`` is a pair of index arrays ``(dys, dxs)``
        such that an element of orientation ``o`` at
        ``(row_sel - dy, col_sel - dx)`` has correlation above ``eps`` with a
        selected element of orientation ``o_sel`` at ``(row_sel, col_sel)``.
        """
        cache = self.__dict__.setdefault("_footprint_cache", {})
        if eps not in cache:
            L = self.length
            table = self.correlation_table
            out = []
            for o_sel in range(self.orientations):
                per_o = []
                for o in range(self.orientations):
                    dys, dxs = np.nonzero(table[o, o_sel] > eps)
                    per_o.append((dys - (L - 1), dxs - (L - 1)))
                out.append(per_o)
            cache[eps] = out
        return cache[eps]


def correlation(b1: GaborElement, b2: GaborElement) -> float:
    """Squared-inner-product correlation between two elements.

    Sums ``<b1_e1, b2_e2>**2`` over the four component combinations,
    evaluated on the overlap of the two supports; disjoint supports give 0.
    This is the direct overlap computation and serves as the reference for
    the precomputed tables in :class:`Dictionary`.
    """
    if b1.length != b2.length or not math.isclose(b1.scale, b2.scale):
        raise ConfigurationError("elements must come from the same dictionary scale")
    L = b1.length
    dy = b2.center[0] - b1.center[0]
    dx = b2.center[1] - b1.center[1]
    if abs(dy) >= L or abs(dx) >= L:
        return 0.0
    a_r0, a_r1 = max(0, dy), L + min(0, dy)
    b_r0, b_r1 = max(0, -dy), L + min(0, -dy)
    a_c0, a_c1 = max(0, dx), L + min(0, dx)
    b_c0, b_c1 = max(0, -dx), L + min(0, -dx)
    total = 0.0
    for m1 in (b1.cos_map, b1.sin_map):
        for m2 in (b2.cos_map, b2.sin_map):
            inner = float(
                np.sum(m1[a_r0:a_r1, a_c0:a_c1] * m2[b_r0:b_r1, b_c0:b_c1])
            )
            total += inner * inner
    return total
