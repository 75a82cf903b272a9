"""Statistical scoring model for wavelet responses.

The reference distribution of the squared response ``r`` is pooled from
background images into a histogram.  Element coefficients are modeled by
exponentially tilting that reference along the saturated energy ``h(r)``:

    p(c; lam) = exp(lam * h(r)) * q(c) / Z(lam)

``Z`` and the mean function ``mu(lam) = E_lam[h(r)]`` are tabulated on a
lambda grid once, so that the maximum-likelihood weight for an observed mean
of ``h`` is a table lookup with linear interpolation.  An element at tilt
``lam`` contributes ``lam * h(r) - log Z(lam)`` to the log-likelihood ratio
of an image against the background model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError
from .gabor import Dictionary
from .images import compute_responses

__all__ = [
    "saturate",
    "ElementWeight",
    "ReferenceModel",
    "pool_reference",
    "compute_tables",
    "solve_lambda",
    "element_score",
]

DEFAULT_XI = 6.0
DEFAULT_BINS = 1000
DEFAULT_LAMBDA_MAX = 10.0
DEFAULT_LAMBDA_STEPS = 401
_CAP_QUANTILE = 99.9


def saturate(r, xi: float = DEFAULT_XI):
    """Sigmoid saturation of a squared response.

    Increases from 0 toward the level ``xi``; large responses are discounted
    because strong edges also occur in the background.  Stable for large
    ``r`` (the exponent is never positive).
    """
    r = np.asarray(r, dtype=np.float64)
    out = xi * (2.0 / (1.0 + np.exp(-2.0 * r / xi)) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ElementWeight:
    """Tilt parameter and its log normalizer for one template element."""

    lam: float
    log_z: float


@dataclass
class ReferenceModel:
    """Pooled background histogram of r = |c|^2 with tabulated Z and mu."""

    bin_edges: np.ndarray  # (bins + 1,)
    masses: np.ndarray  # (bins,), nonnegative, sums to 1
    xi: float
    lambda_grid: np.ndarray
    log_z_table: np.ndarray
    mu_table: np.ndarray

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def lambda_max(self) -> float:
        return float(self.lambda_grid[-1])

    @classmethod
    def from_histogram(
        cls,
        bin_edges: np.ndarray,
        masses: np.ndarray,
        xi: float = DEFAULT_XI,
        lambda_max: float = DEFAULT_LAMBDA_MAX,
        lambda_steps: int = DEFAULT_LAMBDA_STEPS,
    ) -> "ReferenceModel":
        bin_edges = np.asarray(bin_edges, dtype=np.float64)
        masses = np.asarray(masses, dtype=np.float64)
        if masses.ndim != 1 or bin_edges.shape[0] != masses.shape[0] + 1:
            raise ConfigurationError("histogram edges/masses shapes do not match")
        if np.any(masses < 0):
            raise ConfigurationError("histogram masses must be nonnegative")
        total = masses.sum()
        if not np.isfinite(total) or total <= 0:
            raise ConfigurationError("histogram has no mass")
        masses = masses / total
        grid = np.linspace(0.0, lambda_max, lambda_steps)
        log_z, mu = compute_tables(bin_edges, masses, xi, grid)
        return cls(
            bin_edges=bin_edges,
            masses=masses,
            xi=xi,
            lambda_grid=grid,
            log_z_table=log_z,
            mu_table=mu,
        )

    @classmethod
    def from_samples(
        cls,
        r_values: np.ndarray,
        xi: float = DEFAULT_XI,
        bins: int = DEFAULT_BINS,
        lambda_max: float = DEFAULT_LAMBDA_MAX,
        lambda_steps: int = DEFAULT_LAMBDA_STEPS,
    ) -> "ReferenceModel":
        """Histogram pooled squared responses; overflow mass goes to the last bin."""
        r_values = np.asarray(r_values, dtype=np.float64).ravel()
        if r_values.size == 0:
            raise ConfigurationError("no squared responses to pool")
        cap = float(np.percentile(r_values, _CAP_QUANTILE))
        if cap <= 0:
            raise ConfigurationError("pooled responses are degenerate (cap = 0)")
        edges = np.linspace(0.0, cap, bins + 1)
        counts, _ = np.histogram(np.minimum(r_values, cap), bins=edges)
        return cls.from_histogram(
            edges, counts.astype(np.float64), xi, lambda_max, lambda_steps
        )

    def solve(self, target: float) -> ElementWeight:
        """Invert ``mu`` at the observed mean of h; clamps out-of-range targets."""
        mu = self.mu_table
        grid = self.lambda_grid
        if target <= mu[0]:
            return ElementWeight(0.0, 0.0)
        if target >= mu[-1]:
            warnings.warn(
                f"estimating-equation target {target:.6g} above mu(lambda_max); "
                "clamping to the grid end",
                stacklevel=2,
            )
            return ElementWeight(float(grid[-1]), float(self.log_z_table[-1]))
        lam = float(np.interp(target, mu, grid))
        log_z = float(np.interp(lam, grid, self.log_z_table))
        return ElementWeight(lam, log_z)

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "bin_edges": self.bin_edges.tolist(),
            "masses": self.masses.tolist(),
            "lambda_grid": self.lambda_grid.tolist(),
            "log_z": self.log_z_table.tolist(),
            "mu": self.mu_table.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceModel":
        return cls(
            bin_edges=np.asarray(data["bin_edges"], dtype=np.float64),
            masses=np.asarray(data["masses"], dtype=np.float64),
            xi=float(data["xi"]),
            lambda_grid=np.asarray(data["lambda_grid"], dtype=np.float64),
            log_z_table=np.asarray(data["log_z"], dtype=np.float64),
            mu_table=np.asarray(data["mu"], dtype=np.float64),
        )


def compute_tables(
    bin_edges: np.ndarray,
    masses: np.ndarray,
    xi: float,
    grid: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate log Z(lam) and mu(lam) over the lambda grid.

    Uses bin midpoints for the one-dimensional integrals; log-space sums
    guard against overflow for large tilts.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0:
        raise ConfigurationError("lambda grid must start at 0 with >= 2 points")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("lambda grid must be strictly increasing")
    masses = np.asarray(masses, dtype=np.float64)
    if abs(masses.sum() - 1.0) > 1e-6:
        raise ConfigurationError("histogram masses must sum to 1")
    mids = 0.5 * (np.asarray(bin_edges[:-1]) + np.asarray(bin_edges[1:]))
    h = saturate(mids, xi)
    occupied = masses > 0
    if not np.any(occupied) or np.unique(h[occupied]).size < 2:
        raise ConfigurationError(
            "reference histogram is degenerate: mu would not be invertible"
        )
    tilt = grid[:, None] * h[None, :]  # (G, B)
    with np.errstate(divide="ignore"):
        log_m = np.where(occupied, np.log(masses, where=occupied), -np.inf)
    log_z = logsumexp(tilt + log_m[None, :], axis=1)
    log_z[0] = 0.0  # Z(0) = 1 for a normalized histogram
    shifted = tilt - tilt.max(axis=1, keepdims=True)
    w = np.exp(shifted) * masses[None, :]
    mu = (w @ h) / w.sum(axis=1)
    if np.any(np.diff(mu) <= 0):
        raise ConfigurationError("mu table is not strictly increasing")
    return log_z, mu


def pool_reference(
    images: Sequence[np.ndarray],
    dictionary: Dictionary,
    xi: float = DEFAULT_XI,
    bins: int = DEFAULT_BINS,
    lambda_max: float = DEFAULT_LAMBDA_MAX,
    lambda_steps: int = DEFAULT_LAMBDA_STEPS,
) -> ReferenceModel:
    """Pool squared responses of normalized background images into a model.

    Accumulation is order-free; images must already be normalized.
    """
    images = list(images)
    if not images:
        raise ConfigurationError("background image set is empty")
    chunks = []
    for img in images:
        resp = compute_responses(img, dictionary)
        m = resp.margin
        h, w = resp.shape
        chunks.append(resp.energy[:, m : h - m, m : w - m].ravel())
    pooled = np.concatenate(chunks)
    return ReferenceModel.from_samples(pooled, xi, bins, lambda_max, lambda_steps)


def solve_lambda(ref: ReferenceModel, target: float) -> ElementWeight:
    """Functional form of :meth:`ReferenceModel.solve`."""
    return ref.solve(target)


def element_score(r: float, weight: ElementWeight, ref: ReferenceModel) -> float:
    """Log-likelihood-ratio contribution of one element on one image."""
    return weight.lam * saturate(r, ref.xi) - weight.log_z
