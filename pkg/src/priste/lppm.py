"""Location privacy mechanisms as emission matrices.

Row ``i`` of an emission matrix is the output distribution for true cell
``i``; column ``j`` is the likelihood vector of observing cell ``j``.

The discretised Planar Laplace mechanism averages a Laplace kernel over
``subsamples x subsamples`` points inside each output cell.  By default
the kernel decays at half the nominal rate, ``exp(-alpha d / 2)``.  Row
normalisation is what breaks the textbook kernel: an edge cell loses more
mass off-grid than a central one, so its normaliser is smaller and the
ratio between two rows can exceed ``exp(alpha d)``.  With the half-rate
kernel both the kernel ratio and the normaliser ratio are bounded by
``exp(alpha d / 2)`` (triangle inequality), so the product obeys the
geo-indistinguishability inequality exactly.  ``kernel="plain"`` keeps the
full-rate kernel for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, EmptySet, ZeroLikelihood
from .markov import as_distribution
from .statespace import GridMap

GEOIND = "geoind"
PLAIN = "plain"

PLM = "plm"
PLM_DELTASET = "plm_deltaset"
UNIFORM = "uniform"
MECHANISMS = (PLM, PLM_DELTASET, UNIFORM)


@dataclass(frozen=True)
class PlanarLaplaceSpec:
    alpha: float
    integration_subsamples: int = 3
    kernel: str = GEOIND

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.integration_subsamples < 1:
            raise ValueError("integration_subsamples must be at least 1")
        if self.kernel not in (GEOIND, PLAIN):
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @property
    def rate(self) -> float:
        return 0.5 * self.alpha if self.kernel == GEOIND else self.alpha


@dataclass(frozen=True)
class LppmSpec:
    """Mechanism block of the experiment config."""

    mechanism: str = PLM
    alpha: float = 0.2
    delta: float = 0.1
    subsamples: int = 3
    kernel: str = GEOIND

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not 0 <= self.delta < 1:
            raise ConfigError("delta must lie in [0, 1)")
        if self.subsamples < 1:
            raise ConfigError("subsamples must be at least 1")
        if self.kernel not in (GEOIND, PLAIN):
            raise ConfigError(f"unknown kernel {self.kernel!r}")

    def plm(self, alpha: float | None = None) -> PlanarLaplaceSpec:
        return PlanarLaplaceSpec(self.alpha if alpha is None else alpha, self.subsamples, self.kernel)


def _subsample_points(grid: GridMap, n: int) -> np.ndarray:
    """``(m, n*n, 2)`` evenly spaced points (km) inside every cell."""
    side = grid.cell_size_m / 1000.0
    offs = (np.arange(n) + 0.5) / n * side - 0.5 * side
    dx, dy = np.meshgrid(offs, offs, indexing="xy")
    local = np.column_stack([dx.ravel(), dy.ravel()])
    return grid.centers_km[:, None, :] + local[None, :, :]


@lru_cache(maxsize=8)
def _sub_distances(grid: GridMap, n: int) -> np.ndarray:
    """``(m, m, n*n)`` distances from centre ``i`` to subsample points of cell ``j``."""
    pts = _subsample_points(grid, n)
    diff = grid.centers_km[:, None, None, :] - pts[None, :, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    d.setflags(write=False)
    return d


@lru_cache(maxsize=64)
def _plm_cached(grid: GridMap, spec: PlanarLaplaceSpec) -> np.ndarray:
    if grid.m == 1:
        out = np.ones((1, 1))
    else:
        d = _sub_distances(grid, spec.integration_subsamples)
        # shifting by the row minimum keeps large alpha from underflowing every entry
        shift = d.min(axis=(1, 2), keepdims=True)
        w = np.exp(-spec.rate * (d - shift)).mean(axis=2)
        out = w / w.sum(axis=1, keepdims=True)
    out.setflags(write=False)
    return out


def planar_laplace_matrix(grid: GridMap, spec: PlanarLaplaceSpec) -> np.ndarray:
    """Discretised alpha-Planar Laplace emission matrix (read-only, cached)."""
    return _plm_cached(grid, spec)


def uniform_matrix(m: int) -> np.ndarray:
    return np.full((m, m), 1.0 / m)


def sample_output(matrix: np.ndarray, true_cell: int, seed=None) -> int:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    row = np.cumsum(matrix[true_cell])
    j = int(np.searchsorted(row, rng.random() * row[-1], side="right"))
    return min(j, matrix.shape[1] - 1)


@dataclass(frozen=True)
class DeltaLocationSet:
    delta: float
    mask: np.ndarray

    @property
    def cells(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


def delta_set(prior, delta: float) -> DeltaLocationSet:
    """Fewest cells whose prior mass reaches ``1 - delta``; ties go to lower indices."""
    prior = np.asarray(prior, dtype=float)
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    mask = np.zeros(prior.shape[0], dtype=bool)
    if delta == 0:
        mask[prior > 0] = True
    else:
        order = np.argsort(-prior, kind="stable")
        cum = np.cumsum(prior[order])
        k = int(np.searchsorted(cum, (1.0 - delta) * cum[-1] - 1e-12)) + 1
        mask[order[:min(k, prior.shape[0])]] = True
    return DeltaLocationSet(delta, mask)


def restrict(matrix: np.ndarray, dset: DeltaLocationSet) -> np.ndarray:
    """Confine outputs to the set.

    Rows of true cells inside the set are renormalised over the set; rows
    outside it (and any row with no mass on the set) become uniform over
    the set, which keeps the matrix total.
    """
    keep = np.asarray(dset.mask, dtype=bool)
    if not keep.any():
        raise EmptySet("delta-location set is empty")
    out = np.where(keep[None, :], matrix, 0.0)
    mass = out.sum(axis=1)
    fallback = ~keep | (mass <= 0)
    out[~fallback] /= mass[~fallback, None]
    out[fallback] = keep / keep.sum()
    return out


def posterior(prior_minus, column) -> np.ndarray:
    """Bayes update of ``prior_minus`` by a likelihood column."""
    p = np.asarray(prior_minus, dtype=float) * np.asarray(column, dtype=float)
    z = p.sum()
    if not z > 0:
        raise ZeroLikelihood("observation has zero probability under the prior")
    return p / z


def emission_matrix(grid: GridMap, spec: LppmSpec, alpha: float | None = None,
                    prior=None) -> np.ndarray:
    """Emission matrix for a configured mechanism at budget ``alpha``.

    ``plm_deltaset`` needs the current ``prior`` to build its set.
    """
    if spec.mechanism == UNIFORM:
        return uniform_matrix(grid.m)
    base = planar_laplace_matrix(grid, spec.plm(alpha))
    if spec.mechanism == PLM:
        return base
    if prior is None:
        raise ValueError("plm_deltaset needs the current prior")
    return restrict(base, delta_set(as_distribution(prior, grid.m), spec.delta))
