"""Particle state, the uniform cell-center grid, and blob reconstruction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EmptyEnsembleError
from .models import Mollifier
from ._parallel import map_rows


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform tensor grid of cell midpoints on ``[-L, L]^d``.

    Centers are not stored; ``centers`` regenerates them from index
    arithmetic on every access.
    """

    half_width: float
    cells_per_dim: int
    dimension: int

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.cells_per_dim

    @property
    def cell_volume(self) -> float:
        return self.cell_size ** self.dimension

    @property
    def num_cells(self) -> int:
        return self.cells_per_dim ** self.dimension

    def axis(self) -> np.ndarray:
        h = self.cell_size
        return -self.half_width + h * (np.arange(self.cells_per_dim) + 0.5)

    @property
    def centers(self) -> np.ndarray:
        """``(M**d, d)`` array, last coordinate varying fastest."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dimension), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def center(self, index: int) -> np.ndarray:
        ax = self.axis()
        digits = np.unravel_index(index, (self.cells_per_dim,) * self.dimension)
        return np.array([ax[k] for k in digits])


def build_grid(half_width: float, cells_per_dim: int, dimension: int) -> QuadratureGrid:
    if not (math.isfinite(half_width) and half_width > 0):
        raise ValueError(f"half_width must be positive and finite, got {half_width!r}")
    if int(cells_per_dim) != cells_per_dim or cells_per_dim < 1:
        raise ValueError(f"cells_per_dim must be a positive integer, got {cells_per_dim!r}")
    if int(dimension) != dimension or dimension < 1:
        raise ValueError(f"dimension must be a positive integer, got {dimension!r}")
    return QuadratureGrid(float(half_width), int(cells_per_dim), int(dimension))


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted point masses ``f^N = sum_p w_p delta(x - x_p)``.

    ``positions`` has shape ``(N, d)``; ``weights`` shape ``(N,)``. Both are
    stored read-only; moving particles produces a new ensemble sharing the
    same weight array.
    """

    positions: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        w = self.weights
        if not (isinstance(w, np.ndarray) and not w.flags.writeable):
            w = np.array(w, dtype=float)
        if x.ndim != 2 or w.ndim != 1 or x.shape[0] != w.shape[0]:
            raise ValueError(f"shape mismatch: positions {x.shape}, weights {w.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise ValueError("weights must be strictly positive and finite")
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return self.positions.shape[0]

    def with_positions(self, positions) -> ParticleEnsemble:
        return ParticleEnsemble(positions, self.weights)


def init_from_density(
    f0: Callable[[np.ndarray], np.ndarray],
    grid: QuadratureGrid,
    weight_floor: float = 0.0,
) -> ParticleEnsemble:
    """One particle per cell center carrying the midpoint-rule cell mass.

    ``f0`` receives the ``(M**d, d)`` center array and returns densities.
    Cells whose mass is ``<= weight_floor`` are dropped.
    """
    if weight_floor < 0:
        raise ValueError("weight_floor must be nonnegative")
    centers = grid.centers
    values = np.asarray(f0(centers), dtype=float).reshape(-1)
    if values.shape[0] != centers.shape[0]:
        raise ValueError("initial density returned the wrong number of values")
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        bad = int(np.flatnonzero(~(values >= 0))[0])
        raise ValueError(f"initial density negative or non-finite at center {centers[bad]}")
    mass = grid.cell_volume * values
    keep = mass > weight_floor
    if not np.any(keep):
        raise EmptyEnsembleError("no cell carries mass above the weight floor")
    return ParticleEnsemble(centers[keep], mass[keep])


def reconstruct_density(ensemble: ParticleEnsemble, epsilon: float, points) -> np.ndarray:
    """Blob density ``sum_p w_p phi_eps(x - x_p)`` at each query point."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    moll = Mollifier(epsilon)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if ensemble.dimension == 1 else pts[None, :]
    x, w = ensemble.positions, ensemble.weights

    def block(lo, hi):
        return moll.value(pts[lo:hi, None, :] - x[None, :, :]) @ w

    return map_rows(block, pts.shape[0], len(x), ensemble.dimension)
