"""Particle velocity fields built from a per-mass gradient field.

A gradient field is an ``(N, d)`` array ``G`` with ``G_p = (1/w_p) dE/dx_p``.

* aggregation-diffusion: ``dX/dt = -W^{-1} grad E``, i.e. ``v_p = -G_p``
* Landau: ``v_p = -sum_q w_q A(x_p - x_q) (G_p - G_q)``, the action of
  ``-W^{-1} calA(X) W^{-1} grad E`` computed without assembling ``calA``.
"""

from __future__ import annotations

import numpy as np

from ._parallel import map_rows
from .models import CollisionKernel, kernel_apply_components


def velocity_aggdiff(grad) -> np.ndarray:
    return -np.asarray(grad, dtype=float)


def velocity_landau(kernel: CollisionKernel, positions, weights, grad) -> np.ndarray:
    """Matrix-free Landau velocity.

    Row blocks of the pair sum are evaluated independently. The pair term
    ``A(x_p - x_q)(G_p - G_q)`` flips sign bit-exactly under ``p <-> q``, so
    ``sum_p w_p v_p`` vanishes to summation round-off.
    """
    x = np.asarray(positions, dtype=float)
    w = np.asarray(weights, dtype=float)
    G = np.asarray(grad, dtype=float)
    if not (x.shape == G.shape and x.shape[0] == w.shape[0]):
        raise ValueError(f"inconsistent shapes {x.shape}, {w.shape}, {G.shape}")

    d = x.shape[1]

    def block(lo, hi):
        dx = [x[lo:hi, k, None] - x[None, :, k] for k in range(d)]
        dG = [G[lo:hi, k, None] - G[None, :, k] for k in range(d)]
        pair = kernel_apply_components(kernel, dx, dG)
        return -np.stack([c @ w for c in pair], axis=1)

    return map_rows(block, x.shape[0], x.shape[0], x.shape[1])
