"""Conserved and dissipated quantities, analytic reference solutions, error norms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._parallel import map_rows
from .ensemble import ParticleEnsemble, QuadratureGrid, reconstruct_density
from .integrators import MeanValueConfig, mean_value_gradient
from .models import CollisionKernel, EnergyModel, kernel_apply_components


@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    mass: float
    momentum: np.ndarray
    kinetic_energy: float
    energy: Optional[float] = None
    fisher: Optional[float] = None
    dissipation_rate: Optional[float] = None
    solver_iterations: int = 0


def mass(ensemble: ParticleEnsemble) -> float:
    return float(np.sum(ensemble.weights))


# elementwise products then np.sum: no fused multiply-add, so mirrored
# particles cancel exactly and the result does not depend on the BLAS build


def momentum(ensemble: ParticleEnsemble) -> np.ndarray:
    return np.sum(ensemble.weights[:, None] * ensemble.positions, axis=0)


def kinetic_energy(ensemble: ParticleEnsemble) -> float:
    x = ensemble.positions
    return 0.5 * float(np.sum(ensemble.weights * np.sum(x * x, axis=1)))


def fisher_from_gradient(weights, mean_gradient) -> float:
    """``sum_p w_p |Gbar_p|^2`` for a per-mass gradient."""
    G = np.asarray(mean_gradient)
    return float(np.asarray(weights) @ np.einsum("pk,pk->p", G, G))


def dissipation_from_gradient(kernel: CollisionKernel, midpoints, weights, mean_gradient) -> float:
    """``1/2 sum_{p,q} w_p w_q dG^T A(m_p - m_q) dG`` with ``dG = Gbar_p - Gbar_q``."""
    m = np.asarray(midpoints, dtype=float)
    w = np.asarray(weights, dtype=float)
    G = np.asarray(mean_gradient, dtype=float)

    d = m.shape[1]

    def block(lo, hi):
        dm = [m[lo:hi, k, None] - m[None, :, k] for k in range(d)]
        dG = [G[lo:hi, k, None] - G[None, :, k] for k in range(d)]
        quad = sum(a * b for a, b in zip(dG, kernel_apply_components(kernel, dm, dG)))
        return (quad @ w)[:, None]

    rows = map_rows(block, m.shape[0], m.shape[0], m.shape[1])[:, 0]
    return 0.5 * float(w @ rows)


def fisher_information(model: EnergyModel, X_old, X_new, weights, mean_gradient=None,
                       dg: MeanValueConfig = MeanValueConfig()) -> float:
    """Discrete Fisher information of a step; pass ``mean_gradient`` to reuse the solver's."""
    if mean_gradient is None:
        mean_gradient = mean_value_gradient(model, ParticleEnsemble(X_old, weights), X_old, X_new, dg)
    return fisher_from_gradient(weights, mean_gradient)


def dissipation_rate(model: EnergyModel, kernel: Optional[CollisionKernel], X_old, X_new, weights,
                     mean_gradient=None, dg: MeanValueConfig = MeanValueConfig()) -> float:
    """Nonnegative entropy dissipation rate of a Landau step.

    This is the quadratic form itself; the decay-rate display convention with
    a leading minus sign is left to the reader of the output.
    """
    kernel = kernel if kernel is not None else model.kernel
    if mean_gradient is None:
        mean_gradient = mean_value_gradient(model, ParticleEnsemble(X_old, weights), X_old, X_new, dg)
    mid = 0.5 * (np.asarray(X_old, dtype=float) + np.asarray(X_new, dtype=float))
    return dissipation_from_gradient(kernel, mid, weights, mean_gradient)


# -- analytic solutions ----------------------------------------------------------


def _points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None] if d == 1 else x[None, :]
    return x


def _require_positive_time(t):
    if not t > 0:
        raise ValueError(f"solution defined for t > 0 only, got t={t!r}")


@dataclass(frozen=True)
class HeatKernel:
    """Point-source solution of ``f_t = f_xx``."""

    dimension = 1

    def value(self, t, x):
        _require_positive_time(t)
        x = _points(x, 1)[:, 0]
        return (4.0 * math.pi * t) ** -0.5 * np.exp(-(x**2) / (4.0 * t))

    def total_mass(self):
        return 1.0


@dataclass(frozen=True)
class Barenblatt:
    """Self-similar solution of ``f_t = (f^m)_xx``."""

    m: float = 1.5
    K: float = 1.0
    dimension = 1

    @property
    def alpha(self):
        return 1.0 / (self.m + 1.0)

    @property
    def kappa(self):
        return self.alpha * (self.m - 1.0) / (2.0 * self.m)

    def support_radius(self, t):
        return t**self.alpha * math.sqrt(self.K / self.kappa)

    def value(self, t, x):
        _require_positive_time(t)
        x = _points(x, 1)[:, 0]
        xi = np.abs(x) / t**self.alpha
        core = np.maximum(self.K - self.kappa * xi**2, 0.0)
        return t**-self.alpha * core ** (1.0 / (self.m - 1.0))

    def total_mass(self):
        """``a(m) K^gamma``; informational, initialization uses the grid sum."""
        m, alpha = self.m, self.alpha
        a = math.sqrt(2.0 * math.pi * m / (alpha * (m - 1.0))) * math.exp(
            math.lgamma(m / (m - 1.0)) - math.lgamma(m / (m - 1.0) + 0.5)
        )
        return a * self.K ** (1.0 / (m - 1.0) + 0.5)


@dataclass(frozen=True)
class LinearFP:
    """Solution of ``f_t = f_xx + (x f)_x`` started from a point mass at ``t = 0``."""

    dimension = 1

    def value(self, t, x):
        _require_positive_time(t)
        x = _points(x, 1)[:, 0]
        s = 1.0 - math.exp(-2.0 * t)
        return (2.0 * math.pi * s) ** -0.5 * np.exp(-(x**2) / (2.0 * s))

    def total_mass(self):
        return 1.0


@dataclass(frozen=True)
class BKW:
    """BKW solution of the 2D Landau equation with the Maxwell kernel ``C = 1/16``."""

    dimension = 2

    @staticmethod
    def radius(t):
        return 1.0 - 0.5 * math.exp(-t / 8.0)

    def value(self, t, x):
        if t < 0:
            raise ValueError("BKW solution defined for t >= 0")
        x = _points(x, 2)
        R = self.radius(t)
        r2 = np.einsum("pk,pk->p", x, x)
        return (
            np.exp(-r2 / (2.0 * R)) / (2.0 * math.pi * R)
            * ((2.0 * R - 1.0) / R + (1.0 - R) / (2.0 * R**2) * r2)
        )

    def total_mass(self):
        return 1.0


AnalyticSolution = (HeatKernel, Barenblatt, LinearFP, BKW)


def analytic_value(sol, t: float, x) -> np.ndarray:
    return sol.value(t, x)


def error_norms(ensemble: ParticleEnsemble, epsilon: float, exact, t: float, grid: QuadratureGrid) -> dict:
    """Grid-sampled L1, L2 and Linf distance between the blob density and ``exact``."""
    centers = grid.centers
    diff = np.abs(reconstruct_density(ensemble, epsilon, centers) - exact.value(t, centers))
    vol = grid.cell_volume
    return {
        "l1": float(vol * np.sum(diff)),
        "l2": float(math.sqrt(vol * np.sum(diff**2))),
        "linf": float(np.max(diff)),
    }


def convergence_order(h_values, error_values) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(error_values, dtype=float)
    if h.shape != e.shape or h.size < 2:
        raise ValueError("need at least two (h, error) pairs")
    if np.any(~(h > 0)) or np.any(~(e > 0)):
        raise ValueError("convergence_order needs strictly positive inputs")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)
