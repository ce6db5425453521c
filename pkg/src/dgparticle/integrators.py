"""Mean-value discrete gradient and the implicit particle steps.

Both schemes are solved by Picard iteration started from a forward Euler
predictor. The stopping rule is the relative change of consecutive iterates,
``|X^{k+1} - X^k|_inf / max(1, |X^k|_inf) <= tolerance``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .dynamics import velocity_aggdiff, velocity_landau
from .ensemble import ParticleEnsemble
from .errors import ConvergenceError
from .models import EnergyModel, Landau, gradient_array


@dataclass(frozen=True)
class MeanValueConfig:
    """Gauss-Legendre rule on ``[0, 1]`` for the ``s``-integral."""

    node_count: int = 4

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 1:
            raise ValueError("node_count must be a positive integer")

    @cached_property
    def _rule(self):
        t, b = np.polynomial.legendre.leggauss(self.node_count)
        return 0.5 * (t + 1.0), 0.5 * b

    @property
    def nodes(self) -> np.ndarray:
        return self._rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule[1]


@dataclass(frozen=True)
class FixedPointConfig:
    dt: float
    tolerance: float = 1e-15
    max_iterations: int = 200
    raise_on_failure: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt >= 0):
            raise ValueError(f"dt must be nonnegative and finite, got {self.dt!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class StepResult:
    positions: np.ndarray
    iterations: int
    residual: float
    converged: bool
    # discrete gradient and midpoints of the final sweep; reused by diagnostics
    mean_gradient: np.ndarray = field(repr=False)
    midpoints: np.ndarray = field(repr=False)
    residuals: list = field(default_factory=list, repr=False)


def mean_value_gradient(
    model: EnergyModel,
    ensemble: ParticleEnsemble,
    X_old,
    X_new,
    cfg: MeanValueConfig = MeanValueConfig(),
) -> np.ndarray:
    """``(1/w_p) int_0^1 dE/dx_p (X_old + s (X_new - X_old)) ds`` by Gauss-Legendre.

    ``ensemble`` supplies the weights only.
    """
    w = ensemble.weights
    X_old = np.asarray(X_old, dtype=float)
    X_new = np.asarray(X_new, dtype=float)
    if X_old.shape != X_new.shape:
        raise ValueError("X_old and X_new differ in shape")
    if np.array_equal(X_old, X_new):
        return gradient_array(model, X_old, w)
    delta = X_new - X_old
    out = np.zeros_like(X_old)
    for s, b in zip(cfg.nodes, cfg.weights):
        out += b * gradient_array(model, X_old + s * delta, w)
    return out


def _relative_change(new, old):
    return float(np.max(np.abs(new - old)) / max(1.0, float(np.max(np.abs(old)))))


def _picard(update, X0, predictor, cfg: FixedPointConfig) -> StepResult:
    Xk = predictor
    residuals = []
    for it in range(1, cfg.max_iterations + 1):
        X_next, Gbar, mid = update(Xk)
        res = _relative_change(X_next, Xk)
        residuals.append(res)
        Xk = X_next
        if res <= cfg.tolerance:
            return StepResult(Xk, it, res, True, Gbar, mid, residuals)
    if cfg.raise_on_failure:
        raise ConvergenceError(
            f"fixed point not converged after {cfg.max_iterations} iterations "
            f"(last relative change {residuals[-1]:.3e})",
            residuals,
        )
    return StepResult(Xk, cfg.max_iterations, residuals[-1], False, Gbar, mid, residuals)


def step_aggdiff(
    model: EnergyModel,
    ensemble: ParticleEnsemble,
    cfg: FixedPointConfig,
    dg: MeanValueConfig = MeanValueConfig(),
) -> StepResult:
    """Solve ``X' = X - dt * Gbar(X', X)`` for the aggregation-diffusion scheme."""
    X0 = ensemble.positions
    dt = cfg.dt
    predictor = X0 + dt * velocity_aggdiff(gradient_array(model, X0, ensemble.weights))

    def update(Xk):
        Gbar = mean_value_gradient(model, ensemble, X0, Xk, dg)
        return X0 + dt * velocity_aggdiff(Gbar), Gbar, 0.5 * (X0 + Xk)

    return _picard(update, X0, predictor, cfg)


def step_landau(
    model: Landau,
    ensemble: ParticleEnsemble,
    cfg: FixedPointConfig,
    dg: MeanValueConfig = MeanValueConfig(),
    gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> StepResult:
    """Solve the Landau scheme with the kernel evaluated at the step midpoints.

    ``gradient(X_old, X_new)`` replaces the mean-value discrete gradient when
    given; conservation of momentum and kinetic energy does not depend on it.
    """
    X0 = ensemble.positions
    w = ensemble.weights
    dt = cfg.dt
    kernel = model.kernel
    if gradient is None:
        def gradient(a, b):
            return mean_value_gradient(model, ensemble, a, b, dg)

    predictor = X0 + dt * velocity_landau(kernel, X0, w, gradient(X0, X0))

    def update(Xk):
        Gbar = gradient(X0, Xk)
        mid = 0.5 * (X0 + Xk)
        return X0 + dt * velocity_landau(kernel, mid, w, Gbar), Gbar, mid

    return _picard(update, X0, predictor, cfg)


def step(model: EnergyModel, ensemble: ParticleEnsemble, cfg: FixedPointConfig,
         dg: MeanValueConfig = MeanValueConfig()) -> StepResult:
    if isinstance(model, Landau):
        return step_landau(model, ensemble, cfg, dg)
    return step_aggdiff(model, ensemble, cfg, dg)
