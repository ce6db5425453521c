"""Regularized energies, their per-particle gradients, and the collision kernel.

Two model families share one evaluation path:

* ``AggregationDiffusion``: ``E = int H(f*phi) + sum_p w_p V(x_p)
  + 1/2 sum_{p,q} w_p w_q W(x_p - x_q)``
* ``Landau``: ``E = int (f*phi) log (f*phi)``

Every grid integral (the energy itself and the ``h_eps`` field entering the
gradient) is the midpoint rule on the model's ``QuadratureGrid``, so that
``w_p * grad_energy`` is the derivative of ``energy_value`` with respect to
``x_p`` to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np

from ._parallel import map_rows
from .errors import NumericalDomainError

if TYPE_CHECKING:
    from .ensemble import ParticleEnsemble, QuadratureGrid

# below this the direct Gaussian sum has lost relative accuracy; switch to log-sum-exp
_UNDERFLOW_GUARD = 1e-250


@dataclass(frozen=True)
class Mollifier:
    """Gaussian ``phi_eps(x) = (2 pi eps)^(-d/2) exp(-|x|^2 / (2 eps))``.

    ``cutoff``, when set, zeroes the kernel beyond ``cutoff * sqrt(eps)``.
    Exact conservation tests assume it is left at ``None``.
    """

    epsilon: float
    cutoff: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError("cutoff must be positive or None")

    def _norm(self, d):
        return (2.0 * math.pi * self.epsilon) ** (-0.5 * d)

    def _profile(self, r2):
        out = np.exp(-0.5 * r2 / self.epsilon)
        if self.cutoff is not None:
            out = np.where(r2 <= self.cutoff**2 * self.epsilon, out, 0.0)
        return out

    def value(self, x) -> np.ndarray:
        """Kernel at displacements ``x`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        r2 = np.einsum("...k,...k->...", x, x)
        return self._norm(x.shape[-1]) * self._profile(r2)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -(x / self.epsilon) * self.value(x)[..., None]

    def log_value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.einsum("...k,...k->...", x, x)
        return math.log(self._norm(x.shape[-1])) - 0.5 * r2 / self.epsilon


def default_epsilon(cell_size: float, coeff: float = 0.64, power: float = 1.98) -> float:
    return coeff * cell_size**power


# -- internal energies ---------------------------------------------------------


@dataclass(frozen=True)
class LogEntropy:
    """``H(f) = f log f``.

    The field entering ``h_eps`` is ``H'(g) = log g + 1``. The constant adds
    ``int grad(phi) = 0`` in the continuum, but on the grid it makes
    ``w_p * G_p`` the exact derivative of the discrete energy. Set
    ``mass_term=False`` for the bare ``log g`` field, whose compatibility
    residual is the grid defect ``w_p sum_i h^d grad(phi)(x_p - x_i)``.
    """

    mass_term: bool = True
    needs_log = True

    def density(self, g, log_g):
        return np.where(g > 0, g * log_g, 0.0)

    def derivative_field(self, g, log_g):
        return log_g + 1.0 if self.mass_term else log_g


@dataclass(frozen=True)
class PowerLaw:
    """``H(f) = f^m / (m - 1)`` with ``m > 1``."""

    m: float
    needs_log = False

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError(f"power-law exponent must exceed 1, got {self.m!r}")

    def density(self, g, log_g=None):
        return g**self.m / (self.m - 1.0)

    def derivative_field(self, g, log_g=None):
        return self.m / (self.m - 1.0) * g ** (self.m - 1.0)


InternalEnergy = Union[LogEntropy, PowerLaw]


# -- potentials ----------------------------------------------------------------


@dataclass(frozen=True)
class PotentialSpec:
    """A scalar potential and its gradient, both vectorized over ``(..., d)``.

    ``kind`` is ``"external"`` (V) or ``"interaction"`` (W). Interaction
    potentials must be even, so their gradient is odd and vanishes at 0.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    kind: str = "external"

    def __post_init__(self):
        if self.kind not in ("external", "interaction"):
            raise ValueError(f"unknown potential kind {self.kind!r}")


def _quadratic_value(x):
    return 0.5 * np.einsum("...k,...k->...", x, x)


def _quadratic_gradient(x):
    return np.array(x, dtype=float, copy=True)


def _zero_value(x):
    return np.zeros(np.shape(x)[:-1])


def _zero_gradient(x):
    return np.zeros(np.shape(x))


_POTENTIALS = {
    "zero": (_zero_value, _zero_gradient),
    "quadratic": (_quadratic_value, _quadratic_gradient),
}


def potential(name: str, kind: str = "external") -> PotentialSpec:
    """Look up a registered potential (``"zero"`` or ``"quadratic"``)."""
    try:
        value, grad = _POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; known: {sorted(_POTENTIALS)}") from None
    return PotentialSpec(name, value, grad, kind)


def check_interaction(pot: PotentialSpec, dimension: int, samples: int = 64, seed: int = 0) -> bool:
    """Sample-based check that ``grad W`` is odd with ``grad W(0) = 0``."""
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=3.0, size=(samples, dimension))
    zero = pot.gradient(np.zeros((1, dimension)))
    return bool(np.all(zero == 0) and np.allclose(pot.gradient(-x), -pot.gradient(x), rtol=1e-12, atol=0))


# -- collision kernel ----------------------------------------------------------


@dataclass(frozen=True)
class CollisionKernel:
    """``A(x) = C |x|^gamma (|x|^2 I - x x^T)``; ``A(0)`` is the zero matrix."""

    strength: float = 1.0 / 16.0
    exponent: float = 0.0

    def __post_init__(self):
        if not self.strength > 0:
            raise ValueError("kernel strength must be positive")

    def scale(self, r2):
        """``C |x|^gamma`` given ``|x|^2``, zero where ``|x| = 0``."""
        r2 = np.asarray(r2, dtype=float)
        if self.exponent == 0:
            return np.where(r2 > 0, self.strength, 0.0)
        safe = np.where(r2 > 0, r2, 1.0)
        if self.exponent == -3:
            power = 1.0 / (safe * np.sqrt(safe))
        else:
            power = safe ** (0.5 * self.exponent)
        return np.where(r2 > 0, self.strength * power, 0.0)

    def magnitude(self, r2):
        """``C |x|^(gamma + 2)``, the operator norm of ``A(x)``; zero where ``|x| = 0``.

        Finite whenever ``|x|^(gamma + 2)`` is, even if ``|x|^gamma`` alone overflows.
        """
        r2 = np.asarray(r2, dtype=float)
        if self.exponent == 0:
            return self.strength * r2
        safe = np.where(r2 > 0, r2, 1.0)
        if self.exponent == -3:
            power = 1.0 / np.sqrt(safe)
        else:
            power = safe ** (0.5 * self.exponent + 1.0)
        return np.where(r2 > 0, self.strength * power, 0.0)

    def matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = x @ x
        if r2 == 0:
            return np.zeros((x.shape[0], x.shape[0]))
        return self.magnitude(r2) * (np.eye(x.shape[0]) - np.outer(x, x) / r2)


# A(x) v = C |x|^(gamma+2) (v - (x.v / |x|^2) x): no intermediate overflows for
# tiny |x|, and negating x leaves every rounding step unchanged, so the pair
# term A(x_p - x_q)(G_p - G_q) flips sign bit-exactly under p <-> q.


def kernel_matrix_apply(kernel: CollisionKernel, x, v) -> np.ndarray:
    """``A(x) v`` without forming ``A``; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = np.einsum("...k,...k->...", x, x)
    xv = np.einsum("...k,...k->...", x, v)
    proj = xv / np.where(r2 > 0, r2, 1.0)
    return kernel.magnitude(r2)[..., None] * (v - proj[..., None] * x)


def kernel_apply_components(kernel: CollisionKernel, xs, vs):
    """``A(x) v`` with ``x`` and ``v`` given as lists of same-shape component arrays."""
    r2 = sum(a * a for a in xs)
    xv = sum(a * b for a, b in zip(xs, vs))
    proj = xv / np.where(r2 > 0, r2, 1.0)
    s = kernel.magnitude(r2)
    return [s * (b - proj * a) for a, b in zip(xs, vs)]


# -- energy models -------------------------------------------------------------


@dataclass(frozen=True)
class AggregationDiffusion:
    internal: Optional[InternalEnergy]
    mollifier: Mollifier
    grid: "QuadratureGrid"
    external: Optional[PotentialSpec] = None
    interaction: Optional[PotentialSpec] = None

    def __post_init__(self):
        if self.interaction is not None and self.interaction.kind != "interaction":
            raise ValueError("interaction potential must have kind='interaction'")
        if self.external is not None and self.external.kind != "external":
            raise ValueError("external potential must have kind='external'")


@dataclass(frozen=True)
class Landau:
    kernel: CollisionKernel
    mollifier: Mollifier
    grid: "QuadratureGrid"
    entropy: LogEntropy = LogEntropy()

    @property
    def internal(self) -> LogEntropy:
        return self.entropy


EnergyModel = Union[AggregationDiffusion, Landau]


def _as_points(points, d):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if d == 1 else pts[None, :]
    return pts


def _separable(mollifier: Mollifier, d: int) -> bool:
    # the untruncated Gaussian factorizes over the axes of the tensor grid
    return mollifier.cutoff is None and d <= 2


def _axis_factors(mollifier: Mollifier, axis, coords):
    """``D[i, p] = a_i - y_p`` and ``exp(-D^2 / (2 eps))`` along one axis."""
    D = axis[:, None] - coords[None, :]
    return D, np.exp(-0.5 * D * D / mollifier.epsilon)


def grid_density(mollifier: Mollifier, grid: "QuadratureGrid", positions, weights, with_log: bool = False):
    """Blob density ``g_i`` at the grid centers, optionally with a safe ``log g_i``."""
    x = np.asarray(positions, dtype=float)
    w = np.asarray(weights, dtype=float)
    d = x.shape[1]
    if _separable(mollifier, d):
        norm = (2.0 * math.pi * mollifier.epsilon) ** (-0.5 * d)
        axis = grid.axis()
        E1 = _axis_factors(mollifier, axis, x[:, 0])[1]
        if d == 1:
            g = norm * (E1 @ w)
        else:
            E2 = _axis_factors(mollifier, axis, x[:, 1])[1]
            g = norm * ((E1 * w) @ E2.T).ravel()
        centers = None
    else:
        centers = grid.centers

        def block(lo, hi):
            return mollifier.value(centers[lo:hi, None, :] - x[None, :, :]) @ w

        g = map_rows(block, centers.shape[0], x.shape[0], d)
    if not with_log:
        return g, None
    with np.errstate(divide="ignore"):
        log_g = np.log(g)
    low = np.flatnonzero(g < _UNDERFLOW_GUARD)
    if low.size:
        # log-sum-exp over the untruncated Gaussian
        if centers is None:
            centers = grid.centers
        logw = np.log(w)
        expo = logw[None, :] + mollifier.log_value(centers[low, None, :] - x[None, :, :])
        top = expo.max(axis=1)
        log_g[low] = top + np.log(np.exp(expo - top[:, None]).sum(axis=1))
    bad = np.flatnonzero(~np.isfinite(log_g))
    if bad.size:
        i = int(bad[0])
        raise NumericalDomainError(
            f"density at grid cell {i} (center {grid.center(i).tolist()}) is {g[i]!r}; log undefined"
        )
    return g, log_g


def _field(model, positions, weights):
    internal = model.internal
    g, log_g = grid_density(model.mollifier, model.grid, positions, weights, internal.needs_log)
    return internal.derivative_field(g, log_g)


def _h_eps_from_field(model, field, eval_positions):
    """``sum_i h^d grad(phi)(y_p - x_i) field_i`` for every row ``y_p``."""
    moll = model.mollifier
    grid = model.grid
    vol = grid.cell_volume
    y = eval_positions
    d = y.shape[1]
    if _separable(moll, d):
        # grad(phi)(y - x_i) = (x_i - y)/eps * phi(y - x_i), and x_i - y = D
        scale = vol * (2.0 * math.pi * moll.epsilon) ** (-0.5 * d) / moll.epsilon
        axis = grid.axis()
        D1, E1 = _axis_factors(moll, axis, y[:, 0])
        if d == 1:
            return scale * ((D1 * E1).T @ field)[:, None]
        D2, E2 = _axis_factors(moll, axis, y[:, 1])
        F = field.reshape(grid.cells_per_dim, grid.cells_per_dim)
        c1 = np.einsum("ip,ip->p", D1 * E1, F @ E2)
        c2 = np.einsum("jp,jp->p", D2 * E2, F.T @ E1)
        return scale * np.stack([c1, c2], axis=1)
    centers = grid.centers

    def block(lo, hi):
        diff = y[lo:hi, None, :] - centers[None, :, :]
        weight = moll.value(diff) * field[None, :]
        return -(vol / moll.epsilon) * np.einsum("pik,pi->pk", diff, weight)

    return map_rows(block, y.shape[0], centers.shape[0], d)


def h_eps(model: EnergyModel, ensemble: "ParticleEnsemble", eval_positions) -> np.ndarray:
    """Midpoint-rule ``h^eps`` field of ``ensemble`` evaluated at ``eval_positions``.

    Returns an ``(n, d)`` array. Raises ``ValueError`` if the model has no
    internal energy.
    """
    if model.internal is None:
        raise ValueError("model has no internal energy")
    x, w = ensemble.positions, ensemble.weights
    y = _as_points(eval_positions, x.shape[1])
    return _h_eps_from_field(model, _field(model, x, w), y)


def gradient_array(model: EnergyModel, positions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-mass gradient ``G_p`` for raw arrays; see ``grad_energy``."""
    x = positions
    if model.internal is not None:
        G = _h_eps_from_field(model, _field(model, x, weights), x)
    else:
        G = np.zeros_like(x)
    if isinstance(model, Landau):
        return G
    if model.external is not None:
        G = G + model.external.gradient(x)
    if model.interaction is not None:
        grad_w = model.interaction.gradient

        def block(lo, hi):
            return np.einsum("pqk,q->pk", grad_w(x[lo:hi, None, :] - x[None, :, :]), weights)

        G = G + map_rows(block, x.shape[0], x.shape[0], x.shape[1])
    return G


def grad_energy(model: EnergyModel, ensemble: "ParticleEnsemble") -> np.ndarray:
    """``G_p = grad_x (dE/df)[f^N](x_p)``, i.e. ``(1/w_p) dE/dx_p``, shape ``(N, d)``."""
    return gradient_array(model, ensemble.positions, ensemble.weights)


def energy_array(model: EnergyModel, positions: np.ndarray, weights: np.ndarray) -> float:
    x, w = positions, weights
    total = 0.0
    if model.internal is not None:
        internal = model.internal
        g, log_g = grid_density(model.mollifier, model.grid, x, w, internal.needs_log)
        total += model.grid.cell_volume * float(np.sum(internal.density(g, log_g)))
    if isinstance(model, Landau):
        return total
    if model.external is not None:
        total += float(w @ model.external.value(x))
    if model.interaction is not None:
        wv = model.interaction.value

        def block(lo, hi):
            return (wv(x[lo:hi, None, :] - x[None, :, :]) @ w)[:, None]

        pair = map_rows(block, x.shape[0], x.shape[0], x.shape[1])[:, 0]
        total += 0.5 * float(w @ pair)
    return total


def energy_value(model: EnergyModel, ensemble: "ParticleEnsemble") -> float:
    """Discrete regularized energy with grid integrals done by the midpoint rule."""
    return energy_array(model, ensemble.positions, ensemble.weights)
