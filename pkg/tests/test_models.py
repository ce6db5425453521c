import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgparticle import (
    AggregationDiffusion,
    CollisionKernel,
    Landau,
    LogEntropy,
    Mollifier,
    NumericalDomainError,
    ParticleEnsemble,
    PowerLaw,
    build_grid,
    default_epsilon,
    energy_value,
    grad_energy,
    h_eps,
    kernel_matrix_apply,
    potential,
)
from dgparticle.models import check_interaction, grid_density
from dgparticle.scenarios import compatibility_error
from oracles import brute_force_h


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


# -- mollifier -------------------------------------------------------------------


def test_mollifier_values():
    m = Mollifier(0.5)
    assert m.value(np.zeros(2)) == pytest.approx(1 / math.pi)
    x = np.array([0.3, -0.4])
    assert m.value(x) == pytest.approx(math.exp(-0.25) / math.pi, rel=1e-15)
    np.testing.assert_array_equal(m.gradient(np.zeros(1)), [0.0])
    assert m.log_value(x) == pytest.approx(math.log(m.value(x)), rel=1e-14)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=3))
def test_mollifier_positive(x):
    assert Mollifier(100.0).value(np.array(x)) > 0


def test_mollifier_rejects_bad_epsilon():
    for eps in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            Mollifier(eps)


@given(ratio=st.floats(0.25, 2.0), offset=st.floats(0.0, 1.0))
def test_mollifier_grid_sum_matches_poisson_summation(ratio, offset):
    # midpoint sum of phi over a grid of spacing h, centred at offset*h from a node:
    # 1 + 2 sum_k exp(-2 pi^2 k^2 eps / h^2) cos(2 pi k offset)
    h = 0.5
    eps = ratio * h * h
    grid = build_grid(h * 60, 120, 1)
    centre = grid.centers[60, 0] + offset * h
    s = h * float(np.sum(Mollifier(eps).value(grid.centers - centre)))
    k = np.arange(1, 8)
    expected = 1 + 2 * np.sum(np.exp(-2 * math.pi**2 * k**2 * ratio) * np.cos(2 * math.pi * k * offset))
    assert s == pytest.approx(expected, abs=1e-13)


@given(ratio=st.floats(0.75, 4.0), offset=st.floats(0.0, 1.0))
def test_mollifier_grid_sum_within_band_for_wide_kernels(ratio, offset):
    h = 0.25
    eps = ratio * h * h
    grid = build_grid(h * 60, 120, 1)
    s = h * float(np.sum(Mollifier(eps).value(grid.centers - offset * h)))
    assert abs(s - 1) <= 1e-6


def test_default_epsilon():
    assert default_epsilon(0.5) == pytest.approx(0.64 * 0.5**1.98, rel=1e-15)


# -- collision kernel ---------------------------------------------------------------


def test_kernel_maxwell_hand_value():
    out = kernel_matrix_apply(CollisionKernel(1 / 16, 0.0), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    np.testing.assert_array_equal(out, [0.0, 1 / 16])


def test_kernel_zero_displacement_coulomb():
    out = kernel_matrix_apply(CollisionKernel(1 / 16, -3.0), np.zeros(2), np.array([1.0, 2.0]))
    np.testing.assert_array_equal(out, [0.0, 0.0])
    assert np.all(CollisionKernel(1.0, -3.0).matrix(np.zeros(2)) == 0)


def test_kernel_tiny_separation_stays_finite():
    # |x|^-3 alone overflows here, but A(x) v = C |x|^-1 (v - (x.v/|x|^2) x) does not
    x = np.array([1e-148, 0.0])
    out = kernel_matrix_apply(CollisionKernel(1.0, -3.0), x, np.array([0.0, 1.0]))
    np.testing.assert_allclose(out, [0.0, 1e148], rtol=1e-15)


@pytest.mark.parametrize("gamma", [0.0, -3.0, 1.0, -1.5])
def test_kernel_null_space_and_matrix(gamma, rng):
    k = CollisionKernel(0.3, gamma)
    for _ in range(50):
        x = rng.normal(size=2)
        v = rng.normal(size=2)
        scale = 0.3 * np.linalg.norm(x) ** (gamma + 2)
        assert np.linalg.norm(kernel_matrix_apply(k, x, x)) <= 1e-14 * scale * np.linalg.norm(x)
        np.testing.assert_allclose(kernel_matrix_apply(k, x, v), k.matrix(x) @ v,
                                   rtol=0, atol=1e-14 * scale * np.linalg.norm(v))


@pytest.mark.parametrize("gamma", [0.0, -3.0])
def test_kernel_psd_and_symmetric(gamma, rng):
    k = CollisionKernel(1 / 16, gamma)
    x = rng.normal(size=(10_000, 2)) * 3
    u = rng.normal(size=(10_000, 2))
    v = rng.normal(size=(10_000, 2))
    size = k.strength * np.linalg.norm(x, axis=1) ** (gamma + 2)
    quad = np.einsum("pk,pk->p", v, kernel_matrix_apply(k, x, v))
    assert np.all(quad >= -1e-12 * size * np.sum(v * v, axis=1))
    a = np.einsum("pk,pk->p", kernel_matrix_apply(k, x, v), u)
    b = np.einsum("pk,pk->p", kernel_matrix_apply(k, x, u), v)
    uv = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
    assert np.max(np.abs(a - b) / (size * uv)) <= 1e-14
    np.testing.assert_array_equal(kernel_matrix_apply(k, -x, v), kernel_matrix_apply(k, x, v))


def test_kernel_rejects_nonpositive_strength():
    with pytest.raises(ValueError):
        CollisionKernel(0.0)


# -- potentials ----------------------------------------------------------------------


def test_potential_registry():
    q = potential("quadratic")
    assert q.value(np.array([[1.0, 2.0]]))[0] == 2.5
    assert check_interaction(potential("quadratic", "interaction"), 2)
    assert check_interaction(potential("zero", "interaction"), 1)
    with pytest.raises(ValueError):
        potential("coulomb")
    with pytest.raises(ValueError):
        PowerLaw(1.0)


# -- h_eps -------------------------------------------------------------------------


def test_h_eps_single_particle_at_origin():
    grid = build_grid(4.0, 40, 1)
    model = AggregationDiffusion(LogEntropy(), Mollifier(default_epsilon(grid.cell_size)), grid)
    ens = ParticleEnsemble(np.zeros((1, 1)), np.ones(1))
    c = grid.centers
    # odd summand: the result is zero up to round-off relative to the summed magnitudes
    scale = grid.cell_volume * np.sum(np.abs(model.mollifier.gradient(-c)[:, 0])
                                      * np.abs(model.mollifier.log_value(c) + 1))
    assert np.abs(h_eps(model, ens, np.zeros((1, 1)))).max() <= 1e-14 * scale


@pytest.mark.parametrize("internal", [LogEntropy(), PowerLaw(1.5)])
@pytest.mark.parametrize("d", [1, 2])
def test_h_eps_antisymmetric_pair(internal, d):
    grid = build_grid(4.0, 20, d)
    model = AggregationDiffusion(internal, Mollifier(default_epsilon(grid.cell_size)), grid)
    a = np.full(d, 0.37)
    ens = ParticleEnsemble(np.stack([a, -a]), np.array([0.5, 0.5]))
    out = h_eps(model, ens, np.stack([a, -a]))
    np.testing.assert_allclose(out[0], -out[1], rtol=1e-13, atol=1e-16)


def test_h_eps_matches_brute_force_log(heat60):
    model, ens = heat60.model, heat60.ensemble
    oracle = brute_force_h(ens.positions, ens.weights, heat60.epsilon, heat60.grid,
                           lambda g: math.log(g) + 1.0)
    assert rel(h_eps(model, ens, ens.positions), oracle) <= 1e-13


def test_h_eps_matches_brute_force_bare_log(heat60):
    model = dataclasses.replace(heat60.model, internal=LogEntropy(mass_term=False))
    ens = heat60.ensemble
    oracle = brute_force_h(ens.positions, ens.weights, heat60.epsilon, heat60.grid, math.log)
    assert rel(h_eps(model, ens, ens.positions), oracle) <= 1e-13


def test_h_eps_matches_brute_force_power_law(heat60):
    model = dataclasses.replace(heat60.model, internal=PowerLaw(1.5))
    ens = heat60.ensemble
    oracle = brute_force_h(ens.positions, ens.weights, heat60.epsilon, heat60.grid,
                           lambda g: 3.0 * g**0.5)
    assert rel(h_eps(model, ens, ens.positions), oracle) <= 1e-13


def test_h_eps_two_dimensional_matches_direct_sum(rng):
    grid = build_grid(3.0, 12, 2)
    eps = default_epsilon(grid.cell_size)
    model = Landau(CollisionKernel(), Mollifier(eps), grid)
    x = rng.normal(size=(9, 2))
    w = rng.uniform(0.1, 1.0, 9)
    ens = ParticleEnsemble(x, w)
    c = grid.centers
    phi = Mollifier(eps)
    g = np.array([sum(w[q] * phi.value(ci - x[q]) for q in range(9)) for ci in c])
    F = np.log(g) + 1
    oracle = np.array([sum(grid.cell_volume * phi.gradient(y - c[i]) * F[i] for i in range(len(c)))
                       for y in x])
    assert rel(h_eps(model, ens, x), oracle) <= 1e-13
    # the truncated (non-separable) path agrees when the cutoff is far out
    far = dataclasses.replace(model, mollifier=Mollifier(eps, cutoff=1e3))
    assert rel(h_eps(far, ens, x), oracle) <= 1e-13


def test_h_eps_requires_internal_energy():
    grid = build_grid(1.0, 4, 1)
    model = AggregationDiffusion(None, Mollifier(0.1), grid, external=potential("quadratic"))
    with pytest.raises(ValueError):
        h_eps(model, ParticleEnsemble(np.zeros((1, 1)), np.ones(1)), np.zeros((1, 1)))


def test_far_field_underflow_uses_log_sum_exp():
    grid = build_grid(15.0, 60, 1)
    eps = 0.01
    model = AggregationDiffusion(LogEntropy(), Mollifier(eps), grid)
    ens = ParticleEnsemble(np.zeros((1, 1)), np.ones(1))
    g, log_g = grid_density(model.mollifier, grid, ens.positions, ens.weights, True)
    assert g[0] == 0.0
    expected = Mollifier(eps).log_value(grid.centers)
    np.testing.assert_allclose(log_g, expected, rtol=1e-14)
    assert np.all(np.isfinite(h_eps(model, ens, ens.positions)))
    assert math.isfinite(energy_value(model, ens))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_log_of_zero_density_names_the_cell():
    grid = build_grid(1.0, 4, 1)
    with pytest.raises(NumericalDomainError, match="grid cell 0"):
        grid_density(Mollifier(0.01), grid, np.zeros((1, 1)), np.zeros(1), True)


# -- gradient and energy ---------------------------------------------------------------


def test_gradient_external_only(rng):
    grid = build_grid(1.0, 4, 2)
    model = AggregationDiffusion(None, Mollifier(0.1), grid, external=potential("quadratic"))
    x = rng.normal(size=(7, 2))
    ens = ParticleEnsemble(x, rng.uniform(0.1, 1, 7))
    np.testing.assert_array_equal(grad_energy(model, ens), x)
    assert energy_value(model, ens) == pytest.approx(float(ens.weights @ (0.5 * np.sum(x * x, axis=1))),
                                                     rel=1e-15)


def test_gradient_interaction_only(rng):
    grid = build_grid(1.0, 4, 1)
    model = AggregationDiffusion(None, Mollifier(0.1), grid,
                                 interaction=potential("quadratic", "interaction"))
    x = rng.normal(size=(11, 1))
    w = rng.uniform(0.1, 1, 11)
    expected = w.sum() * x - w @ x
    np.testing.assert_allclose(grad_energy(model, ParticleEnsemble(x, w)), expected, rtol=0, atol=1e-14)


def test_interaction_energy_two_particles():
    grid = build_grid(1.0, 4, 1)
    model = AggregationDiffusion(None, Mollifier(0.1), grid,
                                 interaction=potential("quadratic", "interaction"))
    ens = ParticleEnsemble(np.array([[1.0], [-1.0]]), np.ones(2))
    assert energy_value(model, ens) == 2.0


@pytest.mark.parametrize("d", [1, 2])
def test_single_particle_entropy_closed_form(d):
    eps = 0.05
    grid = build_grid(2.0, 200 if d == 1 else 120, d)
    model = AggregationDiffusion(LogEntropy(), Mollifier(eps), grid)
    e = energy_value(model, ParticleEnsemble(np.zeros((1, d)), np.ones(1)))
    assert e == pytest.approx(-(d / 2) * (1 + math.log(2 * math.pi * eps)), rel=1e-6)


def test_compatibility_log_entropy(heat40):
    assert compatibility_error(heat40.model, heat40.ensemble.positions, heat40.ensemble.weights) <= 1e-6


def test_compatibility_power_law(porous40, rng):
    ens = porous40.ensemble
    x = ens.positions + 0.05 * rng.normal(size=ens.positions.shape)
    assert compatibility_error(porous40.model, x, ens.weights) <= 1e-9


def test_bare_log_residual_is_grid_defect(heat40, rng):
    # with the bare log g field, FD(E) - w G equals w_p sum_i h grad(phi)(x_p - x_i)
    model = dataclasses.replace(heat40.model, internal=LogEntropy(mass_term=False))
    ens = heat40.ensemble
    x = ens.positions + 0.1 * rng.normal(size=ens.positions.shape)
    moved = ens.with_positions(x)
    step = 1e-5
    fd = np.zeros_like(x)
    for p in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[p, 0] += step
        xm[p, 0] -= step
        fd[p, 0] = (energy_value(model, moved.with_positions(xp))
                    - energy_value(model, moved.with_positions(xm))) / (2 * step)
    wG = ens.weights[:, None] * grad_energy(model, moved)
    phi = model.mollifier
    defect = np.array([[heat40.grid.cell_volume * np.sum(phi.gradient(xp - heat40.grid.centers))]
                       for xp in x]) * ens.weights[:, None]
    assert rel(fd - wG, defect) <= 1e-3
    # on the grid-aligned initial state the defect cancels by symmetry, except
    # near the truncated boundary where the weights are negligible
    on_grid = np.array([np.sum(phi.gradient(xp - heat40.grid.centers)) for xp in ens.positions])
    wG0 = ens.weights[:, None] * grad_energy(model, ens)
    assert np.linalg.norm(heat40.grid.cell_volume * ens.weights * on_grid) <= 1e-9 * np.linalg.norm(wG0)
