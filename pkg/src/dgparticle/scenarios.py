"""Scenario registry, flat-file configuration, and the run/converge/check drivers."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .diagnostics import (
    BKW,
    Barenblatt,
    DiagnosticsRecord,
    HeatKernel,
    LinearFP,
    convergence_order,
    dissipation_from_gradient,
    error_norms,
    fisher_from_gradient,
    kinetic_energy,
    mass,
    momentum,
)
from .ensemble import ParticleEnsemble, QuadratureGrid, build_grid, init_from_density
from .errors import ConfigError, ConvergenceError
from .integrators import FixedPointConfig, MeanValueConfig, mean_value_gradient, step, step_landau
from .models import (
    AggregationDiffusion,
    CollisionKernel,
    Landau,
    LogEntropy,
    Mollifier,
    PowerLaw,
    default_epsilon,
    energy_array,
    gradient_array,
    kernel_matrix_apply,
    potential,
)

log = logging.getLogger(__name__)

SCENARIOS = ("heat", "porous_medium", "linear_fp", "nonlocal_fp", "landau_maxwell", "landau_coulomb")

_DEFAULTS = {
    "heat": dict(half_width=15.0, cells_per_dim=60, dt=0.01, t_start=2.0, t_end=3.0),
    "porous_medium": dict(half_width=8.0, cells_per_dim=60, dt=0.01, t_start=2.0, t_end=3.0),
    "linear_fp": dict(half_width=5.0, cells_per_dim=60, dt=0.01 / 10, t_start=0.5, t_end=1.0),
    "nonlocal_fp": dict(half_width=5.0, cells_per_dim=60, dt=0.01 / 10, t_start=0.5, t_end=1.0),
    "landau_maxwell": dict(half_width=4.0, cells_per_dim=40, dt=0.01 / 8, t_start=0.0, t_end=5.0,
                           kernel_gamma=0.0, diag_every=10),
    "landau_coulomb": dict(half_width=10.0, cells_per_dim=40, dt=0.1 / 2, t_start=0.0, t_end=20.0,
                           kernel_gamma=-3.0, diag_every=10),
}

_DIMENSION = {"heat": 1, "porous_medium": 1, "linear_fp": 1, "nonlocal_fp": 1,
              "landau_maxwell": 2, "landau_coulomb": 2}


@dataclass
class ScenarioConfig:
    scenario: str
    half_width: float
    cells_per_dim: int
    dt: float
    t_start: float
    t_end: float
    epsilon_coeff: float = 0.64
    epsilon_power: float = 1.98
    m: float = 1.5
    barenblatt_K: float = 1.0
    kernel_C: float = 1.0 / 16.0
    kernel_gamma: float = 0.0
    tolerance: float = 1e-15
    max_iterations: int = 200
    quadrature_nodes: int = 4
    output: Optional[str] = None
    diag_every: int = 1
    weight_floor: float = 0.0
    cutoff: Optional[float] = None

    @classmethod
    def for_scenario(cls, scenario: str, **overrides) -> ScenarioConfig:
        if scenario not in _DEFAULTS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
        values = dict(_DEFAULTS[scenario])
        values.update(overrides)
        cfg = cls(scenario=scenario, **values)
        cfg.validate()
        return cfg

    @property
    def dimension(self) -> int:
        return _DIMENSION[self.scenario]

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def validate(self):
        if self.scenario not in _DEFAULTS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end > self.t_start:
            raise ConfigError("t_end must exceed t_start")
        if self.cells_per_dim < 2:
            raise ConfigError("cells_per_dim must be at least 2")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")
        if self.scenario in ("heat", "porous_medium", "linear_fp", "nonlocal_fp") and not self.t_start > 0:
            raise ConfigError("initial time must be positive for this scenario")
        if not self.m > 1:
            raise ConfigError("m must exceed 1")
        if not self.tolerance > 0 or self.max_iterations < 1 or self.quadrature_nodes < 1:
            raise ConfigError("solver settings must be positive")
        if self.diag_every < 1:
            raise ConfigError("diag_every must be at least 1")
        if not (self.epsilon_coeff > 0 and self.kernel_C > 0 and self.barenblatt_K > 0):
            raise ConfigError("epsilon_coeff, kernel_C and barenblatt_K must be positive")


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _convert(name, raw):
    kind = _FIELDS[name].type
    if raw.lower() in ("", "none") and kind.startswith("Optional"):
        return None
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config(text: str) -> ScenarioConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    if "scenario" not in values:
        raise ConfigError("config must set 'scenario'")
    scenario = values.pop("scenario")
    return ScenarioConfig.for_scenario(scenario, **values)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


# -- scenario construction -------------------------------------------------------


def _coulomb_initial(x):
    u1 = np.array([-2.0, 1.0])
    u2 = np.array([0.0, -1.0])
    return (math.pi / 4.0) * (
        np.exp(-0.5 * np.sum((x - u1) ** 2, axis=1)) + np.exp(-0.5 * np.sum((x - u2) ** 2, axis=1))
    )


def analytic_solution(cfg: ScenarioConfig):
    return {
        "heat": HeatKernel(),
        "porous_medium": Barenblatt(cfg.m, cfg.barenblatt_K),
        "linear_fp": LinearFP(),
        "nonlocal_fp": LinearFP(),
        "landau_maxwell": BKW(),
        "landau_coulomb": None,
    }[cfg.scenario]


@dataclass
class Setup:
    grid: QuadratureGrid
    ensemble: ParticleEnsemble
    model: object
    epsilon: float
    exact: object


def build_setup(cfg: ScenarioConfig) -> Setup:
    grid = build_grid(cfg.half_width, cfg.cells_per_dim, cfg.dimension)
    eps = default_epsilon(grid.cell_size, cfg.epsilon_coeff, cfg.epsilon_power)
    moll = Mollifier(eps, cfg.cutoff)
    exact = analytic_solution(cfg)
    name = cfg.scenario
    if name == "landau_coulomb":
        f0 = _coulomb_initial
    else:
        f0 = lambda x: exact.value(cfg.t_start, x)  # noqa: E731
    ensemble = init_from_density(f0, grid, cfg.weight_floor)
    if name.startswith("landau"):
        model = Landau(CollisionKernel(cfg.kernel_C, cfg.kernel_gamma), moll, grid)
    elif name == "porous_medium":
        model = AggregationDiffusion(PowerLaw(cfg.m), moll, grid)
    elif name == "linear_fp":
        model = AggregationDiffusion(LogEntropy(), moll, grid, external=potential("quadratic"))
    elif name == "nonlocal_fp":
        model = AggregationDiffusion(LogEntropy(), moll, grid,
                                     interaction=potential("quadratic", "interaction"))
    else:
        model = AggregationDiffusion(LogEntropy(), moll, grid)
    return Setup(grid, ensemble, model, eps, exact)


# -- run -------------------------------------------------------------------------


@dataclass
class RunReport:
    config: ScenarioConfig
    records: list
    iterations: list
    errors: Optional[dict] = None
    wall_time: float = 0.0
    final_ensemble: Optional[ParticleEnsemble] = field(default=None, repr=False)

    @property
    def mean_iterations(self) -> float:
        return float(np.mean(self.iterations)) if self.iterations else 0.0

    @property
    def max_iterations(self) -> int:
        return int(max(self.iterations)) if self.iterations else 0

    def energies(self):
        return [(r.step, r.energy) for r in self.records if r.energy is not None]


def _record(n, t, ens, energy=None, fisher=None, dissipation=None, iterations=0):
    return DiagnosticsRecord(n, t, mass(ens), momentum(ens), kinetic_energy(ens), energy, fisher,
                             dissipation, iterations)


def run(cfg: ScenarioConfig, progress: Optional[Callable[[DiagnosticsRecord], None]] = None) -> RunReport:
    """Step a scenario from ``t_start`` to ``t_end``; write CSV when ``cfg.output`` is set."""
    cfg.validate()
    start = time.perf_counter()
    setup = build_setup(cfg)
    model, ens = setup.model, setup.ensemble
    w = ens.weights
    fp = FixedPointConfig(cfg.dt, cfg.tolerance, cfg.max_iterations)
    dg = MeanValueConfig(cfg.quadrature_nodes)
    landau = isinstance(model, Landau)

    records = [_record(0, cfg.t_start, ens, energy_array(model, ens.positions, w))]
    iterations = []
    n_steps = cfg.n_steps
    for n in range(1, n_steps + 1):
        try:
            res = step(model, ens, fp, dg)
        except ConvergenceError as exc:
            exc.step = n
            raise
        ens = ens.with_positions(res.positions)
        iterations.append(res.iterations)
        energy = fisher = diss = None
        if n % cfg.diag_every == 0 or n == n_steps:
            energy = energy_array(model, ens.positions, w)
        if landau:
            fisher = fisher_from_gradient(w, res.mean_gradient)
            diss = dissipation_from_gradient(model.kernel, res.midpoints, w, res.mean_gradient)
        rec = _record(n, cfg.t_start + n * cfg.dt, ens, energy, fisher, diss, res.iterations)
        records.append(rec)
        if progress is not None:
            progress(rec)

    errors = None
    if setup.exact is not None:
        errors = error_norms(ens, setup.epsilon, setup.exact, cfg.t_start + n_steps * cfg.dt, setup.grid)
    report = RunReport(cfg, records, iterations, errors, time.perf_counter() - start, ens)
    if cfg.output:
        write_csv(report, cfg.output)
    return report


def _fmt(value):
    return "" if value is None else repr(float(value))


def csv_lines(report: RunReport) -> list:
    d = report.config.dimension
    header = ["step", "time", "mass", "px"] + (["py"] if d >= 2 else []) + [
        "kinetic", "energy", "fisher", "dissipation", "iterations"]
    lines = [",".join(header)]
    for r in report.records:
        cols = [str(r.step), _fmt(r.time), _fmt(r.mass)] + [_fmt(p) for p in r.momentum[:2]]
        cols += [_fmt(r.kinetic_energy), _fmt(r.energy), _fmt(r.fisher), _fmt(r.dissipation_rate),
                 str(r.solver_iterations)]
        lines.append(",".join(cols))
    return lines


def write_csv(report: RunReport, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(csv_lines(report)) + "\n")


# -- converge --------------------------------------------------------------------


def converge(cfg: ScenarioConfig, M_list) -> dict:
    """Error table at ``t_end`` over several resolutions plus fitted orders."""
    if analytic_solution(cfg) is None:
        raise ConfigError(f"scenario {cfg.scenario!r} has no analytic solution")
    rows = []
    for M in M_list:
        sub = dataclasses.replace(cfg, cells_per_dim=int(M), output=None)
        report = run(sub)
        h = 2.0 * cfg.half_width / M
        rows.append(dict(M=int(M), h=h, **report.errors, mean_iterations=report.mean_iterations,
                         max_iterations=report.max_iterations))
        log.info("M=%d h=%.4g errors=%s", M, h, report.errors)
    orders = {}
    if len(rows) >= 2:
        hs = [r["h"] for r in rows]
        for key in ("l1", "l2", "linf"):
            orders[key] = convergence_order(hs, [r[key] for r in rows])
    return {"rows": rows, "orders": orders}


# -- check -----------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _reduced(cfg: ScenarioConfig) -> ScenarioConfig:
    cap = 40 if cfg.dimension == 1 else 12
    return dataclasses.replace(cfg, cells_per_dim=min(cfg.cells_per_dim, cap), output=None)


def compatibility_error(model, positions, weights, step_size: float = 1e-5) -> float:
    """``|FD(E) - w G| / |FD(E)|`` over all particle coordinates, central differences."""
    X = np.array(positions, dtype=float)
    w = np.asarray(weights)
    fd = np.zeros_like(X)
    for p in range(X.shape[0]):
        for k in range(X.shape[1]):
            old = X[p, k]
            X[p, k] = old + step_size
            up = energy_array(model, X, w)
            X[p, k] = old - step_size
            down = energy_array(model, X, w)
            X[p, k] = old
            fd[p, k] = (up - down) / (2.0 * step_size)
    wG = w[:, None] * gradient_array(model, X, w)
    return float(np.linalg.norm(fd - wG) / np.linalg.norm(fd))


def dg_identity_residual(model, ensemble, delta, dg: MeanValueConfig = MeanValueConfig()) -> float:
    """``|sum_p w_p Gbar_p . delta_p - dE| / |dE|`` for the step ``X -> X + delta``."""
    X = ensemble.positions
    w = ensemble.weights
    Y = X + delta
    dE = energy_array(model, Y, w) - energy_array(model, X, w)
    Gbar = mean_value_gradient(model, ensemble, X, Y, dg)
    return abs(float(np.sum(w[:, None] * Gbar * delta)) - dE) / abs(dE)


def check(cfg: ScenarioConfig, seed: int = 0) -> list:
    """Invariant suites at reduced scale; returns one ``CheckResult`` per check."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    small = _reduced(cfg)
    setup = build_setup(small)
    model, ens = setup.model, setup.ensemble
    X, w = ens.positions, ens.weights
    results = []

    limit = 1e-9 if isinstance(model.internal, PowerLaw) else 1e-6
    err = compatibility_error(model, X, w)
    results.append(CheckResult("compatibility", err <= limit, f"relative error {err:.2e} (limit {limit:g})"))

    delta = rng.normal(size=X.shape)
    delta *= 1e-2 / np.linalg.norm(delta)
    res = dg_identity_residual(model, ens, delta, MeanValueConfig(small.quadrature_nodes))
    results.append(CheckResult("dg_identity", res <= 1e-6, f"relative residual {res:.2e} (limit 1e-06)"))

    kernel = CollisionKernel(cfg.kernel_C, cfg.kernel_gamma)
    xs = rng.normal(size=(10_000, 2)) * 2.0
    vs = rng.normal(size=(10_000, 2))
    us = rng.normal(size=(10_000, 2))
    r = np.linalg.norm(xs, axis=1)
    size = kernel.strength * r ** (kernel.exponent + 2)
    quad = np.einsum("pk,pk->p", vs, kernel_matrix_apply(kernel, xs, vs))
    psd = bool(np.all(quad >= -1e-12 * size * np.sum(vs**2, axis=1)))
    lhs = np.einsum("pk,pk->p", kernel_matrix_apply(kernel, xs, vs), us)
    rhs = np.einsum("pk,pk->p", kernel_matrix_apply(kernel, xs, us), vs)
    uv = np.linalg.norm(us, axis=1) * np.linalg.norm(vs, axis=1)
    sym_err = float(np.max(np.abs(lhs - rhs) / (size * uv)))
    null_err = float(np.max(np.abs(kernel_matrix_apply(kernel, xs, xs)) / (size * r)[:, None]))
    ok = psd and sym_err <= 1e-12 and null_err <= 1e-12
    results.append(CheckResult("kernel", ok, f"psd={psd} symmetry {sym_err:.1e} null-space {null_err:.1e}"))

    # conservation holds for any gradient field: drive a Landau step with noise
    if isinstance(model, Landau):
        lmodel, lens = model, ens
    else:
        lsetup = build_setup(ScenarioConfig.for_scenario("landau_maxwell", cells_per_dim=8))
        lmodel = Landau(kernel, lsetup.model.mollifier, lsetup.grid)
        lens = lsetup.ensemble
    noise = rng.normal(size=lens.positions.shape)
    fp = FixedPointConfig(min(cfg.dt, 0.05), cfg.tolerance, cfg.max_iterations, raise_on_failure=False)
    out = step_landau(lmodel, lens, fp, gradient=lambda a, b: noise)
    after = lens.with_positions(out.positions)
    bound = max(10 * cfg.tolerance, 1e-13)
    p0 = momentum(lens)
    dp = float(np.max(np.abs(momentum(after) - p0))) / max(1.0, float(np.max(np.abs(p0))))
    dk = abs(kinetic_energy(after) - kinetic_energy(lens)) / kinetic_energy(lens)
    results.append(CheckResult("conservation", dp <= bound and dk <= bound,
                               f"momentum drift {dp:.1e}, kinetic drift {dk:.1e} (limit {bound:.0e})"))

    fp = FixedPointConfig(small.dt, small.tolerance, small.max_iterations, raise_on_failure=False)
    out = step(model, ens, fp, MeanValueConfig(small.quadrature_nodes))
    e0 = energy_array(model, X, w)
    e1 = energy_array(model, out.positions, w)
    ok = e1 <= e0 + 1e-8 * abs(e0) and np.array_equal(ens.with_positions(out.positions).weights, w)
    results.append(CheckResult("dissipation", bool(ok), f"energy {e0:.12g} -> {e1:.12g}"))
    return results
