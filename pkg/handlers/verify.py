"""
Verification command handlers for the energy-Casimir reduction toolkit.
Contains the acceptance suite (`verify`) and mass sweeps (`sweep`).
"""

import argparse
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import beta as beta_function

from config import Config
from convex_reduction import (
    VELOCITY_MEASURE,
    GFunction,
    emden_rhs,
    fit_power_law,
    make_polytrope_phi,
    make_polytrope_q,
    phi_from_q,
)
from errors import EXIT_OK, CasimirError, ConfigError, VerificationFailure
from handlers.pipeline import COMPETITOR_SCALES, load_model, output_dir
from minimization import (
    MinimizerOptions,
    minimize_reduced,
    polytrope_energy_exponent,
    rearrange_decreasing,
    short_range_energy,
    split_potential_estimate,
    subadditivity_check,
)
from phase_space_lift import energy_report as lifted_energy_report
from radial_field import (
    RadialDensity,
    RadialGrid,
    internal_energy,
    l1_distance,
    potential_energy,
    potential_energy_gradient,
    potential_energy_pairing,
    reduced_energy,
)
from steady_state import SteadyState, scale_density, shoot, solve_steady
from utils import app_logger, cli_command, write_csv, write_json

LEGENDRE_INDICES = (0.5, 1.0, 1.4)
ROUTE_INDICES = (0.5, 1.0, 1.5, 2.0, 2.5)
LIFT_INDICES = (0.5, 1.0)
SCALING_PAIRS = ((8.0, 2.0), (1.0, 2.0), (27.0, 3.0))
RANDOM_SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    """One row of the verification table; passed means value <= tolerance."""
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


def _check(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(value) and value <= tolerance)
    log = app_logger.info if passed else app_logger.error
    log(f"{'✅' if passed else '❌'} {name}: {value:.3e} (tolerance {tolerance:.1e})")
    return CheckResult(name=name, value=float(value), tolerance=float(tolerance), passed=passed, detail=detail)


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class SuiteContext:
    """Solved states and minimizers shared between checks, computed once."""

    def __init__(self, grid_nodes: int, rng: np.random.Generator):
        self.grid_nodes = grid_nodes
        self.rng = rng
        self._routes: Dict[float, tuple] = {}

    def route_pair(self, n: float) -> tuple:
        """(steady state, minimizer) of the n-polytrope at M = 1 on a common grid."""
        if n not in self._routes:
            phi = make_polytrope_phi(n)
            state = solve_steady(GFunction.from_phi(phi), 1.0, phi=phi, n_cells=self.grid_nodes)
            result = minimize_reduced(phi, state.density.mass, state.density.grid, MinimizerOptions())
            self._routes[n] = (state, result)
        return self._routes[n]

    def random_densities(self, count: int, cells: int = 200) -> List[RadialDensity]:
        densities = []
        for _ in range(count):
            grid = RadialGrid.graded(cells, truncation=float(self.rng.uniform(1.0, 5.0)))
            values = self.rng.uniform(0.0, 2.0, cells) * (self.rng.uniform(size=cells) > 0.2)
            values[0] = max(values[0], 0.1)
            densities.append(RadialDensity(grid, values))
        return densities


# --- Checks ---
def check_legendre(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for k in LEGENDRE_INDICES:
        phi = phi_from_q(make_polytrope_q(k))
        fit = fit_power_law(phi.value)
        expected = 1.0 + 1.0 / (k + 1.5)
        rows.append(_check(f"legendre_pipeline[k={k:g}]", max(fit.residual, abs(fit.exponent - expected)), 1e-6,
                           f"exponent {fit.exponent:.12g}, expected {expected:.12g}"))
    return rows


def check_rhs_constants(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for k in LEGENDRE_INDICES:
        g = emden_rhs(make_polytrope_q(k))
        closed = VELOCITY_MEASURE * (k / (k + 1.0)) ** k * beta_function(k + 1.0, 1.5)
        # brute force: 4 pi sqrt(2) int_0^1 (k (1 - E) / (k + 1))^k sqrt(E) dE
        brute, _ = quad(lambda e: (k * (1.0 - e) / (k + 1.0)) ** k * math.sqrt(e), 0.0, 1.0,
                        epsabs=0.0, epsrel=1e-13, limit=200)
        brute *= VELOCITY_MEASURE
        measured = float(g(2.0)) / 2.0 ** (k + 1.5)
        rows.append(_check(f"rhs_constant[k={k:g}]", max(_relative(measured, brute), _relative(closed, brute)),
                           1e-6, f"c_k = {measured:.12g}"))
    return rows


def check_closed_form(ctx: SuiteContext) -> List[CheckResult]:
    profile = shoot(GFunction.power(0.5, 1.0), math.sqrt(2.0 * math.pi))
    return [
        _check("closed_form_radius", _relative(profile.radius, math.sqrt(0.5 * math.pi)), 1e-6),
        _check("closed_form_mass", _relative(profile.mass, math.pi), 1e-6),
    ]


def check_route_agreement(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for n in ROUTE_INDICES:
        state, result = ctx.route_pair(n)
        h = state.energy.reduced_total
        rows.append(_check(f"route_energy[n={n:g}]", _relative(result.energy, h), 1e-6,
                           f"H shooting {h:.12g}, minimizer {result.energy:.12g}"))
        rows.append(_check(f"route_l1[n={n:g}]",
                           l1_distance(result.density, state.density) / state.density.mass, 1e-4))
    return rows


def check_reduction_identity(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for k in LIFT_INDICES:
        q = make_polytrope_q(k)
        phi = phi_from_q(q)
        state = solve_steady(emden_rhs(q), 1.0, phi=phi, n_cells=ctx.grid_nodes)
        report = lifted_energy_report(q, phi, state)
        rows.append(_check(f"reduction_gap[k={k:g}]", abs(report.gap) / abs(report.reduced_total), 1e-5))
        worst = min(lifted_energy_report(q, phi, state, beta).gap for beta in COMPETITOR_SCALES)
        rows.append(_check(f"competitor_gap_positive[k={k:g}]", 0.0 if worst > 0 else 1.0, 0.0,
                           f"smallest competitor gap {worst:.6e}"))
    return rows


def check_energy_routes(ctx: SuiteContext) -> List[CheckResult]:
    worst = 0.0
    for rho in ctx.random_densities(5):
        gradient = potential_energy_gradient(rho)
        worst = max(worst, _relative(potential_energy(rho), gradient),
                    _relative(potential_energy_pairing(rho), gradient))
    return [_check("epot_routes", worst, 1e-6)]


def check_scaling(ctx: SuiteContext) -> List[CheckResult]:
    phi = make_polytrope_phi(1.5)
    worst = 0.0
    for rho in ctx.random_densities(5):
        for a, b in SCALING_PAIRS:
            scaled = scale_density(rho, a, b)
            worst = max(
                worst,
                _relative(scaled.mass, a * b ** -3 * rho.mass),
                _relative(potential_energy(scaled), a ** 2 * b ** -5 * potential_energy(rho)),
                _relative(internal_energy(phi, scaled), b ** -3 * internal_energy(phi, rho.scaled(a))),
            )
    return [_check("scaling_identities", worst, 1e-8)]


def check_subadditivity(ctx: SuiteContext) -> List[CheckResult]:
    n = 2.5
    report = subadditivity_check(make_polytrope_phi(n), (0.5,), mass=1.0)
    violation = max(report.bounds[0] - report.energies[0], 0.0) / abs(report.reference_energy)
    exact = report.energies[0] / report.reference_energy
    return [
        _check("subadditivity", violation if report.reference_energy < 0 else math.inf, 0.0),
        _check("subadditivity_scaling_ratio", _relative(exact, 0.5 ** polytrope_energy_exponent(n)), 1e-6),
    ]


def check_support(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for n in (1.0, 2.0):
        _, result = ctx.route_pair(n)
        mass = result.density.mass
        bound = -0.6 * mass ** 2 / result.energy
        rows.append(_check(f"support_radius[n={n:g}]", max(result.density.support_radius - bound, 0.0), 0.0,
                           f"R = {result.density.support_radius:.6g}, R0 = {bound:.6g}"))
        rows.append(_check(f"mass_outside_R0[n={n:g}]", result.concentration[-1] / mass, 1e-8))
    return rows


def check_rearrangement(ctx: SuiteContext) -> List[CheckResult]:
    phi = make_polytrope_phi(1.5)
    mass_error = internal_error = increase = 0.0
    idempotent = True
    for rho in ctx.random_densities(20):
        star = rearrange_decreasing(rho)
        mass_error = max(mass_error, _relative(star.mass, rho.mass))
        internal_error = max(internal_error, _relative(internal_energy(phi, star), internal_energy(phi, rho)))
        before = potential_energy_pairing(rho)
        increase = max(increase, (potential_energy_pairing(star) - before) / abs(before))
        twice = rearrange_decreasing(star)
        idempotent &= bool(np.array_equal(twice.values, star.values)
                           and np.array_equal(twice.grid.edges, star.grid.edges))
    return [
        _check("rearrangement_mass", mass_error, 1e-8),
        _check("rearrangement_internal", internal_error, 1e-8),
        _check("rearrangement_epot_decrease", max(increase, 0.0), 1e-12),
        _check("rearrangement_idempotent", 0.0 if idempotent else 1.0, 0.0),
    ]


def check_splitting(ctx: SuiteContext) -> List[CheckResult]:
    densities = ctx.random_densities(3)
    densities.append(ctx.route_pair(1.5)[1].density)
    decomposition = i3_excess = 0.0
    for rho in densities:
        report = split_potential_estimate(rho, radius=2.0)
        total = report.terms["total"]
        everything = short_range_energy(rho, 2.5 * rho.grid.truncation)
        decomposition = max(decomposition, _relative(everything, total),
                            _relative(report.terms["I1"] + report.terms["I2"] + report.terms["I3"], total))
        i3_excess = max(i3_excess, (report.terms["I3"] - report.terms["I3_bound"]) / total)
    return [
        _check("splitting_decomposition", decomposition, 1e-6),
        _check("splitting_far_bound", max(i3_excess, 0.0), 1e-10),
    ]


def check_exterior(ctx: SuiteContext) -> List[CheckResult]:
    phi = make_polytrope_phi(1.5)
    rho = ctx.route_pair(1.5)[1].density
    with_exterior = reduced_energy(phi, rho, exterior=rho)
    expected = internal_energy(phi, rho) + 3.0 * potential_energy(rho)
    return [_check("exterior_bilinearity", _relative(with_exterior, expected), 1e-8)]


def check_virial(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for n in (1.0, 2.0):
        state, _ = ctx.route_pair(n)
        rows.append(_check(f"virial[n={n:g}]", abs(state.energy.virial_ratio * n / 3.0 + 1.0), 1e-4))
    return rows


CHECKS: Sequence[Callable[[SuiteContext], List[CheckResult]]] = (
    check_legendre,
    check_rhs_constants,
    check_closed_form,
    check_energy_routes,
    check_route_agreement,
    check_reduction_identity,
    check_scaling,
    check_subadditivity,
    check_support,
    check_rearrangement,
    check_splitting,
    check_exterior,
    check_virial,
)


def run_suite(grid_nodes: int = 0, seed: int = RANDOM_SEED) -> List[CheckResult]:
    """Run every check; a check that raises is recorded as one failed row."""
    ctx = SuiteContext(grid_nodes or Config.GRID_NODES, np.random.default_rng(seed))
    rows: List[CheckResult] = []
    for check in CHECKS:
        name = check.__name__.removeprefix("check_")
        try:
            rows.extend(check(ctx))
        except CasimirError as e:
            app_logger.error(f"❌ {name} raised {type(e).__name__}: {e}")
            rows.append(CheckResult(name=name, value=math.inf, tolerance=0.0, passed=False,
                                    detail=f"{type(e).__name__}: {e}"))
    return rows


# --- Verify Command ---
@cli_command
def verify_command(args: argparse.Namespace) -> int:
    """Handle `verify` - run the acceptance suite and write the pass/fail table."""
    out = output_dir(args)
    rows = run_suite(getattr(args, "grid_nodes", None) or 0)
    failed = [row.name for row in rows if not row.passed]
    write_json(out / "verify.json", {
        "checks": [asdict(row) for row in rows],
        "passed": not failed,
        "failed": failed,
    })
    if failed:
        raise VerificationFailure(f"{len(failed)} of {len(rows)} checks failed: {', '.join(failed)}")
    app_logger.info(f"✅ verify: all {len(rows)} checks passed")
    return EXIT_OK


# --- Sweep Command ---
def _parse_masses(text: str) -> List[float]:
    try:
        masses = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"--masses needs comma-separated numbers, got '{text}'")
    if not masses or any(not m > 0 for m in masses):
        raise ConfigError(f"--masses needs positive values, got '{text}'")
    return masses


@cli_command
def sweep_command(args: argparse.Namespace) -> int:
    """Handle `sweep` - steady states over a list of masses, solved in parallel."""
    model = load_model(args)
    masses = _parse_masses(getattr(args, "masses", None) or "0.25,0.5,1,2,4")
    out = output_dir(args)
    config = model.config

    def solve(mass: float) -> SteadyState:
        return solve_steady(model.g, mass, phi=model.phi, rtol=config.tol_ode, n_cells=config.grid_nodes)

    workers = min(Config.SWEEP_WORKERS, len(masses))
    app_logger.info(f"Sweeping {len(masses)} masses with {workers} workers...")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        states = list(executor.map(solve, masses))

    energies = np.array([s.energy.reduced_total for s in states])
    rows = [
        {"M": m, "R": s.radius, "E0": s.multiplier, "reduced_total": h}
        for m, s, h in zip(masses, states, energies)
    ]
    summary = {"model": model.describe(), "rows": rows}
    if len(masses) > 1 and np.all(energies < 0):
        slope = float(np.polyfit(np.log(masses), np.log(-energies), 1)[0])
        summary["energy_exponent"] = slope
        if model.phi.is_power:
            summary["energy_exponent_expected"] = polytrope_energy_exponent(model.phi.polytropic_index)
    write_csv(out / "sweep.csv", {
        "M": masses,
        "R": [s.radius for s in states],
        "E0": [s.multiplier for s in states],
        "H": energies,
    })
    write_json(out / "sweep.json", summary)
    app_logger.info(f"✅ sweep: {len(masses)} steady states written to {out}")
    return EXIT_OK
