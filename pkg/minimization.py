"""
Minimization module.

Direct minimization of the reduced functional int Phi(rho) + E_pot(rho) under
a mass constraint by a damped Euler-Lagrange fixed point, the symmetric
decreasing rearrangement, and the quantitative bounds used in the existence
argument (coercivity, splitting, scaling sub-additivity).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from config import Config
from convex_reduction import ConvexScalarFunction, GFunction, GrowthEnvelope
from errors import (
    InvalidParameterError,
    MultiplierError,
    NonConvergenceError,
)
from radial_field import (
    FOUR_PI,
    RadialDensity,
    RadialGrid,
    cell_average_potential,
    enclosed_mass,
    energy_report,
    interaction_energy,
    internal_energy,
    potential_energy,
    potential_from_density,
    reduced_energy,
    remap,
    split_at,
    uniform_ball,
)
from steady_state import SteadyState, solve_steady
from utils import app_logger, logged_stage

# sharp Hardy-Littlewood-Sobolev constant for int int f(x) f(y) / |x - y| <= C ||f||_{6/5}^2
HLS_CONSTANT = 4.0 / 3.0 * (4.0 / math.sqrt(math.pi)) ** (2.0 / 3.0)


# --- Options And Results ---
@dataclass(frozen=True)
class MinimizerOptions:
    tol: float = field(default_factory=lambda: Config.FIXED_POINT_TOL)
    max_iterations: int = field(default_factory=lambda: Config.MAX_ITERATIONS)
    damping_start: float = 0.5
    damping_max: float = 1.0
    damping_floor: float = 1e-3
    damping_growth: float = 1.5
    energy_slack: float = 1e-13
    concentration_radius: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise InvalidParameterError(f"tol must be positive, got {self.tol}")
        if not 0 < self.damping_floor <= self.damping_start <= self.damping_max <= 1.0:
            raise InvalidParameterError("damping must satisfy 0 < floor <= start <= max <= 1")


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    density: RadialDensity
    multiplier: float
    energies: Tuple[float, ...]
    residuals: Tuple[float, ...]
    concentration: Tuple[float, ...]
    iterations: int
    converged: bool

    @property
    def energy(self) -> float:
        return self.energies[-1]

    def to_state(self, phi: ConvexScalarFunction,
                 exterior: Optional[RadialDensity] = None) -> SteadyState:
        """Steady state carrying the cell-averaged potential the iteration used."""
        density = self.density
        potential = potential_from_density(density)
        values = cell_average_potential(density)
        if exterior is not None:
            exterior = remap(exterior, density.grid)
            values = values + cell_average_potential(exterior)
        return SteadyState(
            density=density,
            potential=replace(potential, values=values),
            multiplier=self.multiplier,
            radius=density.support_radius,
            mass=density.mass,
            energy=energy_report(phi, density, exterior),
            rhs=GFunction.from_phi(phi),
            phi=phi,
        )

    def summary(self) -> dict:
        return {
            "M": self.density.mass,
            "E0": self.multiplier,
            "reduced_total": self.energy,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.residuals[-1],
            "energies": list(self.energies),
            "residuals": list(self.residuals),
            "mass_outside_R0": list(self.concentration),
        }


@dataclass(frozen=True)
class SplitReport:
    """Both sides of an inequality `lhs >= rhs` with the pieces that enter it."""
    kind: str
    parameters: Dict[str, float]
    zone_masses: Tuple[float, ...]
    terms: Dict[str, float]
    lhs: float
    rhs: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameters": dict(self.parameters),
            "zone_masses": list(self.zone_masses),
            "terms": dict(self.terms),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
        }


# --- Fixed Point ---
def multiplier_for_mass(g: GFunction, potential: np.ndarray, volumes: np.ndarray,
                        mass: float) -> Tuple[float, np.ndarray]:
    """E0 with sum_j w_j g((E0 - U_j)_+) = mass, and the matching density values."""
    def mass_at(e0: float) -> float:
        return float(np.sum(volumes * g(np.maximum(e0 - potential, 0.0))))

    lo = float(np.min(potential))
    hi = max(0.0, lo + 1.0)
    for _ in range(200):
        if mass_at(hi) >= mass:
            break
        hi += max(abs(hi - lo), 1.0)
    else:
        raise MultiplierError(f"no multiplier reaches mass {mass:g} (largest tried E0={hi:.6g})")

    e0 = brentq(lambda e: mass_at(e) - mass, lo, hi, xtol=1e-15 * max(abs(lo), 1.0), rtol=1e-15)
    target = g(np.maximum(e0 - potential, 0.0))
    reached = float(np.sum(volumes * target))
    if not reached > 0:
        raise MultiplierError(f"multiplier {e0:.6g} gives an empty density")
    return e0, target * (mass / reached)


def _best_ball(phi: ConvexScalarFunction, mass: float, max_radius: float = math.inf) -> Tuple[float, float]:
    """Radius and energy of the uniform ball minimizing V Phi(M/V) - (3/5) M^2 / R."""
    radii = np.geomspace(1e-4, 1e4, 801)
    radii = radii[radii <= max_radius]
    if radii.size == 0:
        radii = np.array([max_radius])
    levels = mass / (FOUR_PI / 3.0 * radii ** 3)
    usable = phi.in_domain(levels)
    if not np.any(usable):
        return float(radii[-1]), math.inf
    radii, levels = radii[usable], levels[usable]
    energies = FOUR_PI / 3.0 * radii ** 3 * phi.value(levels) - 0.6 * mass ** 2 / radii
    best = int(np.argmin(energies))
    return float(radii[best]), float(energies[best])


def initial_ball(phi: ConvexScalarFunction, mass: float, grid: RadialGrid) -> RadialDensity:
    """Uniform ball whose radius minimizes V Phi(M/V) - (3/5) M^2 / R."""
    radius, _ = _best_ball(phi, mass, grid.truncation)
    # the ball must cover at least a few cells
    radius = max(radius, float(grid.edges[min(4, grid.n_cells)]))
    app_logger.debug(f"initial ball radius {radius:.6g}")
    return uniform_ball(grid, mass, radius)


def support_grid(phi: ConvexScalarFunction, mass: float, n_cells: int = 0,
                 truncation: Optional[float] = None) -> RadialGrid:
    """Graded grid refined up to R0 = -(3/5) M^2 / h, with h bounded above by the best ball.

    Minimizers are supported in B_R0; the truncation defaults to 2 R0.
    """
    _, energy = _best_ball(phi, mass)
    if not energy < 0:
        raise InvalidParameterError(f"no negative-energy ball of mass {mass:g}; give a truncation radius")
    support = -0.6 * mass ** 2 / energy
    outer = truncation if truncation is not None else 2.0 * support
    return RadialGrid.graded(n_cells or Config.GRID_NODES, truncation=outer,
                             edge_radius=min(support, outer))


def _mass_outside(rho: RadialDensity, energy: float, radius: Optional[float] = None) -> float:
    """Mass off B_radius; radius defaults to the support bound R0 = -(3/5) M^2 / H."""
    if radius is None:
        if energy >= 0:
            return rho.mass
        radius = -0.6 * rho.mass ** 2 / energy
    return max(rho.mass - enclosed_mass(rho, radius), 0.0)


@logged_stage("fixed-point minimization")
def minimize_reduced(
    phi: ConvexScalarFunction,
    mass: float,
    grid: RadialGrid,
    options: Optional[MinimizerOptions] = None,
    exterior: Optional[RadialDensity] = None,
    initial: Optional[RadialDensity] = None,
) -> MinimizerResult:
    """Damped iteration rho <- (1 - tau) rho + tau g((E0 - U[rho])_+) at fixed mass."""
    if not mass > 0:
        raise InvalidParameterError(f"mass must be positive, got {mass}")
    options = options or MinimizerOptions()
    g = GFunction.from_phi(phi)
    volumes = grid.volume_weights
    if exterior is not None:
        exterior = remap(exterior, grid)
        exterior_potential = cell_average_potential(exterior)
    else:
        exterior_potential = 0.0

    if initial is None:
        rho = initial_ball(phi, mass, grid)
    else:
        start = remap(initial, grid)
        if not start.mass > 0:
            raise InvalidParameterError("initial density has no mass on the minimization grid")
        rho = start.scaled(mass / start.mass)

    def energy_of(density: RadialDensity) -> float:
        return reduced_energy(phi, density, exterior)

    energy = energy_of(rho)
    energies = [energy]
    residuals: List[float] = []
    concentration = [_mass_outside(rho, energy, options.concentration_radius)]
    tau = options.damping_start
    multiplier = 0.0
    converged = False
    iteration = 0

    for iteration in range(1, options.max_iterations + 1):
        potential = cell_average_potential(rho) + exterior_potential
        multiplier, target = multiplier_for_mass(g, potential, volumes, mass)
        residual = float(np.max(np.abs(rho.values - target)) / max(float(np.max(rho.values)), 1e-300))
        residuals.append(residual)
        decrement = energies[-2] - energies[-1] if len(energies) > 1 else math.inf
        if residual < options.tol and decrement <= options.tol * abs(energy):
            converged = True
            break

        while True:
            candidate = rho.with_values((1.0 - tau) * rho.values + tau * target)
            candidate_energy = energy_of(candidate)
            if candidate_energy <= energy + options.energy_slack * abs(energy):
                break
            tau *= 0.5
            if tau < options.damping_floor:
                raise NonConvergenceError(
                    f"energy increases at damping {tau:.3g} after {iteration} iterations",
                    energies=energies,
                    residuals=residuals,
                )
            app_logger.debug(f"iteration {iteration}: energy increase, damping -> {tau:.4g}")

        rho, energy = candidate, candidate_energy
        energies.append(energy)
        concentration.append(_mass_outside(rho, energy, options.concentration_radius))
        tau = min(options.damping_max, tau * options.damping_growth)
        if iteration % 100 == 0:
            app_logger.debug(f"iteration {iteration}: H={energy:.12g} residual={residual:.3e} tau={tau:.3g}")

    if converged:
        app_logger.info(f"✅ minimizer converged in {iteration} iterations: H={energy:.12g} E0={multiplier:.10g}")
    else:
        app_logger.warning(f"⚠️ minimizer stopped after {iteration} iterations, residual {residuals[-1]:.3e}")
    return MinimizerResult(
        density=rho,
        multiplier=multiplier,
        energies=tuple(energies),
        residuals=tuple(residuals),
        concentration=tuple(concentration),
        iterations=iteration,
        converged=converged,
    )


# --- Rearrangement ---
def rearrange_decreasing(rho: RadialDensity) -> RadialDensity:
    """Equimeasurable nonincreasing profile: shells sorted by value and repacked from the center."""
    if rho.is_nonincreasing():
        return rho
    order = np.argsort(-rho.values, kind="stable")
    volumes = rho.grid.volume_weights[order]
    edges = np.concatenate([[0.0], np.cbrt(np.cumsum(volumes) * 3.0 / FOUR_PI)])
    return RadialDensity(RadialGrid(edges), rho.values[order])


# --- Bounds ---
def coercivity_constants(envelope: GrowthEnvelope, mass: float) -> Tuple[float, float]:
    """(K, K0) with -E_pot(rho) <= K (int Phi)^{n/3} + K0 for densities of the given mass.

    From HLS, interpolation of L^{6/5} between L^1 and L^{1+1/n}, and the
    lower growth bound of Phi (with rho below the threshold handled through M).
    """
    n = envelope.lower_index
    base = 0.5 * HLS_CONSTANT * mass ** ((5.0 - n) / 3.0)
    slope = base * envelope.lower_constant ** (-n / 3.0)
    offset = base * (envelope.large_threshold ** (1.0 / n) * mass) ** (n / 3.0)
    return slope, offset


def coercivity_bound(envelope: GrowthEnvelope, rho: RadialDensity,
                     phi: Optional[ConvexScalarFunction] = None) -> SplitReport:
    """H(rho) >= int Phi - K0 - K (int Phi)^{n/3}; Phi defaults to the lower envelope itself."""
    if phi is None:
        phi = ConvexScalarFunction(kind="power", coefficient=envelope.lower_constant,
                                   exponent=1.0 + 1.0 / envelope.lower_index, label="Phi_lower")
    mass = rho.mass
    slope, offset = coercivity_constants(envelope, mass)
    internal = internal_energy(phi, rho)
    epot = potential_energy(rho)
    lhs = internal + epot
    rhs = internal - offset - slope * internal ** (envelope.lower_index / 3.0)
    return SplitReport(
        kind="coercivity",
        parameters={"n": envelope.lower_index, "K": slope, "K0": offset},
        zone_masses=(mass,),
        terms={"internal": internal, "epot": epot},
        lhs=lhs,
        rhs=rhs,
        satisfied=bool(lhs >= rhs - 1e-12 * max(abs(lhs), abs(rhs), 1e-300)),
    )


def splitting_bound_sym(rho: RadialDensity, radius: float, h_upper: float,
                        phi: ConvexScalarFunction) -> SplitReport:
    """H(rho) >= h + (1/R0 - 1/R)(M - m) m with m the mass off B_R and R0 = -(3/5) M^2 / h."""
    if not radius > 0:
        raise InvalidParameterError(f"split radius must be positive, got {radius}")
    if not h_upper < 0:
        raise InvalidParameterError(f"the energy bound must be negative, got {h_upper}")
    mass = rho.mass
    inner, outer = split_at(rho, radius)
    outside = outer.mass
    support_bound = -0.6 * mass ** 2 / h_upper
    cross = interaction_energy(inner, outer)
    cross_bound = (mass - outside) * outside / radius
    lhs = reduced_energy(phi, rho)
    rhs = h_upper + (1.0 / support_bound - 1.0 / radius) * (mass - outside) * outside
    slack = 1e-10 * abs(h_upper)
    return SplitReport(
        kind="splitting",
        parameters={"R": radius, "R0": support_bound, "h_upper": h_upper},
        zone_masses=(inner.mass, outside),
        terms={"cross": cross, "cross_bound": cross_bound},
        lhs=lhs,
        rhs=rhs,
        satisfied=bool(lhs >= rhs - slack and cross <= cross_bound * (1 + 1e-12) + 1e-300),
    )


_GL_PAIR = leggauss(2)
_GL_OUTER = leggauss(4)


def short_range_energy(rho: RadialDensity, reach: float, chunk: int = 256) -> float:
    """int int_{|x - y| < reach} rho(x) rho(y) / |x - y| dx dy.

    Shell pairs at radii r, s contribute 16 pi^2 r s rho(r) rho(s) L / 2 with
    L = max(0, min(2 min(r, s), reach - |r - s|)); the inner integral is exact
    (L is linear between its breakpoints r, reach - r, r +- reach).
    """
    grid = rho.grid
    occupied = np.flatnonzero(rho.values > 0)
    if occupied.size == 0:
        return 0.0
    a = grid.edges[:-1][occupied]
    b = grid.edges[1:][occupied]
    levels = rho.values[occupied]
    x_pair, w_pair = _GL_PAIR

    outer_x, outer_w = _GL_OUTER
    r_all = (a[:, None] + 0.5 * (b - a)[:, None] * (outer_x + 1.0)).ravel()
    w_all = (0.5 * (b - a)[:, None] * outer_w).ravel()
    level_all = np.repeat(levels, outer_x.size)

    total = 0.0
    for start in range(0, r_all.size, chunk):
        r = r_all[start:start + chunk, None, None]
        breaks = np.concatenate([
            np.broadcast_to(a[None, :, None], (r.shape[0], a.size, 1)),
            np.clip(np.concatenate([r, reach - r, r - reach, r + reach], axis=2)
                    * np.ones((1, a.size, 1)), a[None, :, None], b[None, :, None]),
            np.broadcast_to(b[None, :, None], (r.shape[0], a.size, 1)),
        ], axis=2)
        breaks.sort(axis=2)
        lo, hi = breaks[..., :-1], breaks[..., 1:]
        inner = np.zeros(lo.shape[:2])
        for xq, wq in zip(x_pair, w_pair):
            s = lo + 0.5 * (hi - lo) * (xq + 1.0)
            kernel = np.maximum(0.0, np.minimum(2.0 * np.minimum(r, s), reach - np.abs(r - s)))
            inner += np.sum(0.5 * (hi - lo) * wq * s * kernel, axis=2)
        inner_sum = inner @ levels
        chunk_r = r[:, 0, 0]
        total += float(np.sum(level_all[start:start + chunk] * chunk_r * inner_sum * w_all[start:start + chunk]))
    return 8.0 * math.pi ** 2 * total


def split_potential_estimate(rho: RadialDensity, radius: float, index: float = 1.0) -> SplitReport:
    """Split -2 E_pot by pair distance (<= 1/R, between, >= R) and bound the central-ball mass.

    lhs is the mass in B_R; rhs is (1/(R M)) (-2 E_pot - M^2/R - C ||rho||_p^2 R^{-(5-n)/(n+1)})
    with p = 1 + 1/n and C = (4 pi / (3 - q))^{1/q}, q = (n + 1)/2.
    """
    if not radius > 1:
        raise InvalidParameterError(f"split radius must exceed 1, got {radius}")
    if not 0 < index < 5:
        raise InvalidParameterError(f"index must lie in (0, 5), got {index}")
    mass = rho.mass
    total = -2.0 * potential_energy(rho)
    near = short_range_energy(rho, 1.0 / radius)
    within = short_range_energy(rho, radius)
    terms = {"I1": near, "I2": within - near, "I3": total - within, "total": total}

    q = 0.5 * (index + 1.0)
    young = (FOUR_PI / (3.0 - q)) ** (1.0 / q)
    p = 1.0 + 1.0 / index
    norm = float(np.sum(rho.values ** p * rho.grid.volume_weights)) ** (1.0 / p)
    terms["I1_bound"] = young * norm ** 2 * radius ** (-(5.0 - index) / (index + 1.0))
    terms["I3_bound"] = mass ** 2 / radius

    central = enclosed_mass(rho, radius)
    if mass > 0:
        bound = (total - mass ** 2 / radius - terms["I1_bound"]) / (radius * mass)
    else:
        bound = 0.0
    return SplitReport(
        kind="potential_split",
        parameters={"R": radius, "n": index, "young_constant": young},
        zone_masses=(central, mass - central),
        terms=terms,
        lhs=central,
        rhs=bound,
        satisfied=bool(central >= bound - 1e-12 * max(mass, 1e-300)),
    )


def polytrope_energy_exponent(n: float) -> float:
    """h_M = h_1 M^{(5-n)/(3-n)} for Phi = c rho^{1+1/n}."""
    if not 0 < n < 3:
        raise InvalidParameterError(f"energy law needs 0 < n < 3, got n={n}")
    return (5.0 - n) / (3.0 - n)


@dataclass(frozen=True)
class SubadditivityReport:
    mass: float
    fractions: Tuple[float, ...]
    energies: Tuple[float, ...]
    reference_energy: float
    bounds: Tuple[float, ...]
    exact_ratios: Tuple[Optional[float], ...]
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "reference_energy": self.reference_energy,
            "rows": [
                {"fraction": f, "energy": h, "bound": b, "exact_ratio": r}
                for f, h, b, r in zip(self.fractions, self.energies, self.bounds, self.exact_ratios)
            ],
            "satisfied": self.satisfied,
        }


def subadditivity_check(phi: ConvexScalarFunction, mass_fractions: Sequence[float],
                        mass: float = 1.0) -> SubadditivityReport:
    """h at fraction*M against fraction^{5/3} h_M (both negative)."""
    fractions = tuple(float(f) for f in mass_fractions)
    if any(not 0 < f <= 1 for f in fractions):
        raise InvalidParameterError(f"mass fractions must lie in (0, 1], got {fractions}")
    g = GFunction.from_phi(phi)
    reference = solve_steady(g, mass, phi=phi).energy.reduced_total
    energies = tuple(
        reference if f == 1.0 else solve_steady(g, f * mass, phi=phi).energy.reduced_total
        for f in fractions
    )
    bounds = tuple(f ** (5.0 / 3.0) * reference for f in fractions)
    if phi.is_power:
        law = polytrope_energy_exponent(phi.polytropic_index)
        ratios = tuple(f ** law for f in fractions)
    else:
        ratios = tuple(None for _ in fractions)
    slack = 1e-9 * abs(reference)
    satisfied = reference < 0 and all(h >= b - slack for h, b in zip(energies, bounds))
    return SubadditivityReport(
        mass=mass,
        fractions=fractions,
        energies=energies,
        reference_energy=reference,
        bounds=bounds,
        exact_ratios=ratios,
        satisfied=bool(satisfied),
    )
