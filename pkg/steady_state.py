"""
Steady state module.

Solves the Emden-Fowler equation w'' + (2/r) w' = -4 pi g(w_+), w = E0 - U0,
by shooting from a regular center, matches a prescribed mass (scaling family
for homogeneous g, bisection otherwise) and samples the steady state on a grid.
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from config import Config
from convex_reduction import ConvexScalarFunction, GFunction
from errors import (
    BracketFailureError,
    DomainCutoffError,
    InvalidParameterError,
    StiffnessError,
    UnboundedProfileError,
)
from radial_field import (
    EnergyReport,
    RadialDensity,
    RadialGrid,
    RadialPotential,
    energy_report,
    potential_from_density,
)
from utils import app_logger, logged_stage

ArrayLike = Union[float, np.ndarray]

FOUR_PI = 4.0 * math.pi
START_FRACTION = 1e-6      # series start r0 in units of the central length scale
MAX_RADIUS_FACTOR = 1e3    # give up beyond this many central length scales
MEAN_VALUE_STEPS = 52


# --- Shooting ---
@dataclass(frozen=True, eq=False)
class ShootingProfile:
    """w(r) = alpha * w_ref(beta * r) where w_ref is an integrated profile.

    `alpha = beta = 1` for a profile straight from `shoot`; other values come
    from the Emden-Fowler scaling family of homogeneous g.
    """
    g: GFunction
    central_value: float
    radius: float
    mass: float
    multiplier: float
    start_radius: float
    solution: object = field(repr=False)
    alpha: float = 1.0
    beta: float = 1.0

    def _reference(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        # scaled quantities: R = R_ref / beta, M = M_ref * alpha / beta
        w_c = self.central_value / self.alpha
        radius = self.radius * self.beta
        mass = self.mass * self.beta / self.alpha
        g_c = self.g(w_c)
        w = np.empty_like(x)
        dw = np.empty_like(x)
        near = x <= self.start_radius
        w[near] = w_c - 2.0 * math.pi / 3.0 * g_c * x[near] ** 2
        dw[near] = -FOUR_PI / 3.0 * g_c * x[near]
        mid = ~near & (x <= radius)
        if np.any(mid):
            values = self.solution(x[mid])
            w[mid], dw[mid] = values[0], values[1]
        far = x > radius
        w[far] = -mass / radius + mass / x[far]
        dw[far] = -mass / x[far] ** 2
        return w, dw

    def w(self, r: ArrayLike) -> ArrayLike:
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = self.alpha * self._reference(self.beta * r_arr)[0]
        return out if np.ndim(r) else float(out[0])

    def dw(self, r: ArrayLike) -> ArrayLike:
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = self.alpha * self.beta * self._reference(self.beta * r_arr)[1]
        return out if np.ndim(r) else float(out[0])

    def potential(self, r: ArrayLike) -> ArrayLike:
        """U0(r) = E0 - w(r) inside the support, -M/r outside."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        with np.errstate(divide="ignore"):
            out = np.where(r_arr >= self.radius, -self.mass / r_arr, self.multiplier - self.w(r_arr))
        return out if np.ndim(r) else float(out[0])

    def enclosed_mass(self, r: ArrayLike) -> ArrayLike:
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.where(r_arr >= self.radius, self.mass, -r_arr ** 2 * self.dw(r_arr))
        return out if np.ndim(r) else float(out[0])

    def scaled(self, alpha: float) -> "ShootingProfile":
        """Member alpha of the scaling family: w -> alpha w(beta r), beta^2 = alpha^(n-1)."""
        if not self.g.is_homogeneous:
            raise InvalidParameterError("the scaling family needs a homogeneous g")
        if not alpha > 0:
            raise InvalidParameterError(f"scale factor must be positive, got {alpha}")
        n = self.g.exponent
        beta = alpha ** (0.5 * (n - 1.0))
        return replace(
            self,
            central_value=self.central_value * alpha,
            radius=self.radius / beta,
            mass=self.mass * alpha / beta,
            multiplier=self.multiplier * alpha,
            alpha=self.alpha * alpha,
            beta=self.beta * beta,
        )


def shoot(g: GFunction, central_value: float, rtol: float = 0.0) -> ShootingProfile:
    """Integrate from the regular center to the first zero of w."""
    if not central_value > 0:
        raise InvalidParameterError(f"central value must be positive, got {central_value}")
    if central_value > g.max_argument:
        raise DomainCutoffError(f"central value {central_value:.6g} beyond g's table range {g.max_argument:.6g}")
    rtol = rtol or Config.ODE_RTOL
    g_c = g(central_value)
    if not g_c > 0:
        raise UnboundedProfileError(f"g({central_value:.6g}) = 0: the profile never reaches zero")

    length = math.sqrt(central_value / (FOUR_PI * g_c))
    r0 = START_FRACTION * length
    y0 = [central_value - 2.0 * math.pi / 3.0 * g_c * r0 ** 2, -FOUR_PI / 3.0 * g_c * r0]

    def rhs(r: float, y: np.ndarray) -> List[float]:
        w, dw = y
        return [dw, -2.0 * dw / r - FOUR_PI * g(max(w, 0.0))]

    def edge(r: float, y: np.ndarray) -> float:
        return y[0]

    edge.terminal = True
    edge.direction = -1

    sol = solve_ivp(
        rhs,
        (r0, MAX_RADIUS_FACTOR * length),
        y0,
        method="RK45",
        rtol=rtol,
        atol=[1e-3 * rtol * central_value, 1e-3 * rtol * central_value / length],
        events=edge,
        dense_output=True,
    )
    if sol.status == -1:
        raise StiffnessError(f"integration failed at w_c={central_value:.6g}: {sol.message}")
    if sol.t_events[0].size == 0:
        raise UnboundedProfileError(
            f"no zero of w before r={MAX_RADIUS_FACTOR * length:.6g} (w_c={central_value:.6g})"
        )

    radius = float(sol.t_events[0][0])
    mass = float(-radius ** 2 * sol.y_events[0][0][1])
    profile = ShootingProfile(
        g=g,
        central_value=central_value,
        radius=radius,
        mass=mass,
        multiplier=-mass / radius,
        start_radius=r0,
        solution=sol.sol,
    )
    app_logger.debug(f"shoot w_c={central_value:.6g}: R={radius:.10g} M={mass:.10g}")
    return profile


# --- Steady States ---
@dataclass(frozen=True, eq=False)
class SteadyState:
    density: RadialDensity
    potential: RadialPotential
    multiplier: float
    radius: float
    mass: float
    energy: EnergyReport
    rhs: GFunction
    phi: ConvexScalarFunction
    profile: Optional[ShootingProfile] = None
    alternatives: Tuple[Tuple[float, float], ...] = ()

    @property
    def central_value(self) -> float:
        if self.profile is not None:
            return self.profile.central_value
        return self.multiplier - float(self.potential.values[0])

    def summary(self) -> dict:
        return {
            "M": self.mass,
            "R": self.radius,
            "E0": self.multiplier,
            "energies": self.energy.to_dict(),
            "discrete_mass": self.density.mass,
            "alternatives": [{"w_c": w_c, "reduced_total": h} for w_c, h in self.alternatives],
        }

    @classmethod
    def from_density(cls, density: RadialDensity, multiplier: float, rhs: GFunction,
                     phi: Optional[ConvexScalarFunction] = None) -> "SteadyState":
        """Wrap a grid density with its Newtonian potential (used for iterates and competitors)."""
        phi = phi or rhs.to_phi()
        return cls(
            density=density,
            potential=potential_from_density(density),
            multiplier=multiplier,
            radius=density.support_radius,
            mass=density.mass,
            energy=energy_report(phi, density),
            rhs=rhs,
            phi=phi,
        )


def default_grid(radius: float, n_cells: int = 0, truncation: float = 0.0) -> RadialGrid:
    """Graded grid with its refined edge at the support radius; truncation defaults to 2R."""
    outer = truncation if truncation > radius else 2.0 * radius
    return RadialGrid.graded(n_cells or Config.GRID_NODES, truncation=outer, edge_radius=radius)


def _mean_value_radii(profile: ShootingProfile, grid: RadialGrid, averages: np.ndarray) -> np.ndarray:
    """Radius in each occupied cell where g(w_+) equals the cell average; nodes elsewhere."""
    radii = grid.nodes.copy()
    occupied = averages > 0
    lo, hi = grid.edges[:-1][occupied], grid.edges[1:][occupied]
    target = averages[occupied]
    # rho0 is nonincreasing, so plain bisection brackets the crossing
    for _ in range(MEAN_VALUE_STEPS):
        mid = 0.5 * (lo + hi)
        above = profile.g(np.maximum(profile.w(mid), 0.0)) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    radii[occupied] = 0.5 * (lo + hi)
    return radii


def state_from_profile(profile: ShootingProfile, grid: Optional[RadialGrid] = None,
                       phi: Optional[ConvexScalarFunction] = None) -> SteadyState:
    """Shell averages of rho0 = g(w_+) from the profile's enclosed mass.

    Every cell carries exactly its share of M. U0 is sampled where rho0 takes
    the cell's average, so rho_j = g((E0 - U_j)_+) holds cell by cell.
    """
    grid = grid or default_grid(profile.radius)
    phi = phi or profile.g.to_phi()
    cell_masses = np.maximum(np.diff(profile.enclosed_mass(grid.edges)), 0.0)
    averages = cell_masses / grid.volume_weights
    density = RadialDensity(grid, averages)
    radii = _mean_value_radii(profile, grid, averages)
    potential = RadialPotential(
        grid=grid,
        values=profile.potential(radii),
        enclosed=profile.enclosed_mass(radii),
        mass=profile.mass,
        evaluator=profile.potential,
        radii=radii,
    )
    return SteadyState(
        density=density,
        potential=potential,
        multiplier=profile.multiplier,
        radius=profile.radius,
        mass=profile.mass,
        energy=energy_report(phi, density),
        rhs=profile.g,
        phi=phi,
        profile=profile,
    )


def _bracket_central_value(g: GFunction, mass: float, rtol: float) -> Tuple[float, float]:
    def mass_of(w_c: float) -> float:
        return shoot(g, w_c, rtol).mass

    start = 1.0 if g.is_homogeneous else min(1.0, 0.5 * g.max_argument)
    lo = hi = start
    try:
        for _ in range(60):
            if mass_of(hi) >= mass:
                break
            lo, hi = hi, min(4.0 * hi, g.max_argument)
            if hi == lo:
                raise BracketFailureError(f"mass {mass:g} exceeds the largest mass of the g table")
        else:
            raise BracketFailureError(f"mass {mass:g} not reached up to w_c={hi:.3g}")
        for _ in range(60):
            if mass_of(lo) <= mass:
                break
            hi, lo = lo, 0.25 * lo
        else:
            raise BracketFailureError(f"mass {mass:g} not reached down to w_c={lo:.3g}")
    except (UnboundedProfileError, DomainCutoffError) as e:
        raise BracketFailureError(f"mass {mass:g} not attainable: {e}") from e
    return lo, hi


@logged_stage("mass matching")
def _match_mass(g: GFunction, mass: float, rtol: float, scan_points: int = 12) -> List[float]:
    """All central values with shoot(g, w_c).M = mass found on the bracketing interval."""
    lo, hi = _bracket_central_value(g, mass, rtol)
    if lo == hi:
        return [lo]

    def excess(log_w: float) -> float:
        return shoot(g, math.exp(log_w), rtol).mass / mass - 1.0

    grid = np.linspace(math.log(lo), math.log(hi), scan_points)
    values = [excess(x) for x in grid]
    roots = []
    for left, right, f_left, f_right in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f_left == 0.0:
            roots.append(math.exp(left))
        elif f_left * f_right < 0:
            roots.append(math.exp(brentq(excess, left, right, xtol=1e-14, rtol=1e-14)))
    if values[-1] == 0.0:
        roots.append(math.exp(grid[-1]))
    if not roots:
        raise BracketFailureError(f"no sign change of M(w_c) - {mass:g} on [{lo:.3g}, {hi:.3g}]")
    return roots


def solve_steady(g: GFunction, mass: float, grid: Optional[RadialGrid] = None,
                 phi: Optional[ConvexScalarFunction] = None, route: str = "auto",
                 rtol: float = 0.0, n_cells: int = 0, truncation: float = 0.0) -> SteadyState:
    """Steady state of prescribed mass.

    route "scaling" maps one reference profile through the scaling family
    (homogeneous g only); "bisection" matches the mass by root finding in w_c;
    "auto" picks scaling whenever g is homogeneous. Without a grid the state is
    sampled on default_grid(R, n_cells, truncation).
    """
    if not mass > 0:
        raise InvalidParameterError(f"mass must be positive, got {mass}")
    if route not in ("auto", "scaling", "bisection"):
        raise InvalidParameterError(f"unknown route '{route}'")
    rtol = rtol or Config.ODE_RTOL
    phi = phi or g.to_phi()

    if route == "auto":
        route = "scaling" if g.is_homogeneous else "bisection"

    if route == "scaling":
        if not g.is_homogeneous:
            raise InvalidParameterError("the scaling route needs a homogeneous g")
        n = g.exponent
        if n >= 3:
            raise BracketFailureError(f"n={n:g} >= 3: the scaling family does not reach arbitrary masses")
        reference = shoot(g, 1.0, rtol)
        profile = reference.scaled((mass / reference.mass) ** (2.0 / (3.0 - n)))
        state = state_from_profile(profile, grid or default_grid(profile.radius, n_cells, truncation), phi)
        app_logger.info(f"✅ steady state (scaling): M={mass:g} R={profile.radius:.8g} E0={profile.multiplier:.8g}")
        return state

    candidates = []
    for w_c in _match_mass(g, mass, rtol):
        profile = shoot(g, w_c, rtol)
        candidates.append(state_from_profile(
            profile, grid or default_grid(profile.radius, n_cells, truncation), phi))
    candidates.sort(key=lambda s: s.energy.reduced_total)
    best = candidates[0]
    if len(candidates) > 1:
        app_logger.warning(f"⚠️ {len(candidates)} central values give mass {mass:g}; keeping the lowest energy")
        best = replace(best, alternatives=tuple(
            (s.profile.central_value, s.energy.reduced_total) for s in candidates[1:]
        ))
    app_logger.info(
        f"✅ steady state (bisection): M={mass:g} R={best.radius:.8g} E0={best.multiplier:.8g}"
    )
    return best


# --- Scaling ---
def scale_density(rho: RadialDensity, a: float, b: float) -> RadialDensity:
    """rho_bar(x) = a * rho(b x); the grid is divided by b."""
    if not (a > 0 and b > 0):
        raise InvalidParameterError(f"scale factors must be positive, got a={a}, b={b}")
    return RadialDensity(RadialGrid(rho.grid.edges / b), a * rho.values)


def scale_steady_state(state: SteadyState, alpha: float) -> SteadyState:
    """Map a homogeneous-g state to member alpha of its scaling family.

    rho -> alpha^n rho(beta r), U -> alpha U(beta r), E0 -> alpha E0 with
    beta^2 = alpha^(n-1).
    """
    g = state.rhs
    if not g.is_homogeneous:
        raise InvalidParameterError("scaling a steady state needs a homogeneous g")
    if not alpha > 0:
        raise InvalidParameterError(f"scale factor must be positive, got {alpha}")
    n = g.exponent
    beta = alpha ** (0.5 * (n - 1.0))
    density = scale_density(state.density, alpha ** n, beta)
    source = state.potential
    potential = RadialPotential(
        grid=density.grid,
        values=alpha * source.values,
        enclosed=source.enclosed * alpha / beta,
        mass=source.mass * alpha / beta,
        evaluator=lambda r: alpha * source.at(beta * np.asarray(r, dtype=float)),
        radii=None if source.radii is None else source.radii / beta,
    )
    return replace(
        state,
        density=density,
        potential=potential,
        multiplier=alpha * state.multiplier,
        radius=state.radius / beta,
        mass=state.mass * alpha / beta,
        energy=energy_report(state.phi, density),
        profile=state.profile.scaled(alpha) if state.profile is not None else None,
    )


def euler_lagrange_residual(state: SteadyState, g: GFunction) -> float:
    """max |rho0 - g((E0 - U0)_+)| / rho0(0) over the potential's sample points."""
    rho = state.density.values
    predicted = g(np.maximum(state.multiplier - state.potential.values, 0.0))
    return float(np.max(np.abs(rho - predicted)) / max(float(rho[0]), 1e-300))
