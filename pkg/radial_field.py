"""
Radial field module.

Radial grids, shell-constant densities, Newtonian potentials and every energy
integral of a spatial density (internal, potential, reduced, interaction).

A grid is a set of cell edges 0 = e_0 < ... < e_N; a density is constant on
each shell e_j <= r < e_{j+1}. Mass, enclosed mass, potential and the energy
integrals are evaluated in closed form (or with Gauss-Legendre rules exact or
near-exact for the in-cell integrands).
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from config import Config
from convex_reduction import ConvexScalarFunction
from errors import IncompatibleGridError, InternalConsistencyError, InvalidParameterError
from utils import read_csv, write_csv

ArrayLike = Union[float, np.ndarray]

FOUR_PI = 4.0 * math.pi
_GL3 = leggauss(3)
_GL8 = leggauss(8)


# --- Grid ---
@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell edges with volume midpoints as nodes and exact shell volumes as weights."""
    edges: np.ndarray
    nodes: np.ndarray = field(init=False, repr=False)
    volume_weights: np.ndarray = field(init=False, repr=False)
    radial_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float).copy()
        if edges.ndim != 1 or edges.size < 2 or edges[0] != 0.0:
            raise InvalidParameterError("grid edges must be 1-D and start at 0")
        if np.any(np.diff(edges) <= 0):
            raise InvalidParameterError("grid edges must be strictly increasing")
        cubes = edges ** 3
        nodes = np.cbrt(0.5 * (cubes[:-1] + cubes[1:]))
        nodes[0] = 0.0
        for array in (edges, nodes):
            array.setflags(write=False)
        volumes = FOUR_PI / 3.0 * np.diff(cubes)
        radial = np.diff(edges)
        volumes.setflags(write=False)
        radial.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "volume_weights", volumes)
        object.__setattr__(self, "radial_weights", radial)

    @classmethod
    def from_edges(cls, edges: np.ndarray) -> "RadialGrid":
        return cls(np.asarray(edges, dtype=float))

    @classmethod
    def graded(cls, n_cells: int = 0, truncation: float = 1.0,
               edge_radius: Optional[float] = None) -> "RadialGrid":
        """Denser near r = 0 and near `edge_radius`; linear between the edge and the truncation."""
        n_cells = n_cells or Config.GRID_NODES
        if n_cells < 2 or not truncation > 0:
            raise InvalidParameterError(f"graded grid needs n_cells >= 2 and truncation > 0, got {n_cells}, {truncation}")
        edge = truncation if edge_radius is None else float(edge_radius)
        if not 0 < edge <= truncation:
            raise InvalidParameterError(f"edge radius {edge} must lie in (0, truncation={truncation}]")

        n_inner = n_cells if edge == truncation else max(2, int(round(0.75 * n_cells)))
        t = np.linspace(0.0, 1.0, n_inner + 1)
        inner = edge * (t - 0.9 * np.sin(2.0 * math.pi * t) / (2.0 * math.pi))
        inner[-1] = edge
        if n_inner == n_cells:
            return cls(inner)
        outer = np.linspace(edge, truncation, n_cells - n_inner + 1)[1:]
        return cls(np.concatenate([inner, outer]))

    @property
    def n_cells(self) -> int:
        return self.nodes.size

    @property
    def truncation(self) -> float:
        return float(self.edges[-1])

    def volume(self) -> float:
        return float(self.volume_weights.sum())

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or np.array_equal(self.edges, other.edges)

    def cell_of(self, r: np.ndarray) -> np.ndarray:
        """Index of the cell containing r (cells beyond the grid map to N)."""
        return np.searchsorted(self.edges, r, side="right") - 1

    def _quadrature_points(self, rule: Tuple[np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Per-cell Gauss-Legendre abscissae and weights, shape (N, points)."""
        x, w = rule
        a, b = self.edges[:-1, None], self.edges[1:, None]
        return a + 0.5 * (b - a) * (x + 1.0), 0.5 * (b - a) * w


# --- Density ---
@dataclass(frozen=True, eq=False)
class RadialDensity:
    """Shell-constant nonnegative density; `values[j]` holds on cell j."""
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).copy()
        if values.shape != self.grid.nodes.shape:
            raise InvalidParameterError(
                f"density has {values.size} values for a grid of {self.grid.n_cells} cells"
            )
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidParameterError("density values must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable[[np.ndarray], np.ndarray]) -> "RadialDensity":
        """Sample a radial profile at the grid nodes."""
        return cls(grid, np.maximum(np.asarray(func(grid.nodes), dtype=float), 0.0))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialDensity":
        return cls(grid, np.zeros(grid.n_cells))

    @property
    def cell_masses(self) -> np.ndarray:
        return self.values * self.grid.volume_weights

    @property
    def mass(self) -> float:
        return float(self.cell_masses.sum())

    @property
    def edge_masses(self) -> np.ndarray:
        """Enclosed mass at every edge, length N + 1."""
        return np.concatenate([[0.0], np.cumsum(self.cell_masses)])

    @property
    def support_radius(self) -> float:
        """Outer edge of the last occupied cell (0 for the zero density)."""
        occupied = np.flatnonzero(self.values > 0)
        return float(self.grid.edges[occupied[-1] + 1]) if occupied.size else 0.0

    def with_values(self, values: np.ndarray) -> "RadialDensity":
        return RadialDensity(self.grid, values)

    def scaled(self, factor: float) -> "RadialDensity":
        return RadialDensity(self.grid, factor * self.values)

    def is_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 0))


def uniform_ball(grid: RadialGrid, mass: float, radius: float) -> RadialDensity:
    """Uniform density of the given mass on B_radius; a cell cut by the radius gets its volume share."""
    if not (mass > 0 and radius > 0):
        raise InvalidParameterError(f"uniform ball needs mass > 0 and radius > 0, got {mass}, {radius}")
    radius = min(radius, grid.truncation)
    level = mass / (FOUR_PI / 3.0 * radius ** 3)
    inner = np.minimum(grid.edges[:-1], radius)
    outer = np.minimum(grid.edges[1:], radius)
    share = (outer ** 3 - inner ** 3) / (grid.edges[1:] ** 3 - grid.edges[:-1] ** 3)
    return RadialDensity(grid, level * share)


def remap(rho: RadialDensity, grid: RadialGrid) -> RadialDensity:
    """Conservative transfer onto another grid: cell masses follow the enclosed-mass profile."""
    if rho.grid.same_as(grid):
        return rho
    enclosed = enclosed_mass(rho, grid.edges)
    return RadialDensity(grid, np.maximum(np.diff(enclosed), 0.0) / grid.volume_weights)


def l1_distance(rho1: RadialDensity, rho2: RadialDensity) -> float:
    _require_common_grid(rho1, rho2)
    return float(np.sum(np.abs(rho1.values - rho2.values) * rho1.grid.volume_weights))


def _require_common_grid(rho1: RadialDensity, rho2: RadialDensity) -> None:
    if not rho1.grid.same_as(rho2.grid):
        raise IncompatibleGridError(
            f"densities live on different grids ({rho1.grid.n_cells} vs {rho2.grid.n_cells} cells)"
        )


def split_at(rho: RadialDensity, radius: float) -> Tuple[RadialDensity, RadialDensity]:
    """Insert an edge at `radius` and return (rho on B_R, rho off B_R) on the refined grid."""
    if not radius > 0:
        raise InvalidParameterError(f"split radius must be positive, got {radius}")
    edges = rho.grid.edges
    if radius < edges[-1] and not np.any(edges == radius):
        cell = int(rho.grid.cell_of(np.array([radius]))[0])
        grid = RadialGrid(np.insert(edges, cell + 1, radius))
        values = np.insert(rho.values, cell, rho.values[cell])
    else:
        grid, values = rho.grid, rho.values
    inside = grid.edges[1:] <= radius
    return (RadialDensity(grid, np.where(inside, values, 0.0)),
            RadialDensity(grid, np.where(inside, 0.0, values)))


# --- Enclosed Mass And Potential ---
def _in_cell_mass(rho: RadialDensity, cell: np.ndarray, r: np.ndarray) -> np.ndarray:
    a = rho.grid.edges[cell]
    level = rho.values[cell]
    # r^3 - a^3 factored to keep relative accuracy in thin cells
    return rho.edge_masses[cell] + FOUR_PI / 3.0 * level * (r - a) * (r * r + r * a + a * a)


def enclosed_mass(rho: RadialDensity, r: ArrayLike) -> ArrayLike:
    """m(r) = 4*pi int_0^r s^2 rho(s) ds."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise InvalidParameterError("enclosed mass needs r >= 0")
    n = rho.grid.n_cells
    cell = np.clip(rho.grid.cell_of(r_arr), 0, n - 1)
    out = np.where(r_arr >= rho.grid.truncation, rho.mass, _in_cell_mass(rho, cell, r_arr))
    return out if np.ndim(r) else float(out)


def _edge_tails(rho: RadialDensity) -> np.ndarray:
    """int_{e_j}^inf s rho(s) ds at every edge, by backward cumulative sum."""
    edges = rho.grid.edges
    pieces = 0.5 * rho.values * (edges[1:] ** 2 - edges[:-1] ** 2)
    return np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])


def potential_at(rho: RadialDensity, r: ArrayLike) -> ArrayLike:
    """U(r) = -m(r)/r - 4*pi int_r^inf s rho(s) ds, with U(r) = -M/r beyond the grid."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise InvalidParameterError("potential needs r >= 0")
    grid = rho.grid
    cell = np.clip(grid.cell_of(r_arr), 0, grid.n_cells - 1)
    tails = _edge_tails(rho)
    b = grid.edges[cell + 1]
    tail = tails[cell + 1] + 0.5 * rho.values[cell] * (b - r_arr) * (b + r_arr)
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = -_in_cell_mass(rho, cell, r_arr) / r_arr - FOUR_PI * tail
        outside = -rho.mass / r_arr
    out = np.where(r_arr >= grid.truncation, outside, inside)
    out = np.where(r_arr == 0, -FOUR_PI * tails[0], out)
    return out if np.ndim(r) else float(out)


@dataclass(frozen=True, eq=False)
class RadialPotential:
    """U sampled once per cell with the enclosed-mass table; `at` evaluates anywhere.

    Samples sit at the grid nodes unless `radii` names one radius per cell.
    """
    grid: RadialGrid
    values: np.ndarray
    enclosed: np.ndarray
    mass: float
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    radii: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def points(self) -> np.ndarray:
        return self.grid.nodes if self.radii is None else self.radii

    def at(self, r: ArrayLike) -> ArrayLike:
        if self.evaluator is not None:
            return self.evaluator(r)
        r_arr = np.asarray(r, dtype=float)
        points = self.points
        with np.errstate(divide="ignore"):
            out = np.where(r_arr > points[-1], -self.mass / r_arr,
                           np.interp(r_arr, points, self.values))
        return out if np.ndim(r) else float(out)

    def is_nondecreasing(self, rtol: float = 1e-12) -> bool:
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        return bool(np.all(np.diff(self.values) >= -rtol * scale))

    def far_field_error(self, support_radius: float, points: int = 3) -> float:
        """max |U(r) + M/r| / (M/r) at `points` radii between the support and the truncation."""
        if self.mass == 0:
            return float(np.max(np.abs(self.values)))
        radii = np.linspace(max(support_radius, 1e-300), self.grid.truncation, points + 1)[1:]
        return float(np.max(np.abs(self.at(radii) * radii / self.mass + 1.0)))


def potential_from_density(rho: RadialDensity) -> RadialPotential:
    nodes = rho.grid.nodes
    values = potential_at(rho, nodes)
    potential = RadialPotential(
        grid=rho.grid,
        values=values,
        enclosed=enclosed_mass(rho, nodes),
        mass=rho.mass,
        evaluator=lambda r: potential_at(rho, r),
    )
    if not potential.is_nondecreasing():
        raise InternalConsistencyError("computed potential is not nondecreasing")
    return potential


def poisson_residual(rho: RadialDensity) -> float:
    """Flux balance of (r^2 U')' = 4 pi r^2 rho over each cell, relative to the total mass.

    U' at the cell edges is taken from one-sided second-order differences of
    the potential inside each cell, so the check is independent of m(r).
    """
    if rho.mass == 0:
        return float(np.max(np.abs(potential_at(rho, rho.grid.nodes))))
    a, b = rho.grid.edges[:-1], rho.grid.edges[1:]
    step = 1e-3 * (b - a)
    u = lambda r: potential_at(rho, r)
    slope_b = (3 * u(b) - 4 * u(b - step) + u(b - 2 * step)) / (2 * step)
    slope_a = -(3 * u(a) - 4 * u(a + step) + u(a + 2 * step)) / (2 * step)
    flux = b * b * slope_b - a * a * slope_a
    return float(np.max(np.abs(flux - rho.cell_masses)) / rho.mass)


def cell_average_potential(rho: RadialDensity) -> np.ndarray:
    """Volume average of U over every cell (exact: U r^2 is a quartic in each cell)."""
    points, weights = rho.grid._quadrature_points(_GL3)
    integrals = FOUR_PI * np.sum(potential_at(rho, points) * points ** 2 * weights, axis=1)
    return integrals / rho.grid.volume_weights


# --- Energies ---
def interaction_energy(rho1: RadialDensity, rho2: RadialDensity) -> float:
    """int int rho1(x) rho2(y) / |x - y| dx dy = int_0^inf m1 m2 / r^2 dr (unsigned)."""
    _require_common_grid(rho1, rho2)
    grid = rho1.grid
    points, weights = grid._quadrature_points(_GL8)
    cells = np.broadcast_to(np.arange(grid.n_cells)[:, None], points.shape)
    m1 = _in_cell_mass(rho1, cells, points)
    m2 = _in_cell_mass(rho2, cells, points)
    inside = float(np.sum(m1 * m2 / points ** 2 * weights))
    return inside + rho1.mass * rho2.mass / grid.truncation


def potential_energy(rho: RadialDensity) -> float:
    """E_pot = -1/2 int_0^inf m(r)^2 / r^2 dr."""
    return -0.5 * interaction_energy(rho, rho)


def potential_energy_pairing(rho: RadialDensity) -> float:
    """E_pot = 1/2 int rho U dx, through the cell-averaged potential."""
    return 0.5 * float(np.sum(rho.cell_masses * cell_average_potential(rho)))


def potential_energy_gradient(rho: RadialDensity) -> float:
    """E_pot = -(1/8 pi) int |grad U|^2 dx with |grad U| = m(r) / r^2, in closed form.

    On a shell a <= r < b, m(r) = m_a + (4 pi / 3) rho (r^3 - a^3), so
    int_a^b m^2 / r^2 dr splits into three nonnegative pieces.
    """
    a, b = rho.grid.edges[:-1], rho.grid.edges[1:]
    h = b - a
    m_a = rho.edge_masses[:-1]
    slope = FOUR_PI / 3.0 * rho.values
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(a > 0, m_a * m_a * h / (a * b), 0.0)
    cross = m_a * slope * h * h * (b + 2.0 * a) / b
    shell = slope * slope * h ** 3 * (15.0 * a ** 3 + 15.0 * a * a * h + 6.0 * a * h * h + h ** 3) / (5.0 * b)
    field_squared = float(np.sum(inner + cross + shell)) + rho.mass ** 2 / rho.grid.truncation
    return -0.5 * field_squared


def internal_energy(phi: ConvexScalarFunction, rho: RadialDensity) -> float:
    """int Phi(rho) dx."""
    return float(np.sum(phi.value(rho.values) * rho.grid.volume_weights))


def reduced_energy(phi: ConvexScalarFunction, rho: RadialDensity,
                   exterior: Optional[RadialDensity] = None) -> float:
    """int Phi(rho) + E_pot(rho), minus the interaction with an exterior density."""
    total = internal_energy(phi, rho) + potential_energy(rho)
    if exterior is not None:
        total -= interaction_energy(rho, exterior)
    return total


@dataclass(frozen=True)
class EnergyReport:
    """Energy bookkeeping; the phase-space fields stay None until a state is lifted."""
    internal: float
    epot: float
    reduced_total: float
    casimir: Optional[float] = None
    kinetic: Optional[float] = None
    full_total: Optional[float] = None
    gap: Optional[float] = None

    @property
    def virial_ratio(self) -> float:
        """E_pot / int Phi; equals -3/n for a homogeneous minimizer of index n."""
        return self.epot / self.internal if self.internal else 0.0

    def to_dict(self) -> Dict[str, float]:
        return {key: value for key, value in self.__dict__.items() if value is not None}


def energy_report(phi: ConvexScalarFunction, rho: RadialDensity,
                  exterior: Optional[RadialDensity] = None) -> EnergyReport:
    internal = internal_energy(phi, rho)
    epot = potential_energy(rho)
    total = internal + epot
    if exterior is not None:
        total -= interaction_energy(rho, exterior)
    return EnergyReport(internal=internal, epot=epot, reduced_total=total)


# --- CSV ---
def save_density(rho: RadialDensity, path: Path) -> Path:
    return write_csv(path, {
        "r": rho.grid.nodes,
        "r_inner": rho.grid.edges[:-1],
        "r_outer": rho.grid.edges[1:],
        "rho": rho.values,
    })


def load_density(path: Path) -> RadialDensity:
    columns = read_csv(path)
    if "r_outer" not in columns or "rho" not in columns:
        raise InvalidParameterError(f"{path}: density tables need 'r_outer' and 'rho' columns")
    grid = RadialGrid(np.concatenate([[0.0], columns["r_outer"]]))
    return RadialDensity(grid, columns["rho"])

