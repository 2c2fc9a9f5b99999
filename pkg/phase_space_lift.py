"""
Phase-space lift module.

Lifts a reduced steady state back to the isotropic distribution
f0 = (Q')^{-1}((E0 - E)_+), E = |v|^2/2 + U0(x), and evaluates the kinetic and
Casimir functionals through the particle-energy representation.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import quad_vec

from config import Config
from convex_reduction import VELOCITY_MEASURE, ConvexScalarFunction, GFunction, emden_rhs
from errors import InternalConsistencyError, InvalidParameterError, ModelMismatchError
from radial_field import EnergyReport, RadialDensity, RadialPotential, internal_energy
from steady_state import SteadyState
from utils import app_logger, write_csv

__all__ = [
    "EnergyReport",
    "PhaseSpaceState",
    "casimir_energy",
    "energy_report",
    "kinetic_energy",
    "lift",
    "reduction_gap",
    "spatial_density",
]

# lift consistency worse than this means the state was not built from this model
GROSS_MISMATCH = 1e-3
# nodes below this fraction of the peak density count as the support edge
INTERIOR_FRACTION = 1e-2


@dataclass(frozen=True, eq=False)
class PhaseSpaceState:
    """f(x, v) = beta^-3 (Q')^{-1}((E0 - U0(x) - |v|^2 / (2 beta^2))_+).

    beta = 1 is the lifted minimizer; other beta broaden (beta > 1) or narrow
    the velocity profile at fixed spatial density.
    """
    q: ConvexScalarFunction
    multiplier: float
    potential: RadialPotential
    density: RadialDensity
    velocity_scale: float = 1.0

    @property
    def depths(self) -> np.ndarray:
        """lambda = (E0 - U0)_+ at the potential's sample points."""
        return np.maximum(self.multiplier - self.potential.values, 0.0)

    def distribution(self, r: np.ndarray, energy: np.ndarray) -> np.ndarray:
        """f0 at radius r and particle energy E (beta = 1 representation)."""
        del r  # isotropic: f0 depends on x only through E
        return self.q.inverse_derivative(self.multiplier - np.asarray(energy, dtype=float))

    def broadened(self, beta: float) -> "PhaseSpaceState":
        if not beta > 0:
            raise InvalidParameterError(f"velocity scale must be positive, got {beta}")
        return PhaseSpaceState(self.q, self.multiplier, self.potential, self.density,
                               self.velocity_scale * beta)

    def table(self, energies_per_node: int = 32) -> dict:
        """(r, E, f) rows over the occupied nodes, E from U0(r) to E0."""
        occupied = np.flatnonzero(self.depths > 0)
        s = np.linspace(0.0, 1.0, energies_per_node)
        radii = np.repeat(self.potential.points[occupied], s.size)
        energies = (self.potential.values[occupied, None] + self.depths[occupied, None] * s).ravel()
        return {"r": radii, "E": energies, "f": self.distribution(radii, energies)}


def _depth_moments(integrand: Callable[[np.ndarray, np.ndarray], np.ndarray], lam: np.ndarray,
                   scale: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """4 pi sqrt(2) int_0^lam K(lam, E) sqrt(E) dE per node, via E = lam s^2.

    `integrand(live_lam, s)` returns the integrand over the occupied nodes
    divided by their `scale`.
    """
    out = np.zeros_like(lam)
    live = lam > 0
    if not np.any(live):
        return out
    lam_live = lam[live]
    scale_live = np.where(scale[live] > 0, scale[live], 1.0)
    integral, _ = quad_vec(lambda s: integrand(lam_live, s) / scale_live * s * s, 0.0, 1.0,
                           epsabs=0.0, epsrel=tol or Config.QUAD_TOL, norm="max")
    out[live] = VELOCITY_MEASURE * 2.0 * lam_live ** 1.5 * integral * scale_live
    return out


def spatial_density(f: PhaseSpaceState) -> np.ndarray:
    """int f dv at the grid nodes (independent of the velocity scale)."""
    q = f.q
    lam = f.depths
    return _depth_moments(lambda lam, s: q.inverse_derivative(lam * (1.0 - s * s)),
                          lam, q.inverse_derivative(lam))


def _model_mismatch(q: ConvexScalarFunction, rhs: GFunction, depth: float) -> float:
    expected = emden_rhs(q)
    if expected.is_homogeneous and rhs.is_homogeneous:
        return max(abs(expected.exponent - rhs.exponent),
                   abs(expected.coefficient / rhs.coefficient - 1.0))
    lam = np.linspace(0.0, depth, 65)[1:]
    return float(np.max(np.abs(expected(lam) / rhs(lam) - 1.0)))


def lift(q: ConvexScalarFunction, state: SteadyState, check_tol: float = 1e-6) -> PhaseSpaceState:
    """Build f0 = (Q')^{-1}((E0 - E)_+) for a state whose g came from this Q."""
    depth = max(float(state.multiplier - np.min(state.potential.values)), 0.0)
    if depth > 0:
        mismatch = _model_mismatch(q, state.rhs, depth)
        if mismatch > check_tol:
            raise ModelMismatchError(
                f"{q.label} reduces to a different g than the state's {state.rhs.label} "
                f"(relative difference {mismatch:.3e})"
            )
    f = PhaseSpaceState(q=q, multiplier=state.multiplier, potential=state.potential, density=state.density)

    rho = state.density.values
    interior = rho >= INTERIOR_FRACTION * np.max(rho) if rho.size else rho > 0
    if np.any(rho > 0):
        error = float(np.max(np.abs(spatial_density(f)[interior] / rho[interior] - 1.0)))
        if error > GROSS_MISMATCH:
            raise InternalConsistencyError(f"lifted density misses rho0 by {error:.3e} (relative)")
        log = app_logger.warning if error > check_tol else app_logger.debug
        log(f"lift: int f0 dv vs rho0 relative difference {error:.3e}")
    return f


def kinetic_energy(f: PhaseSpaceState) -> float:
    """1/2 int int |v|^2 f dv dx; the velocity scale enters as beta^2."""
    q = f.q
    lam = f.depths
    per_node = _depth_moments(
        lambda lam, s: lam * s * s * q.inverse_derivative(lam * (1.0 - s * s)),
        lam, lam * q.inverse_derivative(lam),
    )
    return f.velocity_scale ** 2 * float(np.sum(per_node * f.potential.grid.volume_weights))


def casimir_energy(q: ConvexScalarFunction, f: PhaseSpaceState) -> float:
    """int int Q(f) dv dx; with scale beta this is beta^3 int Q(beta^-3 f0)."""
    cube = f.velocity_scale ** 3
    lam = f.depths
    per_node = _depth_moments(
        lambda lam, s: q.value(f.q.inverse_derivative(lam * (1.0 - s * s)) / cube),
        lam, np.maximum(q.value(f.q.inverse_derivative(lam) / cube), 1e-300),
    )
    return cube * float(np.sum(per_node * f.potential.grid.volume_weights))


def energy_report(q: ConvexScalarFunction, phi: ConvexScalarFunction, state: SteadyState,
                  velocity_scale: float = 1.0) -> EnergyReport:
    f = lift(q, state)
    if velocity_scale != 1.0:
        f = f.broadened(velocity_scale)
    internal = internal_energy(phi, state.density)
    epot = state.energy.epot
    casimir = casimir_energy(q, f)
    kinetic = kinetic_energy(f)
    full = casimir + kinetic + epot
    reduced = internal + epot
    return EnergyReport(
        internal=internal,
        epot=epot,
        reduced_total=reduced,
        casimir=casimir,
        kinetic=kinetic,
        full_total=full,
        gap=full - reduced,
    )


def reduction_gap(q: ConvexScalarFunction, phi: ConvexScalarFunction, state: SteadyState,
                  velocity_scale: float = 1.0) -> float:
    """H_C(f) - H_C^r(rho0); about 0 for the lift, positive for broadened competitors."""
    return energy_report(q, phi, state, velocity_scale).gap


def save_table(f: PhaseSpaceState, path: Path, energies_per_node: int = 32) -> Path:
    return write_csv(path, f.table(energies_per_node))
