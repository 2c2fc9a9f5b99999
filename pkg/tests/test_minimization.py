"""Tests for the minimization module."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from numpy.testing import assert_allclose

import minimization
from config import Config
from convex_reduction import GFunction, GrowthEnvelope, make_polytrope_phi
from errors import InvalidParameterError, MultiplierError, NonConvergenceError
from minimization import (
    MinimizerOptions,
    coercivity_bound,
    minimize_reduced,
    multiplier_for_mass,
    polytrope_energy_exponent,
    rearrange_decreasing,
    short_range_energy,
    split_potential_estimate,
    splitting_bound_sym,
    subadditivity_check,
    support_grid,
)
from radial_field import (
    RadialDensity,
    RadialGrid,
    internal_energy,
    l1_distance,
    potential_energy,
    potential_energy_pairing,
    uniform_ball,
)
from steady_state import euler_lagrange_residual, solve_steady

CELLS = 300


@pytest.fixture(scope="module")
def route_pairs():
    """Shooting state and direct minimizer on the same grid, at the state's discrete mass."""
    pairs = {}
    for n in (1.0, 2.0):
        phi = make_polytrope_phi(n)
        state = solve_steady(GFunction.from_phi(phi), 1.0, phi=phi, n_cells=CELLS)
        result = minimize_reduced(phi, state.density.mass, state.density.grid)
        pairs[n] = (phi, state, result)
    return pairs


@pytest.fixture(scope="module", params=[0.5, 1.0, 1.5, 2.0, 2.5])
def fine_route_pair(request):
    """Both routes for one index on the default grid."""
    phi = make_polytrope_phi(request.param)
    state = solve_steady(GFunction.from_phi(phi), 1.0, phi=phi)
    assert state.density.grid.n_cells == Config.GRID_NODES
    return state, minimize_reduced(phi, state.density.mass, state.density.grid)


@st.composite
def densities(draw):
    widths = draw(st.lists(st.floats(0.05, 0.3), min_size=2, max_size=25))
    values = draw(st.lists(st.floats(0.0, 5.0), min_size=len(widths), max_size=len(widths)))
    assume(sum(values) > 1e-3)
    grid = RadialGrid(np.concatenate([[0.0], np.cumsum(widths)]))
    return RadialDensity(grid, np.array(values))


# --- Fixed Point ---
def test_multiplier_for_constant_potential():
    """g = lam / 2 on a flat well U = -1 gives E0 = 2M/V - 1."""
    g = GFunction.power(0.5, 1.0)
    grid = RadialGrid.graded(50, truncation=1.0)
    volumes = grid.volume_weights
    e0, target = multiplier_for_mass(g, -np.ones(50), volumes, 2.0)
    assert_allclose(e0, 2.0 * 2.0 / grid.volume() - 1.0, rtol=1e-12)
    assert_allclose(np.sum(target * volumes), 2.0, rtol=1e-14)


def test_minimizer_agrees_with_shooting(fine_route_pair):
    state, result = fine_route_pair
    assert result.converged
    assert_allclose(state.density.mass, 1.0, rtol=1e-12)
    assert_allclose(result.energy, state.energy.reduced_total, rtol=1e-6)
    assert result.energy <= state.energy.reduced_total + 1e-9 * abs(result.energy)
    assert l1_distance(result.density, state.density) / state.density.mass < 1e-4
    assert_allclose(result.multiplier, state.multiplier, rtol=1e-3)


def test_multiplier_without_volume_is_rejected():
    g = GFunction.power(0.5, 1.0)
    with pytest.raises(MultiplierError):
        multiplier_for_mass(g, -np.ones(5), np.zeros(5), 1.0)


def test_energy_trajectory_is_nonincreasing(route_pairs):
    _, _, result = route_pairs[1.0]
    energies = np.array(result.energies)
    assert np.all(np.diff(energies) <= 1e-12 * abs(energies[0]))
    assert len(result.residuals) == result.iterations
    assert result.residuals[-1] < MinimizerOptions().tol


def test_minimizer_state_satisfies_euler_lagrange(route_pairs):
    phi, _, result = route_pairs[2.0]
    state = result.to_state(phi)
    assert euler_lagrange_residual(state, GFunction.from_phi(phi)) < 1e-8
    summary = result.summary()
    assert summary["converged"] is True
    assert summary["reduced_total"] == result.energy


def test_support_and_concentration(route_pairs):
    """Minimizers live in B_R0 with R0 = -(3/5) M^2 / H."""
    for _, _, result in route_pairs.values():
        mass = result.density.mass
        bound = -0.6 * mass ** 2 / result.energy
        assert result.density.support_radius <= bound
        assert result.concentration[-1] <= 1e-8 * mass


def test_minimizer_options_are_checked():
    with pytest.raises(InvalidParameterError):
        MinimizerOptions(tol=0.0)
    with pytest.raises(InvalidParameterError):
        MinimizerOptions(damping_start=0.5, damping_floor=0.6)
    with pytest.raises(InvalidParameterError):
        minimize_reduced(make_polytrope_phi(1.0), -1.0, RadialGrid.graded(20, truncation=1.0))


def test_support_grid_covers_the_ball_bound():
    phi = make_polytrope_phi(1.5)
    grid = support_grid(phi, 1.0, 200)
    assert grid.n_cells == 200
    inner = grid.truncation / 2.0
    assert np.any(np.isclose(grid.edges, inner, rtol=1e-12))
    assert support_grid(phi, 1.0, 200, truncation=10.0).truncation == 10.0


def test_exterior_density_lowers_the_energy():
    phi = make_polytrope_phi(1.0)
    grid = support_grid(phi, 1.0, 200)
    exterior = uniform_ball(grid, 0.5, grid.truncation)
    free = minimize_reduced(phi, 1.0, grid)
    bound = minimize_reduced(phi, 1.0, grid, exterior=exterior)
    assert free.converged and bound.converged
    assert bound.energy < free.energy
    state = bound.to_state(phi, exterior)
    assert euler_lagrange_residual(state, GFunction.from_phi(phi)) < 1e-8


def test_exterior_on_its_own_grid():
    phi = make_polytrope_phi(1.0)
    grid = support_grid(phi, 1.0, 200)
    exterior = uniform_ball(RadialGrid.graded(50, truncation=3.0), 0.5, 2.0)
    result = minimize_reduced(phi, 1.0, grid, exterior=exterior)
    assert result.converged
    state = result.to_state(phi, exterior)
    assert state.density.grid is grid
    assert_allclose(state.energy.reduced_total, result.energy, rtol=1e-12)
    assert euler_lagrange_residual(state, GFunction.from_phi(phi)) < 1e-8


def test_initial_density_is_rescaled_to_the_mass():
    phi = make_polytrope_phi(1.0)
    grid = support_grid(phi, 1.0, 150)
    start = uniform_ball(grid, 3.0, 0.5 * grid.truncation)
    result = minimize_reduced(phi, 1.0, grid, initial=start)
    assert_allclose(result.density.mass, 1.0, rtol=1e-12)
    with pytest.raises(InvalidParameterError):
        minimize_reduced(phi, 1.0, grid, initial=RadialDensity.zeros(grid))


def test_rising_energy_raises_with_the_trajectory(monkeypatch):
    """An energy that goes up for every damping stalls at the floor."""
    ticks = itertools.count()
    monkeypatch.setattr(minimization, "reduced_energy", lambda phi, rho, exterior=None: float(next(ticks)))
    phi = make_polytrope_phi(1.0)
    with pytest.raises(NonConvergenceError) as exc_info:
        minimize_reduced(phi, 1.0, support_grid(phi, 1.0, 60))
    assert exc_info.value.energies == [0.0]
    assert len(exc_info.value.residuals) == 1


# --- Rearrangement ---
@settings(deadline=None, max_examples=50)
@given(densities())
def test_rearrangement_properties(rho):
    """Mass and int Phi are kept, the profile is nonincreasing and E_pot does not go up."""
    phi = make_polytrope_phi(1.5)
    star = rearrange_decreasing(rho)
    assert star.is_nonincreasing()
    assert_allclose(star.mass, rho.mass, rtol=1e-12)
    assert_allclose(internal_energy(phi, star), internal_energy(phi, rho), rtol=1e-12)
    before = potential_energy_pairing(rho)
    assert potential_energy_pairing(star) <= before + 1e-10 * abs(before)


def test_rearranging_a_decreasing_profile_is_a_no_op():
    rho = uniform_ball(RadialGrid.graded(40, truncation=2.0), 1.0, 1.0)
    assert rearrange_decreasing(rho) is rho


# --- Bounds ---
@pytest.mark.parametrize("n", [1.0, 2.5])
def test_coercivity_bound_holds(n):
    phi = make_polytrope_phi(n)
    envelope = GrowthEnvelope.from_power(phi)
    rng = np.random.default_rng(3)
    for _ in range(5):
        grid = RadialGrid.graded(120, truncation=float(rng.uniform(0.2, 3.0)))
        rho = RadialDensity(grid, rng.uniform(0.0, 10.0, 120))
        assert coercivity_bound(envelope, rho).satisfied
        assert coercivity_bound(envelope, rho, phi).satisfied


def test_splitting_bound_at_half_support(route_pairs):
    phi, state, _ = route_pairs[1.0]
    h = state.energy.reduced_total
    report = splitting_bound_sym(state.density, 0.5 * state.radius, h, phi)
    assert report.satisfied
    assert report.terms["cross"] <= report.terms["cross_bound"]
    assert_allclose(sum(report.zone_masses), state.density.mass, rtol=1e-12)
    with pytest.raises(InvalidParameterError):
        splitting_bound_sym(state.density, 0.0, h, phi)
    with pytest.raises(InvalidParameterError):
        splitting_bound_sym(state.density, 1.0, 1.0, phi)


def test_split_potential_estimate(route_pairs):
    _, state, _ = route_pairs[1.0]
    rho = state.density
    report = split_potential_estimate(rho, 2.0)
    terms = report.terms
    assert report.satisfied
    assert_allclose(terms["I1"] + terms["I2"] + terms["I3"], terms["total"], rtol=1e-14)
    assert terms["I3"] <= terms["I3_bound"]
    with pytest.raises(InvalidParameterError):
        split_potential_estimate(rho, 1.0)
    with pytest.raises(InvalidParameterError):
        split_potential_estimate(rho, 2.0, index=5.0)


def test_short_range_energy_limits(route_pairs):
    """Reach beyond the diameter recovers -2 E_pot; zero reach gives nothing."""
    _, state, _ = route_pairs[2.0]
    rho = state.density
    assert_allclose(short_range_energy(rho, 2.5 * rho.grid.truncation), -2.0 * potential_energy(rho), rtol=1e-6)
    assert short_range_energy(rho, 0.0) == 0.0
    assert short_range_energy(RadialDensity.zeros(rho.grid), 1.0) == 0.0


def test_subadditivity_follows_polytrope_law():
    n = 1.5
    report = subadditivity_check(make_polytrope_phi(n), (0.25, 0.5, 1.0))
    assert report.satisfied
    ratios = np.array(report.energies) / report.reference_energy
    assert_allclose(ratios, report.exact_ratios, rtol=1e-8)
    assert report.to_dict()["rows"][1]["fraction"] == 0.5
    with pytest.raises(InvalidParameterError):
        subadditivity_check(make_polytrope_phi(n), (0.0,))


def test_polytrope_energy_exponent():
    assert polytrope_energy_exponent(1.0) == 2.0
    assert math.isclose(polytrope_energy_exponent(1.5), 3.5 / 1.5)
    with pytest.raises(InvalidParameterError):
        polytrope_energy_exponent(3.0)
