"""Tests for the radial_field module."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from numpy.testing import assert_allclose

from convex_reduction import make_polytrope_phi
from errors import IncompatibleGridError, InvalidParameterError
from radial_field import (
    RadialDensity,
    RadialGrid,
    cell_average_potential,
    enclosed_mass,
    energy_report,
    interaction_energy,
    internal_energy,
    l1_distance,
    load_density,
    poisson_residual,
    potential_at,
    potential_energy,
    potential_energy_gradient,
    potential_energy_pairing,
    potential_from_density,
    reduced_energy,
    remap,
    save_density,
    split_at,
    uniform_ball,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_density(rng, cells=120, truncation=3.0):
    grid = RadialGrid.graded(cells, truncation=truncation)
    values = rng.uniform(0.0, 2.0, cells) * (rng.uniform(size=cells) > 0.3)
    values[0] = 1.0
    return RadialDensity(grid, values)


@st.composite
def densities(draw):
    widths = draw(st.lists(st.floats(0.1, 0.3), min_size=3, max_size=30))
    values = draw(st.lists(st.floats(0.0, 5.0), min_size=len(widths), max_size=len(widths)))
    assume(sum(values) > 1e-3)
    grid = RadialGrid(np.concatenate([[0.0], np.cumsum(widths)]))
    return RadialDensity(grid, np.array(values))


# --- Grid ---
def test_grid_rejects_bad_edges():
    """Edges must start at 0 and increase."""
    with pytest.raises(InvalidParameterError):
        RadialGrid(np.array([0.1, 0.5, 1.0]))
    with pytest.raises(InvalidParameterError):
        RadialGrid(np.array([0.0, 0.5, 0.5, 1.0]))


def test_graded_grid_volumes():
    grid = RadialGrid.graded(500, truncation=4.0, edge_radius=2.0)
    assert grid.n_cells == 500
    assert grid.truncation == 4.0
    assert 2.0 in grid.edges
    assert_allclose(grid.volume(), 4.0 / 3.0 * math.pi * 4.0 ** 3, rtol=1e-12)
    assert grid.nodes[0] == 0.0
    assert np.all((grid.nodes[1:] > grid.edges[1:-1]) & (grid.nodes[1:] < grid.edges[2:]))


# --- Uniform Ball Oracles ---
def test_uniform_ball_potential_and_energy():
    """Closed forms: U = -M (3R^2 - r^2) / (2R^3) inside, E_pot = -3M^2 / (5R)."""
    grid = RadialGrid(np.linspace(0.0, 2.0, 401))
    mass, radius = 2.0, 1.0
    rho = uniform_ball(grid, mass, radius)
    assert_allclose(rho.mass, mass, rtol=1e-13)

    r = np.linspace(0.0, 0.99, 50)
    assert_allclose(potential_at(rho, r), -mass * (3 * radius ** 2 - r ** 2) / (2 * radius ** 3), rtol=1e-10)
    outside = np.linspace(1.01, 5.0, 20)
    assert_allclose(potential_at(rho, outside), -mass / outside, rtol=1e-12)
    assert_allclose(potential_energy(rho), -0.6 * mass ** 2 / radius, rtol=1e-10)
    assert_allclose(potential_energy_pairing(rho), -0.6 * mass ** 2 / radius, rtol=1e-10)
    assert_allclose(potential_energy_gradient(rho), -0.6 * mass ** 2 / radius, rtol=1e-12)


def test_enclosed_mass_matches_cumulative_cells(rng):
    rho = random_density(rng)
    assert_allclose(enclosed_mass(rho, rho.grid.edges), rho.edge_masses, rtol=1e-12, atol=1e-14)
    assert enclosed_mass(rho, 100.0) == rho.mass
    with pytest.raises(InvalidParameterError):
        enclosed_mass(rho, -1.0)


# --- Potential ---
def test_poisson_residual_is_small(rng):
    rho = random_density(rng)
    assert poisson_residual(rho) < 1e-6


def test_potential_far_field(rng):
    rho = random_density(rng)
    potential = potential_from_density(rho)
    assert potential.far_field_error(rho.support_radius) < 1e-12
    assert potential.is_nondecreasing()


@settings(deadline=None, max_examples=40)
@given(densities())
def test_potential_nondecreasing_and_negative(rho):
    values = potential_at(rho, rho.grid.nodes)
    assert np.all(values < 0)
    assert np.all(np.diff(values) >= -1e-12 * np.max(np.abs(values)))


@settings(deadline=None, max_examples=40)
@given(densities())
def test_energy_routes_agree(rho):
    """Field-norm, m^2/r^2 quadrature and 1/2 int rho U routes give one number."""
    gradient = potential_energy_gradient(rho)
    assert gradient < 0
    assert_allclose(potential_energy(rho), gradient, rtol=1e-10)
    assert_allclose(potential_energy_pairing(rho), gradient, rtol=1e-10)


def test_cell_average_potential_lies_between_edge_values(rng):
    rho = random_density(rng)
    averaged = cell_average_potential(rho)
    lower = potential_at(rho, rho.grid.edges[:-1])
    upper = potential_at(rho, rho.grid.edges[1:])
    assert np.all(averaged >= lower - 1e-12) and np.all(averaged <= upper + 1e-12)


# --- Energies ---
def test_interaction_is_bilinear_and_symmetric(rng):
    grid = RadialGrid.graded(150, truncation=2.0)
    a, b, c = (RadialDensity(grid, rng.uniform(0.0, 1.0, 150)) for _ in range(3))
    ab = a.with_values(a.values + 2.0 * b.values)
    assert_allclose(interaction_energy(ab, c), interaction_energy(a, c) + 2.0 * interaction_energy(b, c),
                    rtol=1e-12)
    assert_allclose(interaction_energy(a, b), interaction_energy(b, a), rtol=1e-14)


def test_exterior_term_with_itself():
    """With rho_e = rho the reduced energy is int Phi + 3 E_pot."""
    phi = make_polytrope_phi(1.5)
    grid = RadialGrid.graded(200, truncation=2.0)
    rho = RadialDensity.from_function(grid, lambda r: np.maximum(1.0 - r * r, 0.0))
    expected = internal_energy(phi, rho) + 3.0 * potential_energy(rho)
    assert_allclose(reduced_energy(phi, rho, exterior=rho), expected, rtol=1e-12)
    report = energy_report(phi, rho, exterior=rho)
    assert_allclose(report.reduced_total, expected, rtol=1e-12)


def test_densities_on_different_grids_are_rejected():
    a = RadialDensity.zeros(RadialGrid.graded(10, truncation=1.0))
    b = RadialDensity.zeros(RadialGrid.graded(12, truncation=1.0))
    with pytest.raises(IncompatibleGridError):
        l1_distance(a, b)
    with pytest.raises(IncompatibleGridError):
        interaction_energy(a, b)


# --- Grid Transfer ---
def test_remap_conserves_mass(rng):
    rho = random_density(rng)
    target = RadialGrid.graded(77, truncation=5.0)
    moved = remap(rho, target)
    assert_allclose(moved.mass, rho.mass, rtol=1e-12)
    assert remap(rho, rho.grid) is rho


def test_split_at_radius(rng):
    rho = random_density(rng)
    radius = 1.234567
    inner, outer = split_at(rho, radius)
    assert radius in inner.grid.edges
    assert_allclose(inner.mass, enclosed_mass(rho, radius), rtol=1e-12)
    assert_allclose(inner.mass + outer.mass, rho.mass, rtol=1e-13)
    assert inner.support_radius <= radius
    assert_allclose(potential_energy(inner.with_values(inner.values + outer.values)), potential_energy(rho),
                    rtol=1e-10)


# --- CSV ---
def test_density_csv_round_trip(tmp_path, rng):
    phi = make_polytrope_phi(2.0)
    rho = random_density(rng)
    loaded = load_density(save_density(rho, tmp_path / "rho.csv"))
    assert np.array_equal(loaded.values, rho.values)
    assert np.array_equal(loaded.grid.edges, rho.grid.edges)
    assert_allclose(reduced_energy(phi, loaded), reduced_energy(phi, rho), rtol=1e-10)
