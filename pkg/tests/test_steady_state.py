"""Tests for the steady_state module."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from convex_reduction import GFunction, emden_rhs, make_polytrope_phi, make_polytrope_q
from errors import BracketFailureError, DomainCutoffError, InvalidParameterError, UnboundedProfileError
from radial_field import RadialDensity, RadialGrid, potential_energy, reduced_energy, uniform_ball
from steady_state import (
    default_grid,
    euler_lagrange_residual,
    scale_density,
    scale_steady_state,
    shoot,
    solve_steady,
)

CELLS = 400
# Phi = rho^2: g = lam / 2, w = w_c sin(kr) / (kr) with k = sqrt(2 pi)
WAVENUMBER = math.sqrt(2.0 * math.pi)
CLOSED_FORM_RADIUS = math.sqrt(math.pi / 2.0)


@pytest.fixture
def linear_g():
    return GFunction.from_phi(make_polytrope_phi(1.0))


# --- Shooting ---
def test_shoot_matches_closed_form(linear_g):
    profile = shoot(linear_g, WAVENUMBER)
    assert_allclose(profile.radius, CLOSED_FORM_RADIUS, rtol=1e-8)
    assert_allclose(profile.mass, math.pi, rtol=1e-8)
    assert_allclose(profile.multiplier, -profile.mass / profile.radius, rtol=1e-14)

    r = np.linspace(0.05, 0.95, 10) * CLOSED_FORM_RADIUS
    expected = WAVENUMBER * np.sin(WAVENUMBER * r) / (WAVENUMBER * r)
    assert_allclose(profile.w(r), expected, atol=1e-7 * WAVENUMBER)


def test_profile_exterior_is_kepler(linear_g):
    profile = shoot(linear_g, 1.0)
    r = np.array([1.5, 3.0, 10.0]) * profile.radius
    assert_allclose(profile.potential(r), -profile.mass / r, rtol=1e-14)
    assert_allclose(profile.enclosed_mass(r), profile.mass)


def test_shoot_rejects_bad_central_values(linear_g):
    with pytest.raises(InvalidParameterError):
        shoot(linear_g, 0.0)
    table_g = GFunction.from_phi(make_polytrope_phi(1.0).sample())
    with pytest.raises(DomainCutoffError):
        shoot(table_g, 10.0 * table_g.max_argument)


def test_shoot_without_a_zero_is_unbounded():
    """n = 5 profiles decay like 1/r and never reach zero."""
    with pytest.raises(UnboundedProfileError):
        shoot(GFunction.power(1.0, 5.0), 1.0)


def test_mass_increases_with_central_value():
    g = emden_rhs(make_polytrope_q(1.0))
    profiles = [shoot(g, w_c) for w_c in np.geomspace(0.1, 10.0, 8)]
    masses = np.array([p.mass for p in profiles])
    assert np.all(np.isfinite([p.radius for p in profiles]))
    assert np.all(np.diff(masses) > 0)


# --- Mass Matching ---
def test_solve_steady_closed_form_mass(linear_g):
    state = solve_steady(linear_g, math.pi, n_cells=CELLS)
    assert_allclose(state.radius, CLOSED_FORM_RADIUS, rtol=1e-8)
    assert_allclose(state.multiplier, -WAVENUMBER, rtol=1e-8)
    assert_allclose(state.central_value, WAVENUMBER, rtol=1e-7)
    assert_allclose(state.density.mass, math.pi, rtol=1e-12)
    assert state.mass == pytest.approx(state.density.mass, rel=1e-12)
    assert state.density.support_radius <= state.radius * (1 + 1e-12)


@pytest.mark.parametrize("n", [0.5, 1.5, 2.5])
def test_cells_carry_the_prescribed_mass(n):
    g = GFunction.from_phi(make_polytrope_phi(n))
    state = solve_steady(g, 1.0, n_cells=CELLS)
    assert_allclose(state.density.mass, 1.0, rtol=1e-12)
    assert state.density.is_nonincreasing()
    points = state.potential.points
    edges = state.density.grid.edges
    assert np.all((points >= edges[:-1]) & (points <= edges[1:]))


def test_bisection_cells_carry_the_prescribed_mass():
    table_g = GFunction.from_phi(make_polytrope_phi(1.0).sample())
    state = solve_steady(table_g, 2.0, n_cells=CELLS)
    assert_allclose(state.density.mass, 2.0, rtol=1e-10)
    assert euler_lagrange_residual(state, table_g) < 1e-8


@pytest.mark.parametrize("n", [1.0, 1.5, 2.5])
def test_scaling_and_bisection_agree(n):
    g = GFunction.from_phi(make_polytrope_phi(n))
    scaled = solve_steady(g, 2.0, route="scaling", n_cells=CELLS)
    bisected = solve_steady(g, 2.0, route="bisection", n_cells=CELLS)
    assert_allclose(bisected.radius, scaled.radius, rtol=1e-7)
    assert_allclose(bisected.multiplier, scaled.multiplier, rtol=1e-7)
    assert_allclose(bisected.mass, 2.0, rtol=1e-10)


@pytest.mark.parametrize("n", [0.5, 1.5, 2.5])
def test_euler_lagrange_residual_is_small(n):
    g = GFunction.from_phi(make_polytrope_phi(n))
    state = solve_steady(g, 1.0, n_cells=CELLS)
    assert euler_lagrange_residual(state, g) < 1e-8


def test_tabulated_g_uses_bisection():
    table_g = GFunction.from_phi(make_polytrope_phi(1.0).sample())
    assert not table_g.is_homogeneous
    state = solve_steady(table_g, math.pi, n_cells=CELLS)
    assert state.profile.alpha == 1.0
    assert_allclose(state.radius, CLOSED_FORM_RADIUS, rtol=1e-7)
    with pytest.raises(InvalidParameterError):
        solve_steady(table_g, math.pi, route="scaling")


def test_supercritical_index_has_no_scaling_solution():
    with pytest.raises(BracketFailureError):
        solve_steady(GFunction.power(1.0, 3.0), 1.0)


def test_solve_steady_argument_checks(linear_g):
    with pytest.raises(InvalidParameterError):
        solve_steady(linear_g, -1.0)
    with pytest.raises(InvalidParameterError):
        solve_steady(linear_g, 1.0, route="newton")


def test_explicit_grid_is_used(linear_g):
    grid = RadialGrid.graded(CELLS, truncation=5.0)
    state = solve_steady(linear_g, 1.0, grid=grid)
    assert state.density.grid is grid
    assert default_grid(2.0, 50).truncation == 4.0
    assert default_grid(2.0, 50, truncation=7.0).truncation == 7.0


# --- Minimality ---
def _gaussian(mass, width):
    grid = RadialGrid.graded(CELLS, truncation=6.0 * width)
    bump = RadialDensity.from_function(grid, lambda r: np.exp(-(r / width) ** 2))
    return bump.scaled(mass / bump.mass)


@pytest.mark.parametrize("n", [1.0, 1.5, 2.5])
def test_steady_state_beats_same_mass_competitors(n):
    phi = make_polytrope_phi(n)
    state = solve_steady(GFunction.from_phi(phi), 1.0, phi=phi, n_cells=CELLS)
    h = state.energy.reduced_total
    competitors = []
    for factor in (0.5, 0.75, 1.0, 1.5):
        radius = factor * state.radius
        competitors.append(uniform_ball(RadialGrid.graded(CELLS, truncation=radius), 1.0, radius))
        competitors.append(_gaussian(1.0, 0.5 * radius))
    for b in (0.8, 1.25):
        competitors.append(scale_density(state.density, b ** 3, b))
    for rho in competitors:
        assert_allclose(rho.mass, 1.0, rtol=1e-10)
        assert h < reduced_energy(phi, rho)


# --- Scaling ---
def test_scale_steady_state_follows_scaling_laws():
    """rho -> alpha^n rho(beta r), E0 -> alpha E0, M -> M alpha / beta with beta^2 = alpha^(n-1)."""
    n, alpha = 1.5, 2.0
    g = GFunction.from_phi(make_polytrope_phi(n))
    state = solve_steady(g, 1.0, n_cells=CELLS)
    scaled = scale_steady_state(state, alpha)
    beta = alpha ** (0.5 * (n - 1.0))

    assert_allclose(scaled.multiplier, alpha * state.multiplier, rtol=1e-14)
    assert_allclose(scaled.mass, state.mass * alpha / beta, rtol=1e-14)
    assert_allclose(scaled.density.mass, state.density.mass * alpha / beta, rtol=1e-12)
    assert_allclose(scaled.density.values[0], alpha ** n * state.density.values[0], rtol=1e-14)
    assert euler_lagrange_residual(scaled, g) < 1e-8

    direct = solve_steady(g, scaled.mass, n_cells=CELLS)
    assert_allclose(scaled.radius, direct.radius, rtol=1e-8)
    assert_allclose(scaled.multiplier, direct.multiplier, rtol=1e-8)


def test_scale_density_potential_energy():
    """E_pot(a rho(b .)) = a^2 b^-5 E_pot(rho)."""
    g = GFunction.from_phi(make_polytrope_phi(2.0))
    rho = solve_steady(g, 1.0, n_cells=CELLS).density
    a, b = 3.0, 0.7
    assert_allclose(potential_energy(scale_density(rho, a, b)), a ** 2 * b ** -5 * potential_energy(rho),
                    rtol=1e-12)
    with pytest.raises(InvalidParameterError):
        scale_density(rho, -1.0, 1.0)


def test_scaling_a_tabulated_state_is_rejected():
    table_g = GFunction.from_phi(make_polytrope_phi(1.0).sample())
    state = solve_steady(table_g, 1.0, n_cells=CELLS)
    with pytest.raises(InvalidParameterError):
        scale_steady_state(state, 2.0)
