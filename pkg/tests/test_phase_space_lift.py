"""Tests for the phase_space_lift module."""

import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from convex_reduction import emden_rhs, make_polytrope_q, phi_from_q
from errors import InternalConsistencyError, InvalidParameterError, ModelMismatchError
from minimization import minimize_reduced, support_grid
from phase_space_lift import (
    casimir_energy,
    energy_report,
    kinetic_energy,
    lift,
    reduction_gap,
    save_table,
    spatial_density,
)
from radial_field import internal_energy
from steady_state import solve_steady
from utils import read_csv

CELLS = 300


@pytest.fixture(scope="module", params=[0.5, 1.0])
def lifted_model(request):
    q = make_polytrope_q(request.param)
    phi = phi_from_q(q)
    state = solve_steady(emden_rhs(q), 1.0, phi=phi, n_cells=CELLS)
    return q, phi, state


@pytest.fixture(scope="module")
def quadratic_model():
    """Q = f^2: f0 = (E0 - E)_+ / 2."""
    q = make_polytrope_q(1.0)
    phi = phi_from_q(q)
    state = solve_steady(emden_rhs(q), 1.0, phi=phi, n_cells=CELLS)
    return q, phi, state


# --- Lift ---
def test_lift_reproduces_the_density(lifted_model):
    q, _, state = lifted_model
    f = lift(q, state)
    rho = state.density.values
    interior = rho > 1e-2 * rho.max()
    assert_allclose(spatial_density(f)[interior], rho[interior], rtol=1e-8)
    assert np.all(spatial_density(f)[rho == 0] == 0.0)


def test_reduction_identity(lifted_model):
    """H_C(f0) = H_C^r(rho0) up to quadrature error."""
    q, phi, state = lifted_model
    report = energy_report(q, phi, state)
    assert abs(report.gap) / abs(report.reduced_total) < 1e-5
    assert_allclose(report.casimir + report.kinetic, internal_energy(phi, state.density), rtol=1e-5)
    assert_allclose(report.full_total, report.casimir + report.kinetic + report.epot, rtol=1e-14)


@pytest.mark.parametrize("beta", [0.8, 1.25, 2.0])
def test_broadened_competitors_cost_more(lifted_model, beta):
    q, phi, state = lifted_model
    assert reduction_gap(q, phi, state, beta) > 0.0


def test_wrong_casimir_is_rejected(quadratic_model):
    _, _, state = quadratic_model
    with pytest.raises(ModelMismatchError):
        lift(make_polytrope_q(0.5), state)


def test_inconsistent_density_is_rejected(quadratic_model):
    q, _, state = quadratic_model
    with pytest.raises(InternalConsistencyError):
        lift(q, replace(state, density=state.density.scaled(1.1)))


def test_lifted_minimizer_closes_the_gap():
    q = make_polytrope_q(1.0)
    phi = phi_from_q(q)
    result = minimize_reduced(phi, 1.0, support_grid(phi, 1.0, CELLS))
    assert result.converged
    state = result.to_state(phi)
    report = energy_report(q, phi, state)
    assert abs(report.gap) / abs(report.reduced_total) < 1e-5


# --- Kinetic And Casimir Terms ---
def test_kinetic_energy_closed_form(quadratic_model):
    """Per node 1/2 int |v|^2 (lam - |v|^2/2)/2 dv = (2/35) pi (2 lam)^(5/2) lam."""
    q, _, state = quadratic_model
    f = lift(q, state)
    lam = f.depths
    expected = float(np.sum(2.0 / 35.0 * math.pi * (2.0 * lam) ** 2.5 * lam * state.density.grid.volume_weights))
    assert_allclose(kinetic_energy(f), expected, rtol=1e-9)
    assert_allclose(kinetic_energy(f.broadened(2.0)), 4.0 * expected, rtol=1e-9)


def test_casimir_energy_of_broadened_state(quadratic_model):
    """With Q = f^2, beta^3 int Q(beta^-3 f0) = beta^-3 int Q(f0)."""
    q, _, state = quadratic_model
    f = lift(q, state)
    assert_allclose(casimir_energy(q, f.broadened(2.0)), casimir_energy(q, f) / 8.0, rtol=1e-9)
    with pytest.raises(InvalidParameterError):
        f.broadened(0.0)


# --- Tables ---
def test_distribution_table(quadratic_model, tmp_path):
    q, _, state = quadratic_model
    f = lift(q, state)
    occupied = int(np.count_nonzero(f.depths > 0))
    table = f.table(8)
    assert table["r"].size == 8 * occupied
    f_values = table["f"].reshape(occupied, 8)
    assert_allclose(f_values[:, 0], f.depths[f.depths > 0] / 2.0, rtol=1e-12)
    assert_allclose(f_values[:, -1], 0.0, atol=1e-12)

    loaded = read_csv(save_table(f, tmp_path / "lift.csv", energies_per_node=4))
    assert sorted(loaded) == ["E", "f", "r"]
    assert loaded["E"].size == 4 * occupied
