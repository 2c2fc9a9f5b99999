"""
Pipeline command handlers for the energy-Casimir reduction toolkit.
Contains the reduce, solve, minimize, lift and rearrange subcommands.
"""

import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from config import ModelConfig, ModelSpec, apply_overrides, load_model_config
from convex_reduction import (
    INFINITE,
    ConvexScalarFunction,
    GFunction,
    conjugate,
    default_abscissae,
    emden_rhs,
    fit_power_law,
    load_table,
    make_polytrope_phi,
    make_polytrope_q,
    phi_from_q,
    save_table,
    velocity_reduce,
)
from errors import EXIT_NUMERICAL, EXIT_OK, ConfigError
from minimization import MinimizerOptions, minimize_reduced, rearrange_decreasing, support_grid
from phase_space_lift import energy_report as lifted_energy_report
from phase_space_lift import lift
from phase_space_lift import save_table as save_lift_table
from radial_field import (
    RadialDensity,
    internal_energy,
    load_density,
    potential_energy,
    save_density,
)
from steady_state import SteadyState, euler_lagrange_residual, solve_steady
from utils import app_logger, cli_command, write_csv, write_json

COMPETITOR_SCALES = (1.1, 1.25, 1.5, 2.0, 3.0)


# --- Model Loading ---
@dataclass(frozen=True, eq=False)
class Model:
    """A validated ModelConfig together with the functions it defines."""
    config: ModelConfig
    phi: ConvexScalarFunction
    g: GFunction
    q: Optional[ConvexScalarFunction] = None

    def describe(self) -> dict:
        source = self.config.q if self.config.q is not None else self.config.phi
        return {
            "level": "q" if self.q is not None else "phi",
            "spec": source.describe(),
            "mass": self.config.mass,
            "grid_nodes": self.config.grid_nodes,
        }


def _function_from_spec(spec: ModelSpec, casimir: bool) -> ConvexScalarFunction:
    if spec.kind == "table":
        return load_table(Path(spec.path), negative_extension=INFINITE, label="Q" if casimir else "Phi")
    return make_polytrope_q(spec.parameter) if casimir else make_polytrope_phi(spec.parameter)


def build_model(config: ModelConfig) -> Model:
    """Turn a ModelConfig into Q (optional), Phi and g."""
    config = config.validate()
    if config.q is not None:
        q = _function_from_spec(config.q, casimir=True)
        return Model(config=config, phi=phi_from_q(q, config.tol_quad), g=emden_rhs(q, config.tol_quad), q=q)
    phi = _function_from_spec(config.phi, casimir=False)
    return Model(config=config, phi=phi, g=GFunction.from_phi(phi))


def model_config_from_args(args: argparse.Namespace) -> ModelConfig:
    config = load_model_config(args.config) if getattr(args, "config", None) else ModelConfig()
    return apply_overrides(
        config,
        mass=getattr(args, "mass", None),
        k=getattr(args, "k", None),
        n=getattr(args, "n", None),
        grid_nodes=getattr(args, "grid_nodes", None),
        tol=getattr(args, "tol", None),
    )


def load_model(args: argparse.Namespace) -> Model:
    model = build_model(model_config_from_args(args))
    app_logger.info(f"Model: {model.describe()['spec']} with M={model.config.mass:g}")
    return model


def _has_model(args: argparse.Namespace) -> bool:
    return any(getattr(args, name, None) is not None for name in ("config", "k", "n"))


def output_dir(args: argparse.Namespace) -> Path:
    out = Path(getattr(args, "out", None) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- Shared Writers ---
def write_profile(state: SteadyState, path: Path) -> Path:
    """Profile CSV with columns r, rho, U, w (w = E0 - U)."""
    return write_csv(path, {
        "r": state.potential.points,
        "rho": state.density.values,
        "U": state.potential.values,
        "w": state.multiplier - state.potential.values,
    })


def _steady_state(model: Model) -> SteadyState:
    config = model.config
    return solve_steady(
        model.g,
        config.mass,
        phi=model.phi,
        rtol=config.tol_ode,
        n_cells=config.grid_nodes,
        truncation=config.truncation or 0.0,
    )


def _minimize(model: Model):
    config = model.config
    grid = support_grid(model.phi, config.mass, config.grid_nodes, config.truncation)
    exterior = load_density(Path(config.exterior)) if config.exterior else None
    result = minimize_reduced(
        model.phi,
        config.mass,
        grid,
        MinimizerOptions(tol=config.tol_fixed_point),
        exterior=exterior,
    )
    return result, result.to_state(model.phi, exterior)


# --- Reduce Command ---
@cli_command
def reduce_command(args: argparse.Namespace) -> int:
    """Handle `reduce` - tabulate Q*, Phi*, Phi and g for a Casimir Q."""
    model = load_model(args)
    if model.q is None:
        raise ConfigError("reduce needs a Casimir 'q' (config key q = ... or --k)")
    out = output_dir(args)
    tol = model.config.tol_quad

    q_star = conjugate(model.q)
    phi_star = velocity_reduce(q_star, tol)
    save_table(q_star, out / "q_star.csv")
    save_table(phi_star, out / "phi_star.csv")
    save_table(model.phi, out / "phi.csv")
    lam = default_abscissae() if model.g.is_homogeneous else model.g.lambdas
    write_csv(out / "g.csv", {"lambda": lam, "g": model.g(lam)})

    summary = {"model": model.describe(), "admissible": model.q.admissible}
    hi = min(1e2, model.phi.cutoff)
    if hi > 1e-4:
        fit = fit_power_law(model.phi.value, 1e-4, hi)
        summary["phi_fit"] = {
            "exponent": fit.exponent,
            "coefficient": fit.coefficient,
            "n": fit.index,
            "residual": fit.residual,
        }
    if model.q.is_power:
        summary["k"] = model.q.polytropic_index
        summary["n"] = model.phi.polytropic_index
        summary["phi_coefficient"] = model.phi.coefficient
        summary["g_coefficient"] = model.g.coefficient
    write_json(out / "reduce.json", summary)

    app_logger.info(f"✅ reduce: tables written to {out}")
    return EXIT_OK


# --- Solve Command ---
@cli_command
def solve_command(args: argparse.Namespace) -> int:
    """Handle `solve` - steady state of the prescribed mass by shooting."""
    model = load_model(args)
    out = output_dir(args)
    state = _steady_state(model)
    residual = euler_lagrange_residual(state, model.g)

    write_profile(state, out / "profile.csv")
    write_json(out / "solve.json", {
        "model": model.describe(),
        **state.summary(),
        "residual": residual,
        "virial_ratio": state.energy.virial_ratio,
    })
    app_logger.info(f"✅ solve: M={state.mass:.10g} R={state.radius:.10g} E0={state.multiplier:.10g}")
    return EXIT_OK


# --- Minimize Command ---
@cli_command
def minimize_command(args: argparse.Namespace) -> int:
    """Handle `minimize` - direct minimization of the reduced functional."""
    model = load_model(args)
    out = output_dir(args)
    result, state = _minimize(model)

    save_density(result.density, out / "density.csv")
    write_profile(state, out / "profile.csv")
    energy = result.energy
    write_json(out / "minimize.json", {
        "model": model.describe(),
        **result.summary(),
        "energies_final": state.energy.to_dict(),
        "support_radius": result.density.support_radius,
        "support_bound": -0.6 * result.density.mass ** 2 / energy if energy < 0 else None,
    })
    if not result.converged:
        app_logger.warning(f"⚠️ minimize: not converged after {result.iterations} iterations")
        return EXIT_NUMERICAL
    app_logger.info(f"✅ minimize: H={energy:.12g} after {result.iterations} iterations")
    return EXIT_OK


# --- Lift Command ---
@cli_command
def lift_command(args: argparse.Namespace) -> int:
    """Handle `lift` - phase-space distribution of a reduced steady state."""
    model = load_model(args)
    if model.q is None:
        raise ConfigError("lift needs a Casimir 'q' (config key q = ... or --k)")
    out = output_dir(args)

    source = getattr(args, "source", None) or "solve"
    if source == "minimize":
        result, state = _minimize(model)
        if not result.converged:
            app_logger.warning("⚠️ lift: lifting a minimizer that did not converge")
    else:
        state = _steady_state(model)

    f = lift(model.q, state)
    save_lift_table(f, out / "lift_table.csv")
    report = lifted_energy_report(model.q, model.phi, state)
    competitors = [
        {"beta": beta, "gap": lifted_energy_report(model.q, model.phi, state, beta).gap}
        for beta in COMPETITOR_SCALES
    ]
    write_json(out / "lift.json", {
        "model": model.describe(),
        "source": source,
        "E0": state.multiplier,
        "energies": report.to_dict(),
        "relative_gap": abs(report.gap) / abs(report.reduced_total),
        "competitors": competitors,
    })
    app_logger.info(f"✅ lift: H_C - H_C^r = {report.gap:.3e}")
    return EXIT_OK


# --- Rearrange Command ---
@cli_command
def rearrange_command(args: argparse.Namespace) -> int:
    """Handle `rearrange` - symmetric decreasing rearrangement of a density file."""
    if not getattr(args, "density", None):
        raise ConfigError("rearrange needs --density PATH")
    out = output_dir(args)
    rho: RadialDensity = load_density(Path(args.density))
    star = rearrange_decreasing(rho)

    save_density(star, out / "rearranged.csv")
    summary = {
        "mass": {"before": rho.mass, "after": star.mass},
        "epot": {"before": potential_energy(rho), "after": potential_energy(star)},
        "already_nonincreasing": rho.is_nonincreasing(),
    }
    if _has_model(args):
        phi = load_model(args).phi
        summary["internal"] = {"before": internal_energy(phi, rho), "after": internal_energy(phi, star)}
    write_json(out / "rearrange.json", summary)
    app_logger.info(f"✅ rearrange: E_pot {summary['epot']['before']:.10g} -> {summary['epot']['after']:.10g}")
    return EXIT_OK
