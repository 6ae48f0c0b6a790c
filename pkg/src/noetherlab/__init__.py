"""Geometric-algebra tools for symmetries and conservation laws of covariant Hamiltonians."""

__version__ = "0.1.0"

from .ga import Algebra, Blade, Multivector, Rotor, rotor_apply, rotor_exp  # noqa: E402
from .calculus import DiffeoMap, FieldFn, VectorField  # noqa: E402
from .dynamics import (  # noqa: E402
    HamiltonianSystem,
    Potential,
    SpaceSplit,
    covariance_check,
    integrate_particle,
    nonrelativistic,
    scalar_field,
    string,
)
from .lattice import Grid, LatticeField, build_field_momentum, solve_field_el  # noqa: E402
from .noether import SymmetrySpec, gen_symmetry_residual, symmetry_residual_infinitesimal  # noqa: E402
from .report import ConservationReport  # noqa: E402
from .scenarios import ScenarioConfig, build_scenario, run_scenario  # noqa: E402

__all__ = [
    "Algebra",
    "Blade",
    "ConservationReport",
    "DiffeoMap",
    "FieldFn",
    "Grid",
    "HamiltonianSystem",
    "LatticeField",
    "Multivector",
    "Potential",
    "Rotor",
    "ScenarioConfig",
    "SpaceSplit",
    "SymmetrySpec",
    "VectorField",
    "__version__",
    "build_field_momentum",
    "build_scenario",
    "covariance_check",
    "gen_symmetry_residual",
    "integrate_particle",
    "nonrelativistic",
    "rotor_apply",
    "rotor_exp",
    "run_scenario",
    "scalar_field",
    "solve_field_el",
    "string",
    "symmetry_residual_infinitesimal",
]
