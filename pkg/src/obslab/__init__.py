"""Desk-scale observability laboratory for coupled 1D evolution systems."""
from .errors import NumericalFailure, ObslabError, ValidationError
from .evolution import EvolutionSpec, SpaceTimeField, modal_propagator, solve, timestep_scaled
from .grid import CoefficientField, Grid1D, ModeBasis, build_elliptic, eigendecompose
from .microlocal import (
    AngularDensity,
    aniso_norm,
    angular_density,
    counterexample_demo,
    frac_dt,
    localisation_test,
    mode_family,
)
from .observability import (
    assemble_gramian,
    kernel_scan,
    observability_constants,
    simultaneous_constants,
    superposition_constants,
    weak_constant_sweep,
)
from .scenario import Component, DataCoupling, Scenario, load_scenario, scenario_from_dict
from .symbols import PrincipalSymbol, gcc_time, parabolic_project, separation_margin

__version__ = "0.1.0"

__all__ = [
    "AngularDensity",
    "CoefficientField",
    "Component",
    "DataCoupling",
    "EvolutionSpec",
    "Grid1D",
    "ModeBasis",
    "NumericalFailure",
    "ObslabError",
    "PrincipalSymbol",
    "Scenario",
    "SpaceTimeField",
    "ValidationError",
    "aniso_norm",
    "angular_density",
    "assemble_gramian",
    "build_elliptic",
    "counterexample_demo",
    "eigendecompose",
    "frac_dt",
    "gcc_time",
    "kernel_scan",
    "load_scenario",
    "localisation_test",
    "modal_propagator",
    "mode_family",
    "observability_constants",
    "parabolic_project",
    "scenario_from_dict",
    "separation_margin",
    "simultaneous_constants",
    "solve",
    "superposition_constants",
    "timestep_scaled",
    "weak_constant_sweep",
]
