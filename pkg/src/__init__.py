"""
Finite-temperature magnetic Thomas-Fermi package.

This package provides the magnetized free-gas equation of state, radial
Coulomb fields, the scaled MTF pressure functional with its self-consistent
solver, and the Z/B/T scaling maps behind the `mtf` command line.
"""

__version__ = "1.0.0"


from src.config import get_project_root, load_config
from src.eos import FreeGas, gas_density, gas_pressure, landau_pressure, landau_sum
from src.fermi import fermi_integral, fermi_integral_prime
from src.fields import Confinement, DensityField, PotentialField, RadialGrid, hartree_energy
from src.logger import setup_logging
from src.models import GasState, PhysicalParams, RunConfig, ScaledProblem, SolveReport
from src.mtf import build_scaled_problem, eval_pressure_functional, scf_solve, tf_residual
from src.scaling import limit_scan, scale_params, to_scaled_problem

__all__ = [
    "Confinement",
    "DensityField",
    "FreeGas",
    "GasState",
    "PhysicalParams",
    "PotentialField",
    "RadialGrid",
    "RunConfig",
    "ScaledProblem",
    "SolveReport",
    "build_scaled_problem",
    "eval_pressure_functional",
    "fermi_integral",
    "fermi_integral_prime",
    "gas_density",
    "gas_pressure",
    "get_project_root",
    "hartree_energy",
    "landau_pressure",
    "landau_sum",
    "limit_scan",
    "load_config",
    "scale_params",
    "scf_solve",
    "setup_logging",
    "tf_residual",
    "to_scaled_problem",
]
