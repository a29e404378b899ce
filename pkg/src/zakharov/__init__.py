"""Pseudospectral solver and I-method diagnostics for the 2D Zakharov system."""

from .spectral import Field2D, GridSpec, read_snapshot, write_snapshot
from .imethod import IMethodParams, m, sigma, sigma_radial
from .state import PhysicalState, WaveState
from .energy import (
    EnergyLedger,
    fixed_time_difference,
    hamiltonian_pm,
    hamiltonian_unv,
    ledger_row,
    mass,
    modified_energy,
    read_ledger,
    refined_energy,
    refined_energy_time_derivative,
    write_ledger,
)
from .dynamics import BlowUpError, evolve, evolve_physical, reference_evolve, step, to_pm
from .groundstate import gn_check, ground_state, mass_threshold_check, solve_ground_state

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "EnergyLedger", "Field2D", "GridSpec", "IMethodParams", "PhysicalState", "WaveState",
    "evolve", "evolve_physical", "fixed_time_difference", "gn_check", "ground_state", "hamiltonian_pm",
    "hamiltonian_unv", "ledger_row", "m", "mass", "mass_threshold_check", "modified_energy",
    "read_ledger", "read_snapshot", "reference_evolve", "refined_energy",
    "refined_energy_time_derivative", "sigma", "sigma_radial", "solve_ground_state", "step", "to_pm",
    "write_ledger", "write_snapshot",
]
