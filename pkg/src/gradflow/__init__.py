"""Pseudospectral solvers for gradient flows and dissipative systems.

The time integrators correct a classic semi-implicit baseline with a scalar
multiplier only on the steps where the baseline would raise the free energy,
which keeps the original (not a modified) energy non-increasing at any step
size while paying for a nonlinear scalar solve only occasionally.
"""

from .errors import (ConfigError, EmptyFeasibleSetError, GradflowError,
                     NoRootFoundError, SingularOperatorError, StepAbortError)
from .grids import PeriodicGrid
from .integrators import (BdfTableau, RunSummary, SchemeState,
                          StepDiagnostics, advance, bdf_tableau, make_state,
                          run, step_classic_cn, step_combined_bdf2,
                          step_combined_bdfk, step_combined_cn,
                          step_ternary_cn)
from .models import (AllenCahn, CahnHilliard, EnergyBreakdown, MbeNoSlope,
                     TernaryCahnHilliard, chemical_potential,
                     variational_consistency_check)
from .multiplier import (MultiplierOutcome, QuadraticEnergyCoeffs,
                         ScalarSolveConfig, bdf2_energy_coeffs,
                         bdf2_q_function, feasible_intervals,
                         solve_bdf2_constrained, solve_bdfk_residual,
                         solve_cn_residual, solve_ns_eta, solve_scalar)
from .navier_stokes import (NsState, advect, kinetic_energy, make_ns_state,
                            step_ns_combined, stokes_solve, taylor_green)
from .randomfields import seeded_random_field, splitmix64, uniform_symmetric
from .series import (SeriesRecord, read_snapshot, write_series,
                     write_snapshot)

__version__ = "0.1.0"

__all__ = [
    "AllenCahn", "BdfTableau", "CahnHilliard", "ConfigError",
    "EmptyFeasibleSetError", "EnergyBreakdown", "GradflowError",
    "MbeNoSlope", "MultiplierOutcome", "NoRootFoundError", "NsState",
    "PeriodicGrid", "QuadraticEnergyCoeffs", "RunSummary", "ScalarSolveConfig",
    "SchemeState", "SeriesRecord", "SingularOperatorError", "StepAbortError",
    "StepDiagnostics", "TernaryCahnHilliard", "advance", "advect",
    "bdf2_energy_coeffs", "bdf2_q_function", "bdf_tableau",
    "chemical_potential", "feasible_intervals", "kinetic_energy",
    "make_ns_state", "make_state", "read_snapshot", "run",
    "seeded_random_field", "solve_bdf2_constrained", "solve_bdfk_residual",
    "solve_cn_residual", "solve_ns_eta", "solve_scalar", "splitmix64",
    "step_classic_cn", "step_combined_bdf2", "step_combined_bdfk",
    "step_combined_cn", "step_ns_combined", "step_ternary_cn", "stokes_solve",
    "taylor_green", "uniform_symmetric", "variational_consistency_check",
    "write_series", "write_snapshot",
]
