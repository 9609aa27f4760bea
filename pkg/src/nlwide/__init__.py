"""Desk-scale solver and verification harness for nonlocal parabolic equations.

The evolution is produced constructively: minimize the exponentially
weighted convex space-time functional at parameter epsilon, drive epsilon
down a ladder, and certify every energy estimate, inequality, and identity
the construction guarantees.
"""

__version__ = "0.1.0"

from .backend import backend_name
from .config import RunConfig, parse_config
from .driver import LadderResult, RungRecord, holder_report, run_ladder, solve_rung
from .functional import Diagnostics, FunctionalParams, diagnostics, eval_F, grad_F, make_params
from .grid import (ProblemData, SpaceGrid, Trajectory, build_grid, discrete_norms,
                   energy_slice, estimate_poincare, make_problem, tail_correction)
from .kernels import (KernelSpec, StructureReport, Variant, builtin_specs,
                      check_structure, eval_H, eval_H_smoothed, eval_dH)
from .mollify import MollifierParams, mollify, mollify_derivative_check, mollifier_convergence
from .optimize import MinimizeResult, SolveOptions, continuation_in_mu, minimize
from .stepping import implicit_euler_solve
from .verify import (ComparisonMap, check_parabolic_minimizer, check_uniqueness,
                     check_variational_inequality, compare_weak, spectral_oracle_p2)
