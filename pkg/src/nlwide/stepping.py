"""Minimizing-movement (implicit Euler) time stepping for the nonlocal energy.

Each step solves the strictly convex slice problem

    u^{k+1} = argmin_w  0.5 ||w - u^k||^2_{L^2(Omega)} / dt  +  E(w)

with the exterior frozen to the datum.  The scheme dissipates the energy
monotonically (u^k is admissible at step k) and is the weak-solution
reference the space-time minimizers are compared against.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .functional import _require_smoothable
from .grid import (ProblemData, Trajectory, energy_slice, slice_energies,
                   tail_gradient)
from .kernels import KernelSpec
from .optimize import SolveOptions, minimize
from . import backend


@dataclass
class EulerResult:
    traj: Trajectory
    energies: np.ndarray       # per-slice energy, nonincreasing
    step_residuals: np.ndarray  # per-step final gradient max-norm


def _slice_value_and_grad(spec: KernelSpec, grid, w: np.ndarray):
    t = grid.tables(spec)
    e, g = backend.traj_energy_grad(
        spec.code, spec.p, spec.q_or_p, spec.mu, w[None, :],
        grid.pair_i, grid.pair_j, t.inv_s, t.inv_r, t.a, t.wq,
    )
    from .grid import tail_correction

    e = e[0] + tail_correction(spec, grid, w, smoothed=True)
    g = g[0] + tail_gradient(spec, grid, w[None, :], smoothed=True)[0]
    return float(e), g


def implicit_euler_solve(problem: ProblemData, spec: KernelSpec, K: int, T: float,
                         opts: SolveOptions) -> EulerResult:
    """March K steps of size T/K from the datum; abort on a failed step."""
    _require_smoothable(spec)
    grid = problem.grid
    dt = T / K
    iw = grid.omega_idx
    mass = grid.dx / dt
    U = np.tile(problem.u0, (K + 1, 1))
    residuals = np.zeros(K)
    for k in range(K):
        uk = U[k]

        def fun(w, _uk=uk):
            e = energy_slice(spec, grid, w, smoothed=True)
            return 0.5 * mass * float(np.sum((w[iw] - _uk[iw]) ** 2)) + e

        def grd(w, _uk=uk):
            e, g = _slice_value_and_grad(spec, grid, w)
            val = 0.5 * mass * float(np.sum((w[iw] - _uk[iw]) ** 2)) + e
            g = g.copy()
            g[iw] += mass * (w[iw] - _uk[iw])
            g[~grid.omega_mask] = 0.0
            return val, g

        res = minimize(fun, grd, uk, opts)
        if not res.converged:
            raise NumericalError(f"implicit Euler step {k} did not converge "
                                 f"(grad max {res.grad_max:.3e})")
        U[k + 1] = res.x
        residuals[k] = res.grad_max
    energies = slice_energies(spec, grid, U)
    return EulerResult(Trajectory(U, dt, grid), energies, residuals)
