import numpy as np
import pytest
import scipy.linalg

from nlwide.grid import build_grid, make_problem
from nlwide.optimize import SolveOptions
from nlwide.stepping import implicit_euler_solve


def dense_p2_system(grid, u0):
    """Brute-force flow system u' + A u = b for the pure p=2 energy with tails."""
    m = grid.n_points
    iw = grid.omega_idx
    P = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i == j or not (grid.omega_mask[i] or grid.omega_mask[j]):
                continue
            c = 4.0 * grid.dx**2 / abs(grid.points[i] - grid.points[j]) ** 2
            P[i, i] += c
            P[i, j] -= c
    load = -(P[np.ix_(iw, np.setdiff1d(np.arange(m), iw))]
             @ u0[np.setdiff1d(np.arange(m), iw)])
    for a, (pos, d) in enumerate(zip(iw, grid.edge_dist_left)):
        P[pos, pos] += 2.0 * grid.dx / d
        load[a] += 2.0 * grid.dx / d * u0[0]
    for a, (pos, d) in enumerate(zip(iw, grid.edge_dist_right)):
        P[pos, pos] += 2.0 * grid.dx / d
        load[a] += 2.0 * grid.dx / d * u0[-1]
    A = P[np.ix_(iw, iw)] / grid.dx
    b = load / grid.dx
    return A, b


class TestImplicitEuler:
    def test_p2_matches_dense_per_step_solves(self, pure_p2, fast_opts):
        K, T = 12, 1.2
        grid, _ = build_grid(R=1.0, M=24, K=K, T=T)
        u0 = np.clip(grid.points, 0.0, 1.0)
        problem = make_problem(pure_p2, grid, u0)
        opts = SolveOptions(grad_tol=1e-9, max_iters=4000)
        result = implicit_euler_solve(problem, pure_p2, K, T, opts)

        A, b = dense_p2_system(grid, u0)
        iw = grid.omega_idx
        dt = T / K
        S = np.eye(len(iw)) + dt * A
        u = u0[iw].copy()
        worst = 0.0
        for k in range(K):
            u = scipy.linalg.solve(S, u + dt * b)
            worst = max(worst, np.abs(result.traj.values[k + 1, iw] - u).max())
        assert worst <= 1e-8

    def test_stationary_datum_is_fixed_point(self, pure_p2, fast_opts):
        K, T = 6, 0.6
        grid, _ = build_grid(R=1.0, M=24, K=K, T=T)
        u0 = np.clip(grid.points, 0.0, 1.0)
        A, b = dense_p2_system(grid, u0)
        u_star = u0.copy()
        u_star[grid.omega_idx] = scipy.linalg.solve(A, b)
        problem = make_problem(pure_p2, grid, u_star)
        result = implicit_euler_solve(problem, pure_p2, K, T,
                                      SolveOptions(grad_tol=1e-9, max_iters=4000))
        drift = np.abs(result.traj.values - u_star[None, :]).max()
        assert drift <= 1e-7

    @pytest.mark.parametrize("name", ["pure-p2", "pure-p3", "double-p2q4", "log-p2"])
    def test_energy_dissipation(self, name, specs, fast_opts):
        spec = specs[name]
        K, T = 8, 0.8
        grid, _ = build_grid(R=1.0, M=20, K=K, T=T)
        u0 = np.clip(grid.points, 0.0, 1.0) ** 2
        problem = make_problem(spec, grid, u0)
        result = implicit_euler_solve(problem, spec, K, T, fast_opts)
        assert np.all(np.diff(result.energies) <= 1e-10 * (1.0 + result.energies[:-1]))
        assert np.all(result.step_residuals <= fast_opts.grad_tol)
