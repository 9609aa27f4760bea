import math

import numpy as np
import pytest

from nlwide.errors import ConfigurationError
from nlwide.grid import Trajectory, build_grid
from nlwide.kernels import eval_H
from nlwide.mollify import (MollifierParams, mollifier_convergence, mollify,
                            mollify_derivative_check)


def make_traj(values, T=1.0):
    grid, _ = build_grid(R=1.0, M=12, K=values.shape[0] - 1, T=T)
    return Trajectory(np.asarray(values, dtype=float), T / (values.shape[0] - 1), grid)


def random_traj(rng, K=10, T=1.0):
    grid, _ = build_grid(R=1.0, M=12, K=K, T=T)
    return Trajectory(rng.normal(size=(K + 1, grid.n_points)), T / K, grid)


def direct_quadrature_oracle(traj, h, v0):
    """[v]_h(t_k) by explicit summation of the defining integral per interval.

    The piecewise-constant interpolant takes the slice k+1 value on
    (t_k, t_{k+1}], so each interval integrates to an exact exponential
    factor; this recomputes the integral without the one-step recurrence.
    """
    K, dt = traj.n_steps, traj.dt
    out = np.empty_like(traj.values)
    out[0] = v0
    for k in range(1, K + 1):
        t = k * dt
        acc = math.exp(-t / h) * v0.astype(float)
        for m2 in range(1, k + 1):
            lo, hi = (m2 - 1) * dt, m2 * dt
            factor = math.exp((hi - t) / h) - math.exp((lo - t) / h)
            acc = acc + factor * traj.values[m2]
        out[k] = acc
    return out


class TestMollify:
    def test_constant_fixed_point(self):
        traj = make_traj(np.full((6, 12), 3.5))
        out = mollify(traj, MollifierParams(0.3, traj.values[0]))
        assert np.array_equal(out.values, traj.values)

    def test_unit_step_closed_form(self):
        K = 8
        traj = make_traj(np.ones((K + 1, 12)))
        h = 0.21
        out = mollify(traj, MollifierParams(h, np.zeros(12)))
        times = traj.times
        expected = 1.0 - np.exp(-times / h)
        assert np.allclose(out.values, expected[:, None], rtol=0, atol=1e-15)

    def test_matches_direct_quadrature(self, rng):
        traj = random_traj(rng)
        v0 = rng.normal(size=12)
        h = 0.3
        out = mollify(traj, MollifierParams(h, v0))
        oracle = direct_quadrature_oracle(traj, h, v0)
        assert np.abs(out.values - oracle).max() <= 1e-12

    def test_bad_h_rejected(self, rng):
        traj = random_traj(rng)
        with pytest.raises(ConfigurationError):
            mollify(traj, MollifierParams(0.0, traj.values[0]))
        with pytest.raises(ConfigurationError):
            mollify(traj, MollifierParams(traj.horizon * 1.5, traj.values[0]))


class TestDerivativeIdentity:
    def test_constant_zero_residual(self):
        traj = make_traj(np.full((5, 12), -1.2))
        res = mollify_derivative_check(traj, MollifierParams(0.4, traj.values[0]))
        assert res == 0.0

    def test_unit_step_machine_precision(self):
        traj = make_traj(np.ones((9, 12)))
        res = mollify_derivative_check(traj, MollifierParams(0.17, np.zeros(12)))
        assert res <= 1e-12

    def test_random_trajectories(self, rng):
        for _ in range(5):
            traj = random_traj(rng)
            h = float(rng.uniform(0.05, 1.0))
            res = mollify_derivative_check(traj, MollifierParams(h, traj.values[0]))
            assert res <= 1e-12


class TestConvergence:
    def smooth_traj(self, K=256, T=2.0):
        # fine time grid: the asymptotic O(h) regime needs h well above dt
        grid, _ = build_grid(R=1.0, M=16, K=K, T=T)
        times = np.arange(K + 1) * (T / K)
        bump = np.where(grid.omega_mask,
                        np.sin(np.pi * np.clip(grid.points, 0, 1)), 0.0)
        vals = np.outer(1.0 - np.exp(-times), bump) + np.clip(grid.points, 0, 1)
        return Trajectory(vals, T / K, grid)

    def test_stationary_input_has_zero_gaps(self, pure_p2):
        traj = make_traj(np.tile(np.linspace(0, 1, 12), (7, 1)))
        rep = mollifier_convergence(pure_p2, traj, (0.4, 0.2, 0.1))
        for row in rep.rows:
            assert row.norm_gap == pytest.approx(0.0, abs=1e-14)
            assert row.energy_gap == pytest.approx(0.0, abs=1e-13)

    def test_first_order_rate_for_smooth_input(self, pure_p2):
        traj = self.smooth_traj()
        hs = tuple(0.5 * 2.0**-k for k in range(5))
        rep = mollifier_convergence(pure_p2, traj, hs)
        assert rep.norm_monotone and rep.energy_monotone
        assert 0.8 <= rep.norm_rate_slope <= 1.2
        assert 0.8 <= rep.energy_rate_slope <= 1.2
        assert rep.final_norm_ok

    def test_lemma_bound_on_random_trajectories(self, pure_p2, rng):
        for _ in range(20):
            traj = random_traj(rng, K=8)
            v0 = rng.normal(size=12)
            h = float(rng.uniform(0.05, 1.0))
            rep = mollifier_convergence(pure_p2, traj, (h,), v0=v0)
            assert rep.rows[0].lemma_margin >= -1e-12

    def test_schedule_validation(self, pure_p2, rng):
        traj = random_traj(rng)
        with pytest.raises(ConfigurationError):
            mollifier_convergence(pure_p2, traj, (0.1, 0.2))


class TestConvexityTransport:
    def test_jensen_pointwise_on_random_pairs(self, pure_p2, rng):
        """H of the mollified increment is dominated by the mollified H table."""
        traj = random_traj(rng, K=12)
        grid = traj.grid
        h = 0.25
        alpha = math.exp(-traj.dt / h)
        V = mollify(traj, MollifierParams(h, traj.values[0])).values
        for _ in range(30):
            e = int(rng.integers(0, len(grid.pair_i)))
            i, j = int(grid.pair_i[e]), int(grid.pair_j[e])
            x, y = grid.points[i], grid.points[j]
            hseries = np.array([eval_H(pure_p2, x, y, traj.values[k, i] - traj.values[k, j])
                                for k in range(traj.n_steps + 1)])
            mollified_h = np.empty_like(hseries)
            mollified_h[0] = hseries[0]
            for k in range(traj.n_steps):
                mollified_h[k + 1] = alpha * mollified_h[k] + (1 - alpha) * hseries[k + 1]
            lhs = np.array([eval_H(pure_p2, x, y, V[k, i] - V[k, j])
                            for k in range(traj.n_steps + 1)])
            scale = 1.0 + np.abs(hseries).max()
            assert np.all(lhs <= mollified_h + 1e-12 * scale)
