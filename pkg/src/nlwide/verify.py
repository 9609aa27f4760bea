"""Inequality batteries, uniqueness probes, and independent p=2 oracles.

The defining variational inequality and the parabolic-minimizer inequality
are evaluated on families of comparison maps (separable space bumps times
time ramps); margins are data, never exceptions.  For the quadratic pure
p=2 density the evolution has an exact spectral solution assembled from the
discrete form matrix, which cross-validates the space-time minimizers and
the implicit-Euler marcher.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from .errors import ConfigurationError, NumericalError
from .driver import run_ladder
from .grid import (ProblemData, SpaceGrid, Trajectory, extend_datum,
                   l2_omega_sq, slice_energies, traj_l2_sq)
from .kernels import KernelSpec, Variant
from .optimize import SolveOptions
from .stepping import EulerResult, implicit_euler_solve  # noqa: F401  (re-export)


def _worker_count() -> Optional[int]:
    env = os.environ.get("NLWIDE_WORKERS")
    if env:
        return max(1, int(env))
    return None


def _trapezoid(K: int, dt: float) -> np.ndarray:
    ct = np.full(K + 1, dt)
    ct[0] = ct[-1] = 0.5 * dt
    return ct


def fd_time_derivative(V: np.ndarray, dt: float) -> np.ndarray:
    """Centered finite differences in time, one-sided at the ends."""
    D = np.empty_like(V)
    D[0] = (V[1] - V[0]) / dt
    D[-1] = (V[-1] - V[-2]) / dt
    D[1:-1] = (V[2:] - V[:-2]) / (2.0 * dt)
    return D


@dataclass
class ComparisonMap:
    values: np.ndarray     # (K+1, M), exterior columns frozen to the datum
    dt_table: np.ndarray   # finite-difference time derivative
    tag: str


def make_comparison_map(u: Trajectory, mode: int, sigma: float,
                        ramp: str = "linear") -> ComparisonMap:
    """v = u + sigma * bump_mode(x) * ramp(t), supported in Omega."""
    grid = u.grid
    x = grid.points
    bump = np.where(grid.omega_mask, np.sin(mode * np.pi * np.clip(x, 0.0, 1.0)), 0.0)
    t = u.times / u.horizon
    if ramp == "linear":
        r = t
    elif ramp == "smooth":
        r = 0.5 * (1.0 - np.cos(np.pi * t))
    else:
        raise ConfigurationError(f"unknown ramp {ramp!r}")
    V = u.values + sigma * r[:, None] * bump[None, :]
    return ComparisonMap(V, fd_time_derivative(V, u.dt),
                         f"bump{mode}:{ramp}:sigma={sigma:+g}")


def check_variational_inequality(spec: KernelSpec, u: Trajectory,
                                 v: ComparisonMap) -> float:
    """Signed margin (RHS - LHS) of the discrete comparison inequality.

    Energies are the raw C_Omega slice energies, time integrals trapezoidal;
    the boundary terms live at t=0 (against the datum) and t=T.
    """
    grid, dt, K = u.grid, u.dt, u.n_steps
    ct = _trapezoid(K, dt)
    E_u = slice_energies(spec, grid, u.values)
    E_v = slice_energies(spec, grid, v.values)
    pairing = np.sum(
        (v.dt_table * (v.values - u.values))[:, grid.omega_idx], axis=1
    ) * grid.dx
    lhs = float(np.sum(ct * E_u))
    rhs = float(np.sum(ct * E_v)) + float(np.sum(ct * pairing))
    rhs += 0.5 * l2_omega_sq(grid, v.values[0] - u.values[0])
    rhs -= 0.5 * l2_omega_sq(grid, v.values[-1] - u.values[-1])
    return rhs - lhs


def check_parabolic_minimizer(spec: KernelSpec, u: Trajectory,
                              phi: np.ndarray) -> float:
    """Signed margin of the compact-perturbation minimality inequality."""
    grid, dt, K = u.grid, u.dt, u.n_steps
    if not (np.all(phi[0] == 0.0) and np.all(phi[-1] == 0.0)):
        raise ConfigurationError("phi must vanish at the initial and final times")
    if not np.all(phi[:, ~grid.omega_mask] == 0.0):
        raise ConfigurationError("phi must vanish outside Omega")
    ct = _trapezoid(K, dt)
    E_u = slice_energies(spec, grid, u.values)
    E_up = slice_energies(spec, grid, u.values + phi)
    dphi = fd_time_derivative(phi, dt)
    pairing = np.sum((u.values * dphi)[:, grid.omega_idx], axis=1) * grid.dx
    return float(np.sum(ct * (E_up - E_u)) - np.sum(ct * pairing))


def make_test_bump(u: Trajectory, mode: int, sigma: float) -> np.ndarray:
    """Compactly supported space-time perturbation for the minimizer battery."""
    grid = u.grid
    x = grid.points
    bump = np.where(grid.omega_mask, np.sin(mode * np.pi * np.clip(x, 0.0, 1.0)), 0.0)
    w = np.sin(np.pi * u.times / u.horizon)
    w[0] = w[-1] = 0.0
    return sigma * w[:, None] * bump[None, :]


@dataclass
class BatteryReport:
    margins: list
    tags: list
    viol_tol: float

    @property
    def worst(self) -> float:
        return min(self.margins)

    @property
    def all_pass(self) -> bool:
        return all(m >= -self.viol_tol for m in self.margins)

    @property
    def any_fail(self) -> bool:
        return any(m < -self.viol_tol for m in self.margins)


def datum_extension_map(u: Trajectory) -> ComparisonMap:
    """The time-independent extension of the datum as a comparison map."""
    V = np.tile(u.values[0], (u.values.shape[0], 1))
    return ComparisonMap(V, np.zeros_like(V), "datum-extension")


def vi_battery(spec: KernelSpec, u: Trajectory, lambda_disc: float,
               count: int = 20, viol_tol: Optional[float] = None) -> BatteryReport:
    """Variational-inequality battery: the datum extension plus the bump family.

    The datum-extension map is what makes the battery sensitive to corrupted
    trajectories: perturbations added on top of u cancel the corruption on
    both sides of the inequality, an independent comparison map does not.
    """
    if viol_tol is None:
        viol_tol = 0.02 * (1.0 + lambda_disc)
    maps = [datum_extension_map(u)]
    combos = [(m, sgn * s, ramp)
              for ramp in ("linear", "smooth")
              for s in (0.1, 0.5, 1.0)
              for m in (1, 2, 3, 4, 5)
              for sgn in (+1.0, -1.0)]
    for m, sigma, ramp in combos[:count]:
        maps.append(make_comparison_map(u, m, sigma, ramp))
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        margins = list(pool.map(
            lambda v: check_variational_inequality(spec, u, v), maps))
    return BatteryReport(margins, [v.tag for v in maps], viol_tol)


def parabolic_battery(spec: KernelSpec, u: Trajectory, lambda_disc: float,
                      count: int = 20, viol_tol: Optional[float] = None) -> BatteryReport:
    if viol_tol is None:
        viol_tol = 0.02 * (1.0 + lambda_disc)
    combos = [(m, sgn * s)
              for s in (0.1, 0.5, 1.0)
              for m in (1, 2, 3, 4)
              for sgn in (+1.0, -1.0)]
    phis = [make_test_bump(u, m, sigma) for m, sigma in combos[:count]]
    tags = [f"phi{m}:sigma={sigma:+g}" for m, sigma in combos[:count]]
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        margins = list(pool.map(
            lambda p: check_parabolic_minimizer(spec, u, p), phis))
    return BatteryReport(margins, tags, viol_tol)


def corrupt_trajectory(u: Trajectory, seed: int = 0, amplitude: float = 1.0) -> Trajectory:
    """Overwrite one interior slice with noise (negative-control input)."""
    rng = np.random.default_rng(seed)
    bad = u.copy()
    k = u.n_steps // 2
    bad.values[k, u.grid.omega_mask] += amplitude * rng.uniform(
        -1.0, 1.0, int(u.grid.omega_mask.sum()))
    return bad


# --- uniqueness --------------------------------------------------------------


@dataclass
class UniquenessResult:
    max_gap: float
    gaps: list
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tol


def check_uniqueness(problem: ProblemData, spec: KernelSpec, K: int,
                     eps_schedule: Sequence[float], opts: SolveOptions,
                     seed: int = 0, n_runs: int = 3,
                     T: Optional[float] = None) -> UniquenessResult:
    """Full-ladder solves from the datum extension and randomized starts.

    The random perturbations are enveloped by exp(-t/eps_max): beyond the
    weight-active window the functional's curvature is below floating-point
    resolution, so unwindowed noise there would probe arithmetic starvation
    rather than strict convexity.
    """
    from .driver import HORIZON_FACTOR

    eps = list(eps_schedule)
    if T is None:
        T = HORIZON_FACTOR * eps[0]
    dt = T / K
    grid = problem.grid
    rng = np.random.default_rng(seed)
    limits = []
    for run in range(n_runs):
        start = extend_datum(problem, K, T)
        if run > 0:
            envelope = np.exp(-2.0 * start.times / eps[0])
            noise = rng.uniform(-0.25, 0.25, start.values.shape)
            noise[0] = 0.0
            noise[:, ~grid.omega_mask] = 0.0
            start.values += envelope[:, None] * noise
        res = run_ladder(eps, problem, spec, K, opts, T=T, start=start)
        limits.append(res.limit)
    gaps = []
    for a in range(n_runs):
        for b in range(a + 1, n_runs):
            gaps.append(math.sqrt(traj_l2_sq(grid, dt, limits[a].values - limits[b].values)))
    u0_scale = math.sqrt(traj_l2_sq(grid, dt, extend_datum(problem, K, T).values))
    return UniquenessResult(max(gaps), gaps, 1e-4 * (1.0 + u0_scale))


# --- p = 2 spectral oracle ----------------------------------------------------


def assemble_p2_system(problem: ProblemData, spec: KernelSpec):
    """Dense interior form matrix A and load b of the flow u' + A u = b.

    Valid for the quadratic pure-phase density (p=2), for which the slice
    energy is E(u_I) = 0.5 u_I^T P u_I + c^T u_I + const; then A = P/dx and
    b = -c/dx in the L^2(Omega) pairing.
    """
    if spec.variant is not Variant.PURE_PHASE or spec.p != 2.0:
        raise ConfigurationError("spectral oracle requires the pure-phase p=2 density")
    grid = problem.grid
    t = grid.tables(spec)
    iw = grid.omega_idx
    pos = np.full(grid.n_points, -1)
    pos[iw] = np.arange(len(iw))
    P = np.zeros((len(iw), len(iw)))
    # pair contributions: wq * (u_i - u_j)^2 * inv_s^2 per pair
    coef = 2.0 * t.wq * t.inv_s**2
    for i, j, c in zip(grid.pair_i, grid.pair_j, coef):
        a, b_ = pos[i], pos[j]
        if a >= 0:
            P[a, a] += c
        if b_ >= 0:
            P[b_, b_] += c
        if a >= 0 and b_ >= 0:
            P[a, b_] -= c
            P[b_, a] -= c
    # tail contributions are diagonal quadratics per side
    for d in (grid.edge_dist_left, grid.edge_dist_right):
        P[np.arange(len(iw)), np.arange(len(iw))] += (
            2.0 * grid.dx / (spec.s * spec.p) * d ** (-2.0 * spec.s)
        )
    # affine load from the gradient at the datum: grad_I E(u0) = P u0_I + c
    from .stepping import _slice_value_and_grad

    _, g = _slice_value_and_grad(spec, grid, problem.u0)
    c = g[iw] - P @ problem.u0[iw]
    A = P / grid.dx
    b = -c / grid.dx
    return A, b


def spectral_oracle_p2(problem: ProblemData, spec: KernelSpec,
                       times: np.ndarray) -> np.ndarray:
    """Exact-in-time solution of the discrete p=2 flow at the given times."""
    A, b = assemble_p2_system(problem, spec)
    try:
        lam, V = la.eigh(A)
    except la.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"eigensolve failed: {exc}")
    if lam.min() <= 0:
        raise NumericalError("form matrix is not positive definite")
    grid = problem.grid
    iw = grid.omega_idx
    uinf = V @ ((V.T @ b) / lam)
    c0 = V.T @ (problem.u0[iw] - uinf)
    times = np.asarray(times, dtype=float)
    out = np.tile(problem.u0, (len(times), 1))
    out[:, iw] = uinf[None, :] + (np.exp(-np.outer(times, lam)) * c0[None, :]) @ V.T
    return out


def stationary_p2(problem: ProblemData, spec: KernelSpec) -> np.ndarray:
    """Direct solve of the stationary problem A u = b on the full grid."""
    A, b = assemble_p2_system(problem, spec)
    out = problem.u0.copy()
    out[problem.grid.omega_idx] = la.solve(A, b)
    return out


# --- cross-solver comparison ---------------------------------------------------


@dataclass
class CompareReport:
    rel_wide_euler: float
    rel_wide_spectral: Optional[float]
    rel_euler_spectral: Optional[float]
    tol_spectral: float
    tol_euler: float

    @property
    def passed(self) -> bool:
        if self.rel_wide_spectral is not None:
            return self.rel_wide_spectral <= self.tol_spectral
        return self.rel_wide_euler <= self.tol_euler


def compare_weak(u_wide: Trajectory, u_euler: Trajectory,
                 u_spectral: Optional[np.ndarray] = None,
                 tol_spectral: float = 0.05, tol_euler: float = 0.08) -> CompareReport:
    """Relative L^2(Omega_T) distances between the solver trajectories."""
    grid, dt = u_wide.grid, u_wide.dt
    if u_euler.values.shape != u_wide.values.shape:
        raise ConfigurationError("trajectories must share the grid to be compared")

    def norm(V):
        return math.sqrt(traj_l2_sq(grid, dt, V))

    def rel(a, b, den):
        return norm(a - b) / max(den, 1e-300)

    nw, ne = norm(u_wide.values), norm(u_euler.values)
    rel_we = rel(u_wide.values, u_euler.values, max(nw, ne))
    rel_ws = rel_es = None
    if u_spectral is not None:
        ns = norm(u_spectral)
        rel_ws = rel(u_wide.values, u_spectral, ns)
        rel_es = rel(u_euler.values, u_spectral, ns)
    return CompareReport(rel_we, rel_ws, rel_es, tol_spectral, tol_euler)
