"""The epsilon-continuation ladder: per-rung solves, energy ledger, limit checks.

Each rung minimizes the weighted functional at its epsilon, warm-started
from the previous rung (the first rung from the implicit-Euler trajectory
by default, which seeds the weight-dead late-time window with a consistent
evolution).  Every proved energy estimate is evaluated per rung and for the
ladder limit; violations mark records invalid instead of raising.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .functional import Diagnostics, diagnostics, eval_F, make_params
from .grid import ProblemData, Trajectory, extend_datum, l2_omega_sq, traj_l2_sq
from .kernels import KernelSpec
from .optimize import SolveOptions, continuation_in_mu
from .stepping import implicit_euler_solve

HORIZON_FACTOR = 18.4  # T >= 18.4 * eps makes exp(-T/eps) <= 1e-8
DEFAULT_TOL = 0.05
MONO_TOL_FACTOR = 1e-6
MINIMALITY_SLACK = 1e-8


@dataclass
class RungRecord:
    epsilon: float
    F_value: float
    F_bound: float                # (1 - e^{-T/eps}) Lambda
    weighted_kinetic: float       # int e^{-t/eps} |du/dt|^2, bound 2 Lambda
    weighted_potential: float     # int e^{-t/eps} E(u(t)), bound eps Lambda
    unweighted_kinetic: float     # int |du/dt|^2, bound Lambda (uniform lemma)
    mono_margin: float            # min decrease of e^{t/eps} I(t)
    slab_worst_mean: float        # worst slab-average energy, bound 2e Lambda
    slab_checked: bool            # False when no slab satisfies t2 - t1 >= eps
    optimizer_iterations: int
    optimizer_converged: bool
    grad_max: float
    ok_minimality: bool
    ok_weighted_kinetic: bool
    ok_weighted_potential: bool
    ok_mono: bool
    ok_unweighted_kinetic: bool
    ok_slab: bool
    diagnostics: Diagnostics

    @property
    def valid(self) -> bool:
        return (self.ok_minimality and self.ok_weighted_kinetic
                and self.ok_weighted_potential and self.ok_mono
                and self.ok_unweighted_kinetic and self.ok_slab)


def _slab_worst_mean(E: np.ndarray, dt: float, min_width: float):
    """Worst mean of the left-endpoint energy over slabs of width >= min_width."""
    K = len(E)
    cum = np.concatenate([[0.0], np.cumsum(dt * E)])
    wmin = max(1, math.ceil(min_width / dt - 1e-12))
    worst = -math.inf
    for w in range(wmin, K + 1):
        means = (cum[w:] - cum[:-w]) / (w * dt)
        worst = max(worst, float(means.max()))
    if worst == -math.inf:
        return 0.0, False
    return worst, True


def solve_rung(epsilon: float, problem: ProblemData, spec: KernelSpec, K: int,
               T: float, opts: SolveOptions, start: Optional[Trajectory] = None,
               mu_schedule: Optional[Sequence[float]] = None,
               tol: float = DEFAULT_TOL):
    """Minimize the rung functional and certify its energy estimates."""
    if T < HORIZON_FACTOR * epsilon:
        raise ConfigurationError(
            f"horizon rule violated: T={T} < {HORIZON_FACTOR}*eps={HORIZON_FACTOR * epsilon}"
        )
    grid = problem.grid
    lam = problem.lambda_disc
    if start is None:
        start = extend_datum(problem, K, T)
    dt = T / K
    params = make_params(epsilon, K, dt, lam, spec.mu)
    if mu_schedule is None:
        mu_schedule = opts.mu_schedule
    rung_opts = SolveOptions(
        grad_tol=opts.grad_tol, max_iters=opts.max_iters, backtrack=opts.backtrack,
        initial_step=opts.initial_step, mu_schedule=tuple(mu_schedule), seed=opts.seed,
    )
    traj, results = continuation_in_mu(params, spec, grid, start.values, dt, rung_opts)
    last = results[-1]
    spec_final = spec.with_mu(rung_opts.mu_schedule[-1])
    diag = diagnostics(params, spec_final, grid, traj)
    F_raw = eval_F(params, spec_final, grid, traj, smoothed=False)
    F_bound = -lam * math.expm1(-T / epsilon)
    wkin = 2.0 * float(np.sum(params.weights * diag.L))
    wpot = epsilon * float(np.sum(params.weights * (diag.G - diag.L)))
    ukin = 2.0 * float(np.sum(dt * diag.L))
    E = (diag.G - diag.L) * epsilon
    slab_worst, slab_checked = _slab_worst_mean(E, dt, epsilon)
    rec = RungRecord(
        epsilon=epsilon,
        F_value=F_raw,
        F_bound=F_bound,
        weighted_kinetic=wkin,
        weighted_potential=wpot,
        unweighted_kinetic=ukin,
        mono_margin=diag.monotone_margin,
        slab_worst_mean=slab_worst,
        slab_checked=slab_checked,
        optimizer_iterations=sum(r.iterations for r in results),
        optimizer_converged=all(r.converged for r in results),
        grad_max=last.grad_max,
        ok_minimality=F_raw <= F_bound + MINIMALITY_SLACK * lam,
        ok_weighted_kinetic=wkin <= 2.0 * lam * (1.0 + tol),
        ok_weighted_potential=wpot <= epsilon * lam * (1.0 + tol),
        ok_mono=diag.monotone_margin >= -MONO_TOL_FACTOR * lam,
        ok_unweighted_kinetic=ukin <= lam * (1.0 + tol),
        ok_slab=(not slab_checked) or slab_worst <= 2.0 * math.e * lam * (1.0 + tol),
        diagnostics=diag,
    )
    return traj, rec


@dataclass
class HolderReport:
    worst_ratio: float        # max ||u(t2)-u(t1)||^2 / (Lambda |t2-t1|)
    worst_pair: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= 1.0 + self.tol


def holder_report(traj: Trajectory, lambda_disc: float,
                  tol: float = DEFAULT_TOL) -> HolderReport:
    """Half-Hoelder-in-time certificate over every pair of grid times."""
    U = traj.values[:, traj.grid.omega_idx]
    dx, dt = traj.grid.dx, traj.dt
    K = traj.n_steps
    worst, pair = -math.inf, (0, 0)
    for k in range(K):
        d2 = np.sum((U[k + 1:] - U[k]) ** 2, axis=1) * dx
        gaps = (np.arange(k + 1, K + 1) - k) * dt
        ratios = d2 / (lambda_disc * gaps)
        j = int(ratios.argmax())
        if ratios[j] > worst:
            worst, pair = float(ratios[j]), (k, k + 1 + j)
    return HolderReport(worst, pair, tol)


@dataclass
class LadderResult:
    limit: Trajectory
    rungs: list
    cauchy_gaps: list
    converged: bool            # Cauchy criterion met on the final pair
    limit_tol: float
    holder: HolderReport
    recovery_worst: float      # max ||u(t)-u0||^2 / (2 t Lambda)
    limit_unweighted_kinetic: float
    limit_slab_worst: float
    limit_slab_checked: bool
    lambda_disc: float
    initializer: str

    @property
    def ok_recovery(self) -> bool:
        return self.recovery_worst <= 1.0 + DEFAULT_TOL

    @property
    def ok_limit_kinetic(self) -> bool:
        return self.limit_unweighted_kinetic <= self.lambda_disc * (1.0 + DEFAULT_TOL)

    @property
    def ok_limit_slab(self) -> bool:
        return (not self.limit_slab_checked) or (
            self.limit_slab_worst <= 2.0 * math.e * self.lambda_disc * (1.0 + DEFAULT_TOL)
        )


def run_ladder(eps_schedule: Sequence[float], problem: ProblemData, spec: KernelSpec,
               K: int, opts: SolveOptions, T: Optional[float] = None,
               initializer: str = "euler", limit_tol: float = DEFAULT_TOL,
               start: Optional[Trajectory] = None) -> LadderResult:
    """Drive epsilon down the schedule with warm starts and certify the limit."""
    eps = list(eps_schedule)
    if len(eps) < 3:
        raise ConfigurationError("epsilon schedule needs at least 3 rungs")
    if not all(a > b > 0 for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("epsilon schedule must be positive, strictly decreasing")
    if T is None:
        T = HORIZON_FACTOR * eps[0]
    grid = problem.grid
    dt = T / K
    if start is not None:
        current = start
    elif initializer == "euler":
        current = implicit_euler_solve(problem, spec.with_mu(opts.mu_schedule[0]),
                                       K, T, opts).traj
    elif initializer == "datum":
        current = extend_datum(problem, K, T)
    else:
        raise ConfigurationError(f"unknown initializer {initializer!r}")

    rungs, gaps = [], []
    for j, e in enumerate(eps):
        mu_schedule = opts.mu_schedule if j == 0 else (opts.mu_schedule[-1],)
        traj, rec = solve_rung(e, problem, spec, K, T, opts, start=current,
                               mu_schedule=mu_schedule)
        rungs.append(rec)
        if j > 0:
            gaps.append(math.sqrt(traj_l2_sq(grid, dt, traj.values - current.values)))
        current = traj
    scale = 1.0 + math.sqrt(traj_l2_sq(grid, dt, current.values))
    converged = bool(gaps and gaps[-1] <= limit_tol * scale)

    lam = problem.lambda_disc
    diag = rungs[-1].diagnostics
    E = (diag.G - diag.L) * eps[-1]
    slab_worst, slab_checked = _slab_worst_mean(E, dt, eps[-1])
    ukin = 2.0 * float(np.sum(dt * diag.L))
    rec_worst = -math.inf
    for k in range(1, K + 1):
        d2 = l2_omega_sq(grid, current.values[k] - problem.u0)
        rec_worst = max(rec_worst, d2 / (2.0 * (k * dt) * lam))
    return LadderResult(
        limit=current,
        rungs=rungs,
        cauchy_gaps=gaps,
        converged=converged,
        limit_tol=limit_tol,
        holder=holder_report(current, lam),
        recovery_worst=float(rec_worst),
        limit_unweighted_kinetic=ukin,
        limit_slab_worst=slab_worst,
        limit_slab_checked=slab_checked,
        lambda_disc=lam,
        initializer=initializer if start is None else "provided",
    )
