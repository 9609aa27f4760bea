"""Accelerated first-order minimization of the smoothed convex functionals.

Nesterov momentum with restart on objective increase, Armijo backtracking on
the step size, stopping on the gradient max-norm.  The gradient callable is
fused: ``grad(x) -> (f(x), g(x))``, which saves one objective evaluation per
iteration on the expensive space-time functionals.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError

_STEP_GROWTH = 1.3
_STEP_FLOOR = 1e-20
# sufficient-decrease comparisons are meaningless below the rounding noise of
# the objective value; this slack keeps backtracking from collapsing there
_FP_SLACK = 4.0 * np.finfo(float).eps


@dataclass
class SolveOptions:
    grad_tol: float = 1e-7
    max_iters: int = 4000
    backtrack: float = 0.5
    initial_step: float = 1.0
    mu_schedule: tuple = (0.0,)
    seed: int = 0

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ConfigurationError("grad_tol must be positive")
        if not (0.0 < self.backtrack < 1.0):
            raise ConfigurationError("backtracking factor must lie in (0,1)")
        if self.initial_step <= 0:
            raise ConfigurationError("initial step must be positive")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        mus = tuple(self.mu_schedule)
        if len(mus) == 0:
            raise ConfigurationError("mu_schedule must be nonempty")
        if any(m < 0 for m in mus):
            raise ConfigurationError("mu_schedule entries must be nonnegative")
        if len(mus) > 1 and not all(a > b for a, b in zip(mus, mus[1:])):
            raise ConfigurationError("mu_schedule must be strictly decreasing")


@dataclass
class MinimizeResult:
    x: np.ndarray
    converged: bool
    iterations: int
    objective: float
    grad_max: float
    history: list = field(default_factory=list)


def _backtrack(fun, y, fy, gy, eta, factor):
    gsq = float(np.vdot(gy, gy))
    noise = _FP_SLACK * (1.0 + abs(fy))
    while True:
        cand = y - eta * gy
        fc = fun(cand)
        if fc <= fy - 0.5 * eta * gsq + noise:
            return cand, fc, eta
        eta *= factor
        if eta < _STEP_FLOOR:
            raise NumericalError("backtracking step collapsed")


def minimize(fun: Callable, grad: Callable, x0: np.ndarray,
             opts: SolveOptions) -> MinimizeResult:
    """Minimize a smooth convex objective; grad returns (value, gradient).

    Returns once the gradient max-norm falls below ``opts.grad_tol``; an
    exhausted iteration budget yields the best iterate with
    ``converged=False``.  The accepted-objective history is nonincreasing;
    an increase surviving a momentum restart raises ``NumericalError``.
    """
    x = np.array(x0, dtype=float, copy=True)
    x_prev = x.copy()
    theta = 1.0
    eta = opts.initial_step
    fx = fun(x)
    history = [fx]
    gmax = math.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        beta = (theta - 1.0) / theta_next
        y = x + beta * (x - x_prev)
        fy, gy = grad(y)
        gmax = float(np.abs(gy).max())
        if gmax <= opts.grad_tol:
            if beta == 0.0 or np.array_equal(y, x):
                return MinimizeResult(x, True, it, fx, gmax, history)
            fx2, gx = grad(x)
            gxmax = float(np.abs(gx).max())
            if gxmax <= opts.grad_tol:
                return MinimizeResult(x, True, it, fx2, gxmax, history)
            if fy <= fx:
                history.append(fy)
                return MinimizeResult(y, True, it, fy, gmax, history)
        cand, fc, eta = _backtrack(fun, y, fy, gy, eta, opts.backtrack)
        if fc > fx + _FP_SLACK * (1.0 + abs(fx)):
            # momentum overshoot: restart from the last accepted iterate
            theta = 1.0
            theta_next = 1.0
            fx_chk, gx = grad(x)
            gmax = float(np.abs(gx).max())
            if gmax <= opts.grad_tol:
                return MinimizeResult(x, True, it, fx_chk, gmax, history)
            cand, fc, eta = _backtrack(fun, x, fx_chk, gx, eta, opts.backtrack)
            if fc > fx + 1e-12 * (1.0 + abs(fx)):
                raise NumericalError("objective increased after momentum restart")
            fc = min(fc, fx)
        assert fc <= history[-1] + 1e-12 * (1.0 + abs(history[-1]))
        x_prev, x = x, cand
        fx = fc
        history.append(fx)
        theta = theta_next
        eta *= _STEP_GROWTH
    return MinimizeResult(x, False, it, fx, gmax, history)


def continuation_in_mu(params, spec, grid, x0: np.ndarray, dt: float,
                       opts: SolveOptions):
    """Solve at each smoothing level, warm-starting from the previous one.

    The final rung may be mu = 0 only for densities that are C^1 without
    smoothing (p, q >= 2); otherwise every rung must be positive.
    """
    from .functional import eval_F, value_and_grad
    from .grid import Trajectory

    mus = tuple(opts.mu_schedule)
    if not spec.smooth_everywhere() and any(m <= 0 for m in mus):
        raise ConfigurationError("p<2 (or q<2) densities need a positive mu ladder")
    results = []
    x = np.array(x0, dtype=float, copy=True)
    for mu in mus:
        spec_mu = spec.with_mu(mu)

        def fun(u, _s=spec_mu):
            return eval_F(params, _s, grid, Trajectory(u, dt, grid), smoothed=True)

        def grd(u, _s=spec_mu):
            return value_and_grad(params, _s, grid, u, dt)

        res = minimize(fun, grd, x, opts)
        results.append(res)
        x = res.x
    return Trajectory(x, dt, grid), results
