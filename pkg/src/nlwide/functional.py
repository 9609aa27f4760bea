"""The exponentially weighted space-time functional, its gradient and diagnostics.

Time staggering: the kinetic term lives on intervals (forward difference),
the energy on the interval's left endpoint slice.  The weight of interval k
is the exact integral of exp(-t/eps) over [t_k, t_{k+1}], which makes the
value of the functional at the time-independent extension a closed form:
(1 - exp(-T/eps)) * Lambda.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ConfigurationError, NumericalError
from .grid import SpaceGrid, Trajectory, slice_energies, tail_corrections, tail_gradient
from .kernels import KernelSpec


@dataclass
class FunctionalParams:
    epsilon: float
    weights: np.ndarray  # (K,) exact per-interval integrals of exp(-t/eps)
    lambda_disc: float
    mu: float  # mirrors KernelSpec.mu, recorded for reports

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if not (np.all(self.weights > 0) and np.all(np.diff(self.weights) < 0)):
            raise ConfigurationError("weights must be positive and strictly decreasing")


def make_params(epsilon: float, K: int, dt: float, lambda_disc: float,
                mu: float = 0.0) -> FunctionalParams:
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    tk = np.arange(K) * dt
    # eps * (exp(-t_k/eps) - exp(-t_{k+1}/eps)) without cancellation
    w = -epsilon * np.exp(-tk / epsilon) * np.expm1(-dt / epsilon)
    return FunctionalParams(epsilon, w, lambda_disc, mu)


def _kinetic_slabs(grid: SpaceGrid, U: np.ndarray, dt: float) -> np.ndarray:
    """Per-interval integral over Omega of the squared forward difference quotient."""
    dU = np.diff(U, axis=0) / dt
    return np.sum(dU[:, grid.omega_idx] ** 2, axis=1) * grid.dx


def eval_F(params: FunctionalParams, spec: KernelSpec, grid: SpaceGrid,
           traj: Trajectory, smoothed: bool = False) -> float:
    U = traj.values
    K = traj.n_steps
    kin = _kinetic_slabs(grid, U, traj.dt)
    E = slice_energies(spec, grid, U[:K], smoothed=smoothed)
    val = float(np.sum(params.weights * (0.5 * kin + E / params.epsilon)))
    if not np.isfinite(val):
        raise NumericalError("non-finite functional value")
    return val


def _require_smoothable(spec: KernelSpec):
    if not spec.smooth_everywhere() and spec.mu <= 0.0:
        raise ConfigurationError(
            "gradient of a p<2 (or q<2) density needs mu > 0 smoothing"
        )


def value_and_grad(params: FunctionalParams, spec: KernelSpec, grid: SpaceGrid,
                   U: np.ndarray, dt: float):
    """Fused smoothed objective and gradient on a raw (K+1, M) array.

    Frozen coordinates (slice 0 and all exterior columns) carry zero gradient.
    """
    _require_smoothable(spec)
    K = U.shape[0] - 1
    t = grid.tables(spec)
    Uk = np.ascontiguousarray(U[:K])
    E, G = backend.traj_energy_grad(
        spec.code, spec.p, spec.q_or_p, spec.mu, Uk,
        grid.pair_i, grid.pair_j, t.inv_s, t.inv_r, t.a, t.wq,
    )
    E += tail_corrections(spec, grid, Uk, smoothed=True)
    G += tail_gradient(spec, grid, Uk, smoothed=True)

    w = params.weights
    dU = np.diff(U, axis=0) / dt
    kin = np.sum(dU[:, grid.omega_idx] ** 2, axis=1) * grid.dx
    val = float(np.sum(w * (0.5 * kin + E / params.epsilon)))

    g = np.zeros_like(U)
    wk = (w[:, None] * dU) * (grid.dx / dt)
    g[:-1] -= wk
    g[1:] += wk
    g[:-1] += (w[:, None] / params.epsilon) * G
    g[0] = 0.0
    g[:, ~grid.omega_mask] = 0.0
    if not (np.isfinite(val) and np.isfinite(g).all()):
        raise NumericalError("non-finite value or gradient")
    return val, g


def grad_F(params: FunctionalParams, spec: KernelSpec, grid: SpaceGrid,
           traj: Trajectory) -> np.ndarray:
    """Exact gradient of the discrete functional with mu-smoothed densities."""
    return value_and_grad(params, spec, grid, traj.values, traj.dt)[1]


@dataclass
class Diagnostics:
    """Kinetic slice L, weighted slice G and exponential tail sum I at left endpoints."""

    times: np.ndarray          # (K,) left endpoints
    L: np.ndarray              # 0.5 * integral over Omega of |du/dt|^2
    G: np.ndarray              # L + energy/eps
    I: np.ndarray              # sum_{m>=k} w_m G_m
    monotone_margin: float     # min_k e^{t_k/eps} I_k - e^{t_{k+1}/eps} I_{k+1}

    def __post_init__(self):
        if not (np.isfinite(self.L).all() and np.isfinite(self.G).all()
                and np.isfinite(self.I).all()):
            raise NumericalError("non-finite diagnostics")
        if (self.L < 0).any() or (self.G < 0).any() or (self.I < 0).any():
            raise NumericalError("negative diagnostics entry")


def diagnostics(params: FunctionalParams, spec: KernelSpec, grid: SpaceGrid,
                traj: Trajectory) -> Diagnostics:
    """Raw-density diagnostic tables; I[0] equals the (unsmoothed) functional value."""
    U = traj.values
    K = traj.n_steps
    kin = _kinetic_slabs(grid, U, traj.dt)
    E = slice_energies(spec, grid, U[:K], smoothed=False)
    L = 0.5 * kin
    G = L + E / params.epsilon
    I = np.cumsum((params.weights * G)[::-1])[::-1]
    tk = np.arange(K) * traj.dt
    expI = np.exp(tk / params.epsilon) * I
    margin = float(np.min(expI[:-1] - expI[1:]))
    return Diagnostics(tk, L, G, I, margin)
