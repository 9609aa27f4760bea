"""Truncated 1-D grid, pair set, discrete energies, norms and the Poincare constant.

The spatial domain is Omega = (0, 1) embedded in the truncated line
[-R, 1+R]; grid endpoints falling exactly on 0 or 1 belong to the exterior
(open-interval mask).  The pair set C_Omega contains every unordered point
pair with at least one endpoint inside Omega; the energy doubles each term
to account for ordered pairs.  Exterior mass beyond the truncation box is
restored by a closed-form tail correction that assumes the datum is
constant out there.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _pairops_py as ops
from . import backend
from .errors import ConfigurationError, NumericalError
from .kernels import KernelSpec, Variant


@dataclass
class PairTables:
    """Per-spec arrays cached on the grid for the hot pair loops."""

    inv_s: np.ndarray  # dist^-s
    inv_r: np.ndarray  # dist^-r (double phase; else alias of inv_s)
    a: np.ndarray      # modulating coefficient per pair
    wq: np.ndarray     # quadrature weight 2*dx^2/dist per pair


class SpaceGrid:
    def __init__(self, points: np.ndarray, truncation_radius: float):
        self.points = np.asarray(points, dtype=float)
        self.truncation_radius = float(truncation_radius)
        dxs = np.diff(self.points)
        if len(self.points) < 2 or not np.all(dxs > 0):
            raise ConfigurationError("grid points must be strictly increasing")
        self.dx = float(dxs[0])
        self.omega_mask = (self.points > 0.0) & (self.points < 1.0)
        if not self.omega_mask.any():
            raise ConfigurationError("no grid points inside Omega=(0,1)")
        self.omega_idx = np.where(self.omega_mask)[0]
        ii, jj = np.triu_indices(len(self.points), k=1)
        keep = self.omega_mask[ii] | self.omega_mask[jj]
        self.pair_i = ii[keep].astype(np.int64)
        self.pair_j = jj[keep].astype(np.int64)
        self.pair_dist = np.abs(self.points[self.pair_i] - self.points[self.pair_j])
        # distances from each interior point to the truncation edges
        xo = self.points[self.omega_idx]
        self.edge_dist_left = xo + self.truncation_radius
        self.edge_dist_right = (1.0 + self.truncation_radius) - xo
        self._tables: dict = {}

    @property
    def n_points(self) -> int:
        return len(self.points)

    def tables(self, spec: KernelSpec) -> PairTables:
        cached = self._tables.get(spec)
        if cached is None:
            inv_s = self.pair_dist**-spec.s
            inv_r = self.pair_dist**-spec.r if spec.r is not None else inv_s
            if spec.a_coeff is not None:
                xi_, xj_ = self.points[self.pair_i], self.points[self.pair_j]
                a = np.array([spec.a_coeff(a_, b_) for a_, b_ in zip(xi_, xj_)])
                if (a < 0).any():
                    raise ConfigurationError("a_coeff must be nonnegative")
            else:
                a = np.zeros_like(inv_s)
            wq = 2.0 * self.dx * self.dx / self.pair_dist
            cached = PairTables(inv_s, inv_r, a, wq)
            self._tables[spec] = cached
        return cached


@dataclass
class Trajectory:
    """Space-time values u[k][i]; slice 0 and all exterior columns are frozen."""

    values: np.ndarray  # (K+1, M)
    dt: float
    grid: SpaceGrid

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.dt

    def free_mask(self) -> np.ndarray:
        mask = np.zeros(self.values.shape, dtype=bool)
        mask[1:, self.grid.omega_mask] = True
        return mask

    def copy(self) -> "Trajectory":
        return Trajectory(self.values.copy(), self.dt, self.grid)

    def validate(self, u0: Optional[np.ndarray] = None):
        if not np.isfinite(self.values).all():
            raise NumericalError("trajectory contains non-finite values")
        if u0 is not None:
            ext = ~self.grid.omega_mask
            if not np.array_equal(self.values[:, ext], np.tile(u0[ext], (self.values.shape[0], 1))):
                raise ConfigurationError("frozen exterior entries deviate from the datum")
            if not np.array_equal(self.values[0], u0):
                raise ConfigurationError("initial slice deviates from the datum")


@dataclass
class ProblemData:
    grid: SpaceGrid
    u0: np.ndarray
    lambda_disc: float  # discrete energy of the datum (computed, never configured)


def build_grid(R: float, M: int, K: int, T: float):
    """Uniform grid over [-R, 1+R] plus an empty trajectory of K steps on [0, T]."""
    if M < 8:
        raise ConfigurationError(f"M must be at least 8, got {M}")
    if K < 2:
        raise ConfigurationError(f"K must be at least 2, got {K}")
    if R < 1.0:
        raise ConfigurationError(f"R must be at least 1, got {R}")
    if T <= 0.0:
        raise ConfigurationError(f"T must be positive, got {T}")
    grid = SpaceGrid(np.linspace(-R, 1.0 + R, M), R)
    traj = Trajectory(np.zeros((K + 1, M)), T / K, grid)
    return grid, traj


def make_problem(spec: KernelSpec, grid: SpaceGrid, u0: np.ndarray) -> ProblemData:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (grid.n_points,):
        raise ConfigurationError("datum shape does not match the grid")
    if not np.isfinite(u0).all():
        raise ConfigurationError("datum contains non-finite values")
    lam = energy_slice(spec, grid, u0)
    return ProblemData(grid, u0, lam)


def extend_datum(problem: ProblemData, K: int, T: float) -> Trajectory:
    """Time-independent extension U(., t) = u0 as a trajectory."""
    vals = np.tile(problem.u0, (K + 1, 1))
    return Trajectory(vals, T / K, problem.grid)


# --- energies ---------------------------------------------------------------


def tail_corrections(spec: KernelSpec, grid: SpaceGrid, U: np.ndarray,
                     smoothed: bool = False) -> np.ndarray:
    """Tail energies of every row of U in one vectorized pass."""
    mu = spec.mu if smoothed else 0.0
    total = np.zeros(U.shape[0])
    for edge, d in ((0, grid.edge_dist_left), (-1, grid.edge_dist_right)):
        xi = U[:, grid.omega_idx] - U[:, [edge]]
        inv = d**-spec.s
        total += np.sum(ops.hval(ops.PURE, spec.p, spec.p, mu, xi, inv, inv, 0.0),
                        axis=1) * (grid.dx / (spec.s * spec.p))
        if spec.variant is Variant.DOUBLE_PHASE and spec.a_tail > 0.0:
            inv_r = d**-spec.r
            total += spec.a_tail * np.sum(
                ops.hval(ops.PURE, spec.q, spec.q, mu, xi, inv_r, inv_r, 0.0),
                axis=1) * (grid.dx / (spec.r * spec.q))
    return total


def tail_correction(spec: KernelSpec, grid: SpaceGrid, u_slice: np.ndarray,
                    smoothed: bool = False) -> float:
    """Closed-form energy of interactions with the constant exterior beyond the box.

    Per interior point and side: (edge distance)^(-sp)/(sp) * |u_i - c|^p * dx,
    with c read off the frozen edge samples of the slice.  The double-phase
    q-term is added when the coefficient is constant outside (spec.a_tail);
    the log-phase tail keeps only the p-power part, for which the integral
    has closed form.
    """
    return float(tail_corrections(spec, grid, np.asarray(u_slice, dtype=float)[None, :],
                                  smoothed=smoothed)[0])


def tail_gradient(spec: KernelSpec, grid: SpaceGrid, U: np.ndarray,
                  smoothed: bool = True) -> np.ndarray:
    """Gradient of the tail correction w.r.t. every slice of U (rows)."""
    mu = spec.mu if smoothed else 0.0
    grad = np.zeros_like(U)
    iw = grid.omega_idx
    for edge, d in ((0, grid.edge_dist_left), (-1, grid.edge_dist_right)):
        xi = U[:, iw] - U[:, [edge]]
        inv = d**-spec.s
        grad[:, iw] += ops.hder(ops.PURE, spec.p, spec.p, mu, xi, inv, inv, 0.0) * (
            grid.dx / (spec.s * spec.p)
        )
        if spec.variant is Variant.DOUBLE_PHASE and spec.a_tail > 0.0:
            inv_r = d**-spec.r
            grad[:, iw] += spec.a_tail * ops.hder(
                ops.PURE, spec.q, spec.q, mu, xi, inv_r, inv_r, 0.0
            ) * (grid.dx / (spec.r * spec.q))
    return grad


def energy_slice(spec: KernelSpec, grid: SpaceGrid, u_slice: np.ndarray,
                 smoothed: bool = False) -> float:
    """Discrete C_Omega energy of one slice: doubled pair sum plus tail correction."""
    u_slice = np.asarray(u_slice, dtype=float)
    t = grid.tables(spec)
    mu = spec.mu if smoothed else 0.0
    e = backend.traj_energy(
        spec.code, spec.p, spec.q_or_p, mu, u_slice[None, :],
        grid.pair_i, grid.pair_j, t.inv_s, t.inv_r, t.a, t.wq,
    )[0]
    e += tail_correction(spec, grid, u_slice, smoothed=smoothed)
    if not math.isfinite(e):
        xi = u_slice[grid.pair_i] - u_slice[grid.pair_j]
        hv = ops.hval(spec.code, spec.p, spec.q_or_p, mu, xi, t.inv_s, t.inv_r, t.a)
        bad = np.where(~np.isfinite(hv))[0]
        where = f" at pair index {bad[0]}" if len(bad) else ""
        raise NumericalError(f"non-finite slice energy{where}")
    return float(e)


def slice_energies(spec: KernelSpec, grid: SpaceGrid, U: np.ndarray,
                   smoothed: bool = False) -> np.ndarray:
    """energy_slice applied to every row of U in one fused pass."""
    U = np.ascontiguousarray(U, dtype=float)
    t = grid.tables(spec)
    mu = spec.mu if smoothed else 0.0
    e = backend.traj_energy(
        spec.code, spec.p, spec.q_or_p, mu, U,
        grid.pair_i, grid.pair_j, t.inv_s, t.inv_r, t.a, t.wq,
    )
    e += tail_corrections(spec, grid, U, smoothed=smoothed)
    if not np.isfinite(e).all():
        raise NumericalError(f"non-finite energy at slice {int(np.where(~np.isfinite(e))[0][0])}")
    return e


# --- norms and the Poincare constant ----------------------------------------


@dataclass
class NormsRecord:
    lp_norm: float
    gagliardo_seminorm: float
    sobolev_norm: float


def _all_pairs(grid: SpaceGrid):
    ii, jj = np.triu_indices(grid.n_points, k=1)
    d = np.abs(grid.points[ii] - grid.points[jj])
    return ii, jj, d


def discrete_norms(grid: SpaceGrid, u_slice: np.ndarray, p: float, s: float) -> NormsRecord:
    """L^p norm, Gagliardo seminorm over all grid pairs, and their sum."""
    u = np.asarray(u_slice, dtype=float)
    lp = float(np.sum(np.abs(u) ** p) * grid.dx) ** (1.0 / p)
    ii, jj, d = _all_pairs(grid)
    semi_p = 2.0 * np.sum(np.abs(u[ii] - u[jj]) ** p / d ** (1.0 + s * p)) * grid.dx**2
    semi = float(semi_p) ** (1.0 / p)
    return NormsRecord(lp, semi, lp + semi)


@dataclass
class PoincareResult:
    constant: float
    rayleigh: float
    iterations: int
    converged: bool


def estimate_poincare(grid: SpaceGrid, p: float, s: float, iterations: int = 500,
                      rel_tol: float = 1e-10) -> PoincareResult:
    """Smallest C with ||u||_p^p <= C [u]^p over u vanishing outside Omega.

    Minimizes the Rayleigh ratio [u]^p / ||u||_p^p by projected gradient
    descent with backtracking, normalizing each accepted iterate.  For p = 2
    this converges to 1/lambda_min of the discrete form matrix (the dense
    eigensolve is the test oracle).
    """
    if p < 2:
        raise ConfigurationError("estimate_poincare requires p >= 2")
    if iterations < 100:
        raise ConfigurationError("iterations must be at least 100")
    ii, jj, d = _all_pairs(grid)
    w = 2.0 * grid.dx**2 / d ** (1.0 + s * p)
    iw = grid.omega_idx
    m = grid.n_points

    def seminorm_p(ufull):
        xi = ufull[ii] - ufull[jj]
        return float(np.sum(w * np.abs(xi) ** p))

    def seminorm_grad(ufull):
        xi = ufull[ii] - ufull[jj]
        c = w * p * np.abs(xi) ** (p - 2.0) * xi
        g = np.bincount(ii, weights=c, minlength=m) - np.bincount(jj, weights=c, minlength=m)
        return g

    u = np.zeros(m)
    u[iw] = np.sin(np.pi * (grid.points[iw] - grid.points[iw][0] + grid.dx)
                   / (grid.points[iw][-1] - grid.points[iw][0] + 2 * grid.dx))

    def norm_p(ufull):
        return float(np.sum(np.abs(ufull[iw]) ** p) * grid.dx)

    u /= norm_p(u) ** (1.0 / p)
    rho = seminorm_p(u)
    step = 1.0 / max(rho, 1.0)
    converged = False
    it = 0
    for it in range(1, iterations + 1):
        gS = seminorm_grad(u)
        gN = np.zeros(m)
        gN[iw] = p * np.abs(u[iw]) ** (p - 2.0) * u[iw] * grid.dx
        # gradient of the ratio at ||u||_p = 1
        g = gS - rho * gN
        g[~grid.omega_mask] = 0.0
        gnorm = float(np.abs(g).max())
        if gnorm <= rel_tol * (1.0 + rho):
            converged = True
            break
        rho_new = rho
        for _ in range(60):
            cand = u - step * g
            cand[~grid.omega_mask] = 0.0
            nrm = norm_p(cand)
            if nrm > 0:
                cand /= nrm ** (1.0 / p)
                rho_new = seminorm_p(cand)
                if rho_new < rho:
                    break
            step *= 0.5
        if rho_new >= rho:
            converged = True  # no descent direction left at fp resolution
            break
        u, rho = cand, rho_new
        step *= 1.5
    return PoincareResult(1.0 / rho, rho, it, converged)


def poincare_constant_p2(grid: SpaceGrid, s: float) -> float:
    """1/lambda_min of the zero-exterior quadratic seminorm form (p=2 cross-check)."""
    import scipy.linalg as la

    ii, jj, d = _all_pairs(grid)
    w = 2.0 * grid.dx**2 / d ** (1.0 + 2.0 * s)
    m = grid.n_points
    S = np.zeros((m, m))
    np.add.at(S, (ii, ii), w)
    np.add.at(S, (jj, jj), w)
    np.add.at(S, (ii, jj), -w)
    np.add.at(S, (jj, ii), -w)
    iw = grid.omega_idx
    lam_min = la.eigh(S[np.ix_(iw, iw)] / grid.dx, eigvals_only=True)[0]
    return 1.0 / float(lam_min)


# --- small L^2 helpers used across modules ----------------------------------


def l2_omega_sq(grid: SpaceGrid, v: np.ndarray) -> float:
    """Squared L^2(Omega) norm of one slice."""
    return float(np.sum(v[grid.omega_idx] ** 2) * grid.dx)


def traj_l2_sq(grid: SpaceGrid, dt: float, V: np.ndarray) -> float:
    """Squared L^2(Omega x (0,T)) norm with trapezoidal time quadrature."""
    ct = np.full(V.shape[0], dt)
    ct[0] = ct[-1] = 0.5 * dt
    sl = np.sum(V[:, grid.omega_idx] ** 2, axis=1) * grid.dx
    return float(np.sum(ct * sl))
