"""Kernel densities H(x, y, xi), their xi-derivatives, and structure checks.

Three built-in variants are supported, all convex and even in xi:

* pure phase      ``(|xi| / |x-y|^s)^p``
* double phase    ``(|xi| / |x-y|^s)^p + a(x,y) (|xi| / |x-y|^r)^q``
* log phase       ``(|xi| / |x-y|^s)^p log(1 + |xi| / |x-y|^s)``

The smoothed evaluation replaces |xi| with sqrt(xi^2 + mu^2 |x-y|^(2s))
inside each power (scale-matched so the smoothed density remains a function
of the homogeneous ratio z = |xi| / |x-y|^s) and subtracts the xi = 0
baseline so H(x, y, 0) = 0 holds for every mu.
"""

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import _pairops_py as ops


class Variant(enum.Enum):
    PURE_PHASE = "pure-phase"
    DOUBLE_PHASE = "double-phase"
    LOG_PHASE = "log-phase"


_VARIANT_CODE = {
    Variant.PURE_PHASE: ops.PURE,
    Variant.DOUBLE_PHASE: ops.DOUBLE,
    Variant.LOG_PHASE: ops.LOG,
}


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the integrand density.

    ``a_tail`` is the value the modulating coefficient takes when either
    point lies beyond the truncated grid; it is nonzero only when the
    coefficient is constant out there (used by the tail correction).
    """

    variant: Variant
    p: float
    s: float
    q: Optional[float] = None
    r: Optional[float] = None
    a_coeff: Optional[Callable[[float, float], float]] = None
    a_tail: float = 0.0
    mu: float = 0.0
    A_lower: float = 1.0

    def __post_init__(self):
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"s must lie in (0,1), got {self.s}")
        if self.mu < 0.0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.A_lower <= 0.0:
            raise ValueError(f"A_lower must be positive, got {self.A_lower}")
        if self.variant is Variant.DOUBLE_PHASE:
            if self.q is None or self.r is None or self.a_coeff is None:
                raise ValueError("double-phase requires q, r and a_coeff")
            if self.q < self.p:
                raise ValueError(f"q must be >= p, got q={self.q} < p={self.p}")
            if not (0.0 < self.r < 1.0):
                raise ValueError(f"r must lie in (0,1), got {self.r}")
        if self.a_tail < 0.0:
            raise ValueError("a_tail must be nonnegative")

    @property
    def code(self) -> int:
        return _VARIANT_CODE[self.variant]

    @property
    def q_or_p(self) -> float:
        return self.p if self.q is None else self.q

    def with_mu(self, mu: float) -> "KernelSpec":
        return replace(self, mu=mu)

    def smooth_everywhere(self) -> bool:
        """True when the raw density is C^1, so mu = 0 is safe for gradients."""
        qs = self.q_or_p
        return self.p >= 2.0 and qs >= 2.0


def _check_point_args(x, y, xi):
    for name, v in (("x", x), ("y", y), ("xi", xi)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite argument {name}={v}")
    if x == y:
        raise ValueError(f"coincident points x = y = {x}")


def _pair_arrays(spec: KernelSpec, x: float, y: float):
    d = abs(x - y)
    inv_s = d**-spec.s
    inv_r = d**-spec.r if spec.r is not None else inv_s
    a = float(spec.a_coeff(x, y)) if spec.a_coeff is not None else 0.0
    return inv_s, inv_r, a


def eval_H(spec: KernelSpec, x: float, y: float, xi: float) -> float:
    """Raw (unsmoothed) density at one point pair; symmetric under (x,y,xi) -> (y,x,-xi)."""
    _check_point_args(x, y, xi)
    inv_s, inv_r, a = _pair_arrays(spec, x, y)
    q = spec.q if spec.q is not None else spec.p
    return float(ops.hval(spec.code, spec.p, q, 0.0, np.float64(xi), inv_s, inv_r, a))


def eval_H_smoothed(spec: KernelSpec, x: float, y: float, xi: float) -> float:
    """Density with the spec's mu-smoothing applied (equals eval_H when mu=0)."""
    _check_point_args(x, y, xi)
    inv_s, inv_r, a = _pair_arrays(spec, x, y)
    q = spec.q if spec.q is not None else spec.p
    return float(ops.hval(spec.code, spec.p, q, spec.mu, np.float64(xi), inv_s, inv_r, a))


def eval_dH(spec: KernelSpec, x: float, y: float, xi: float) -> float:
    """xi-derivative of the smoothed density; exact derivative when mu=0 and xi != 0."""
    _check_point_args(x, y, xi)
    inv_s, inv_r, a = _pair_arrays(spec, x, y)
    q = spec.q if spec.q is not None else spec.p
    return float(ops.hder(spec.code, spec.p, q, spec.mu, np.float64(xi), inv_s, inv_r, a))


def coercivity_profile(spec: KernelSpec, x: float, y: float, xi: float) -> float:
    """Lower-bound comparison density for the structure check.

    Pure and double phase dominate z^p exactly.  The log-phase density is
    squeezed between z^p and z^(p+1) near zero, so no single power bounds it
    from below; log(1+z) >= z/(1+z) gives the sharp profile z^(p+1)/(1+z),
    which holds with constant 1 for all z.
    """
    z = abs(xi) * abs(x - y) ** -spec.s
    if spec.variant is Variant.LOG_PHASE:
        return z ** (spec.p + 1.0) / (1.0 + z)
    return z**spec.p


@dataclass
class StructureReport:
    ok_lower: bool
    ok_convex: bool
    lower_margin: float
    convex_margin: float
    n_checked: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.ok_lower and self.ok_convex


def check_structure(spec: KernelSpec, sample_pairs, xi_grid, tol: float = 1e-12) -> StructureReport:
    """Scan the lower bound and midpoint convexity in xi on the given samples.

    Violations are reported, never raised: the report carries the worst
    margins (negative margin = violation beyond ``tol`` times the local scale).
    """
    if len(sample_pairs) == 0 or len(xi_grid) == 0:
        raise ValueError("check_structure needs nonempty samples")
    xi_grid = np.asarray(xi_grid, dtype=float)
    lower_margin = math.inf
    convex_margin = math.inf
    failures = []
    n = 0
    for x, y in sample_pairs:
        _check_point_args(x, y, 0.0)
        hvals = np.array([eval_H(spec, x, y, xi) for xi in xi_grid])
        profile = np.array([coercivity_profile(spec, x, y, xi) for xi in xi_grid])
        margins = hvals - spec.A_lower * profile
        worst = margins.min()
        lower_margin = min(lower_margin, worst)
        scale = 1.0 + np.abs(hvals).max()
        if worst < -tol * scale:
            failures.append(("lower", x, y, float(xi_grid[margins.argmin()]), float(worst)))
        # midpoint convexity over every xi pair from the grid
        mids = 0.5 * (xi_grid[:, None] + xi_grid[None, :])
        hmid = np.array(
            [[eval_H(spec, x, y, m) for m in row] for row in mids]
        )
        avg = 0.5 * (hvals[:, None] + hvals[None, :])
        cmargins = avg - hmid
        cworst = cmargins.min()
        convex_margin = min(convex_margin, cworst)
        if cworst < -tol * scale:
            i, j = np.unravel_index(cmargins.argmin(), cmargins.shape)
            failures.append(("convexity", x, y, (float(xi_grid[i]), float(xi_grid[j])), float(cworst)))
        n += 1
    ok_lower = not any(f[0] == "lower" for f in failures)
    ok_convex = not any(f[0] == "convexity" for f in failures)
    return StructureReport(ok_lower, ok_convex, float(lower_margin), float(convex_margin), n, failures)


# --- built-in modulating coefficients -------------------------------------


def a_constant(value: float = 1.0) -> Callable[[float, float], float]:
    def a(x, y):
        return value

    return a


def a_checkerboard(x: float, y: float) -> float:
    return 1.0 if (math.floor(2 * x) + math.floor(2 * y)) % 2 == 0 else 0.0


def a_ramp(x: float, y: float) -> float:
    return 0.5 * (min(max(x, 0.0), 1.0) + min(max(y, 0.0), 1.0))


def builtin_specs() -> dict:
    """The strictly convex specs exercised by the acceptance suite."""
    return {
        "pure-p2": KernelSpec(Variant.PURE_PHASE, p=2.0, s=0.5),
        "pure-p3": KernelSpec(Variant.PURE_PHASE, p=3.0, s=0.5),
        "double-p2q4": KernelSpec(
            Variant.DOUBLE_PHASE, p=2.0, s=0.5, q=4.0, r=0.5,
            a_coeff=a_constant(1.0), a_tail=1.0,
        ),
        "log-p2": KernelSpec(Variant.LOG_PHASE, p=2.0, s=0.5),
    }
