import numpy as np
import pytest

from nlwide.config import make_datum, parse_config
from nlwide.grid import build_grid, make_problem
from nlwide.kernels import KernelSpec, Variant, a_constant, builtin_specs
from nlwide.optimize import SolveOptions


@pytest.fixture(scope="session")
def specs():
    return builtin_specs()


@pytest.fixture()
def pure_p2():
    return KernelSpec(Variant.PURE_PHASE, p=2.0, s=0.5)


@pytest.fixture()
def small_problem(pure_p2):
    """M=16 grid with the ramp datum, small enough for brute-force oracles."""
    grid, _ = build_grid(R=1.0, M=16, K=4, T=1.0)
    u0 = np.clip(grid.points, 0.0, 1.0)
    return make_problem(pure_p2, grid, u0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def make_variant_specs(mu_small: float = 0.0):
    """The built-ins plus a p<2 smoothed pure-phase instance."""
    out = dict(builtin_specs())
    out["pure-p1.5-mu"] = KernelSpec(Variant.PURE_PHASE, p=1.5, s=0.5, mu=0.1)
    return out


@pytest.fixture()
def fast_opts():
    return SolveOptions(grad_tol=1e-7, max_iters=2000)
