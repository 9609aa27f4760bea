"""Cross-backend agreement: the compiled kernels must match the numpy reference."""

import numpy as np
import pytest

from nlwide import _pairops_py as ref
from nlwide import backend


def _random_pair_problem(rng, n_slices=7, m=24, n_pairs=150):
    U = rng.normal(size=(n_slices, m))
    ii = rng.integers(0, m - 1, n_pairs).astype(np.int64)
    jj = (ii + rng.integers(1, m - ii.max(), n_pairs).astype(np.int64)).clip(max=m - 1)
    jj = np.where(jj == ii, ii + 1, jj).astype(np.int64)
    dist = rng.uniform(0.05, 3.0, n_pairs)
    inv_s = dist**-0.5
    inv_r = dist**-0.25
    a = rng.uniform(0.0, 2.0, n_pairs)
    wq = 2.0 * 0.01 / dist
    return U, ii, jj, inv_s, inv_r, a, wq


CASES = [
    (ref.PURE, 2.0, 2.0, 0.0),
    (ref.PURE, 3.0, 3.0, 0.0),
    (ref.PURE, 1.5, 1.5, 0.1),
    (ref.DOUBLE, 2.0, 4.0, 0.0),
    (ref.DOUBLE, 2.0, 3.0, 0.05),
    (ref.LOG, 2.0, 2.0, 0.0),
    (ref.LOG, 2.0, 2.0, 0.2),
]


@pytest.mark.skipif(not backend.COMPILED, reason="compiled extension not built")
@pytest.mark.parametrize("code,p,q,mu", CASES)
def test_energy_matches_reference(code, p, q, mu, rng):
    args = _random_pair_problem(rng)
    e_ref = ref.traj_energy(code, p, q, mu, *args)
    e_cmp = backend.traj_energy(code, p, q, mu, *args)
    assert np.allclose(e_cmp, e_ref, rtol=1e-12, atol=1e-14)


@pytest.mark.skipif(not backend.COMPILED, reason="compiled extension not built")
@pytest.mark.parametrize("code,p,q,mu", CASES)
def test_gradient_matches_reference(code, p, q, mu, rng):
    args = _random_pair_problem(rng)
    e_ref, g_ref = ref.traj_energy_grad(code, p, q, mu, *args)
    e_cmp, g_cmp = backend.traj_energy_grad(code, p, q, mu, *args)
    assert np.allclose(e_cmp, e_ref, rtol=1e-12, atol=1e-14)
    scale = np.abs(g_ref).max() + 1.0
    assert np.abs(g_cmp - g_ref).max() <= 1e-12 * scale
