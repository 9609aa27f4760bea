"""Pure-numpy implementation of the hot pair-interaction kernels.

The compiled extension ``nlwide._pairops`` mirrors ``traj_energy`` and
``traj_energy_grad`` exactly; ``backend`` selects whichever is importable.
Everything here is also the reference used by the cross-backend tests: the
compiled kernels must agree with these functions to 1e-12 relative.

Densities are evaluated in smoothed form, with |xi| replaced by
sqrt(xi^2 + mu^2 * dist^(2s)) inside each power and the xi=0 baseline
subtracted so that H(x, y, 0) = 0 for every mu.  mu = 0 reproduces the raw
density.
"""

import numpy as np

PURE, DOUBLE, LOG = 0, 1, 2


def hval(code, p, q, mu, xi, inv_s, inv_r, a):
    """Smoothed density over broadcastable arrays; mu=0 gives the raw density."""
    m2 = mu * mu
    b = (xi * inv_s) ** 2 + m2
    if code == PURE:
        return np.power(b, 0.5 * p) - mu**p
    if code == DOUBLE:
        br = (xi * inv_r) ** 2 + m2
        return (
            np.power(b, 0.5 * p)
            - mu**p
            + a * (np.power(br, 0.5 * q) - mu**q)
        )
    if code == LOG:
        zm = np.sqrt(b)
        return np.power(zm, p) * np.log1p(zm) - mu**p * np.log1p(mu)
    raise ValueError(f"unknown variant code {code}")


def hder(code, p, q, mu, xi, inv_s, inv_r, a):
    """d/dxi of the smoothed density; odd in xi, zero where the base vanishes."""
    m2 = mu * mu
    b = (xi * inv_s) ** 2 + m2
    with np.errstate(divide="ignore", invalid="ignore"):
        if code == PURE:
            out = p * np.power(b, 0.5 * p - 1.0) * xi * inv_s**2
        elif code == DOUBLE:
            # b == 0 iff (xi == 0 and mu == 0) iff br == 0, so one guard covers both
            br = (xi * inv_r) ** 2 + m2
            out = p * np.power(b, 0.5 * p - 1.0) * xi * inv_s**2 + a * (
                q * np.power(br, 0.5 * q - 1.0) * xi * inv_r**2
            )
        else:
            zm = np.sqrt(b)
            out = (
                p * np.power(zm, p - 2.0) * np.log1p(zm)
                + np.power(zm, p - 1.0) / (1.0 + zm)
            ) * xi * inv_s**2
    return np.where(b > 0.0, out, 0.0)


def traj_energy(code, p, q, mu, U, ii, jj, inv_s, inv_r, a, wq):
    """Per-slice pair energy sum(wq * H(u_i - u_j)) for every row of U."""
    xi = U[:, ii] - U[:, jj]
    return np.sum(wq * hval(code, p, q, mu, xi, inv_s, inv_r, a), axis=1)


def traj_energy_grad(code, p, q, mu, U, ii, jj, inv_s, inv_r, a, wq):
    """Per-slice pair energies plus the gradient of each w.r.t. its slice values."""
    n_slices, m = U.shape
    xi = U[:, ii] - U[:, jj]
    energies = np.sum(wq * hval(code, p, q, mu, xi, inv_s, inv_r, a), axis=1)
    contrib = wq * hder(code, p, q, mu, xi, inv_s, inv_r, a)
    grad = np.empty_like(U)
    for k in range(n_slices):
        grad[k] = np.bincount(ii, weights=contrib[k], minlength=m) - np.bincount(
            jj, weights=contrib[k], minlength=m
        )
    return energies, grad
