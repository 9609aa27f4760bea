"""Select the compiled pair-kernel backend, falling back to pure numpy.

The compiled Cython extension is optional: building the package with Cython
available produces ``nlwide._pairops``; without it everything still works on
the numpy code path, just slower.  ``benchmarks/bench_kernels.py`` compares
the two.
"""

from . import _pairops_py

try:
    from . import _pairops as _impl

    COMPILED = True
except ImportError:  # extension not built
    _impl = _pairops_py
    COMPILED = False

PURE = _pairops_py.PURE
DOUBLE = _pairops_py.DOUBLE
LOG = _pairops_py.LOG

traj_energy = _impl.traj_energy
traj_energy_grad = _impl.traj_energy_grad


def backend_name():
    return "compiled" if COMPILED else "numpy"
