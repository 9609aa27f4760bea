"""Run configuration: a strict flat-section key/value format with full validation.

The document format is INI-like: ``[section]`` headers, ``key = value``
lines, ``#`` comments.  Ladders (epsilon, mu) are space-separated scalar
lists.  Parsing reports *every* violation with line/column positions, not
just the first.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .driver import HORIZON_FACTOR
from .errors import ConfigurationError
from .kernels import KernelSpec, Variant, a_checkerboard, a_constant, a_ramp
from .optimize import SolveOptions


class ConfigParseError(ConfigurationError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(self.violations))


_KNOWN = {
    "kernel": {"variant", "p", "s", "q", "r", "a_coeff"},
    "grid": {"M", "K", "R", "T", "datum"},
    "solver": {"grad_tol", "max_iters", "mu_ladder", "eps_ladder", "seed"},
    "output": {"directory"},
}

_DEFAULT_EPS = (0.2, 0.1, 0.05, 0.025)


@dataclass
class RunConfig:
    variant: Variant = Variant.PURE_PHASE
    p: float = 2.0
    s: float = 0.5
    q: Optional[float] = None
    r: Optional[float] = None
    a_coeff: str = "constant"
    M: int = 64
    K: int = 64
    R: float = 1.0
    T: Optional[float] = None          # defaults to 18.4 * max(eps_ladder)
    datum: str = "ramp"
    grad_tol: float = 1e-7
    max_iters: int = 4000
    mu_ladder: tuple = (0.0,)
    eps_ladder: tuple = _DEFAULT_EPS
    seed: int = 0
    directory: str = "out"
    raw_lines: list = field(default_factory=list, repr=False)

    @property
    def horizon(self) -> float:
        return self.T if self.T is not None else HORIZON_FACTOR * self.eps_ladder[0]

    def echo_items(self):
        """Flat key=value view of the effective configuration."""
        return [
            ("kernel.variant", self.variant.value),
            ("kernel.p", self.p),
            ("kernel.s", self.s),
            ("kernel.q", "" if self.q is None else self.q),
            ("kernel.r", "" if self.r is None else self.r),
            ("kernel.a_coeff", self.a_coeff),
            ("grid.M", self.M),
            ("grid.K", self.K),
            ("grid.R", self.R),
            ("grid.T", self.horizon),
            ("grid.datum", self.datum),
            ("solver.grad_tol", self.grad_tol),
            ("solver.max_iters", self.max_iters),
            ("solver.mu_ladder", " ".join(repr(m) for m in self.mu_ladder)),
            ("solver.eps_ladder", " ".join(repr(e) for e in self.eps_ladder)),
            ("solver.seed", self.seed),
            ("output.directory", self.directory),
        ]


def _scan(text: str, violations):
    """Tokenize into {(section, key): (value, line, col)} with syntax checks."""
    entries = {}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = raw.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                violations.append(f"line {ln}, col {col}: unterminated section header")
                continue
            section = stripped[1:-1].strip()
            if section not in _KNOWN:
                violations.append(f"line {ln}, col {col}: unknown section [{section}]")
                section = None
            continue
        if "=" not in stripped:
            violations.append(f"line {ln}, col {col}: expected 'key = value'")
            continue
        if section is None:
            violations.append(f"line {ln}, col {col}: entry outside any known section")
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN[section]:
            violations.append(f"line {ln}, col {col}: unknown key '{key}' in [{section}]")
            continue
        if (section, key) in entries:
            violations.append(f"line {ln}, col {col}: duplicate key '{key}'")
            continue
        entries[(section, key)] = (value, ln, col)
    return entries


def _get(entries, violations, section, key, conv, default, check=None):
    item = entries.pop((section, key), None)
    if item is None:
        return default
    value, ln, col = item
    try:
        out = conv(value)
    except Exception:
        violations.append(f"line {ln}, col {col}: cannot parse {section}.{key} = {value!r}")
        return default
    if check is not None:
        msg = check(out)
        if msg:
            violations.append(f"line {ln}, col {col}: {msg}")
            return default
    return out


def _floats(value: str):
    return tuple(float(tok) for tok in value.split())


def parse_config(text: str) -> RunConfig:
    violations: list = []
    entries = _scan(text, violations)

    variant = _get(entries, violations, "kernel", "variant",
                   lambda v: Variant(v), Variant.PURE_PHASE)
    p = _get(entries, violations, "kernel", "p", float, 2.0,
             lambda v: None if v > 1.0 else "p must exceed 1")
    s = _get(entries, violations, "kernel", "s", float, 0.5,
             lambda v: None if 0.0 < v < 1.0 else "s must lie in (0,1)")
    q = _get(entries, violations, "kernel", "q", float, None)
    r = _get(entries, violations, "kernel", "r", float, None,
             lambda v: None if 0.0 < v < 1.0 else "r must lie in (0,1)")
    a_name = _get(entries, violations, "kernel", "a_coeff", str, "constant",
                  lambda v: None if v in ("constant", "checkerboard", "ramp")
                  else "a_coeff must be one of constant|checkerboard|ramp")

    M = _get(entries, violations, "grid", "M", int, 64,
             lambda v: None if v >= 8 else "M must be at least 8")
    K = _get(entries, violations, "grid", "K", int, 64,
             lambda v: None if v >= 2 else "K must be at least 2")
    R = _get(entries, violations, "grid", "R", float, 1.0,
             lambda v: None if v >= 1.0 else "R must be at least 1")
    T = _get(entries, violations, "grid", "T", float, None,
             lambda v: None if v > 0 else "T must be positive")
    datum = _get(entries, violations, "grid", "datum", str, "ramp",
                 lambda v: None if v in ("ramp", "bump", "constant")
                 else "datum must be one of ramp|bump|constant")

    grad_tol = _get(entries, violations, "solver", "grad_tol", float, 1e-7,
                    lambda v: None if v > 0 else "grad_tol must be positive")
    max_iters = _get(entries, violations, "solver", "max_iters", int, 4000,
                     lambda v: None if v >= 1 else "max_iters must be at least 1")
    mu_ladder = _get(entries, violations, "solver", "mu_ladder", _floats, (0.0,))
    eps_ladder = _get(entries, violations, "solver", "eps_ladder", _floats, _DEFAULT_EPS)
    seed = _get(entries, violations, "solver", "seed", int, 0,
                lambda v: None if v >= 0 else "seed must be nonnegative")
    directory = _get(entries, violations, "output", "directory", str, "out")

    # cross-field constraints
    if variant is Variant.DOUBLE_PHASE:
        if q is None:
            violations.append("double-phase requires kernel.q")
        elif q < p:
            violations.append(f"q must be at least p (q={q} < p={p})")
        if r is None:
            violations.append("double-phase requires kernel.r")
    else:
        if q is not None:
            violations.append("kernel.q is only valid for the double-phase variant")
        if r is not None:
            violations.append("kernel.r is only valid for the double-phase variant")
    if len(eps_ladder) < 3:
        violations.append("eps_ladder needs at least 3 rungs")
    if not all(a > b > 0 for a, b in zip(eps_ladder, eps_ladder[1:])) or \
            (eps_ladder and eps_ladder[0] <= 0):
        violations.append("eps_ladder must be positive and strictly decreasing")
    if len(mu_ladder) == 0:
        violations.append("mu_ladder must be nonempty")
    elif any(m < 0 for m in mu_ladder):
        violations.append("mu_ladder entries must be nonnegative")
    elif len(mu_ladder) > 1 and not all(a > b for a, b in zip(mu_ladder, mu_ladder[1:])):
        violations.append("mu_ladder must be strictly decreasing")
    needs_mu = p < 2.0 or (variant is Variant.DOUBLE_PHASE and q is not None and q < 2.0)
    if needs_mu and mu_ladder and mu_ladder[-1] <= 0:
        violations.append("p < 2 (or q < 2) requires a positive final mu")
    if T is not None and eps_ladder and T < HORIZON_FACTOR * eps_ladder[0]:
        violations.append(
            f"T={T} violates the horizon rule T >= {HORIZON_FACTOR} * max eps "
            f"= {HORIZON_FACTOR * eps_ladder[0]:g}")

    if violations:
        raise ConfigParseError(violations)
    return RunConfig(variant, p, s, q, r, a_name, M, K, R, T, datum,
                     grad_tol, max_iters, tuple(mu_ladder), tuple(eps_ladder),
                     seed, directory, text.splitlines())


_A_BUILDERS = {
    "constant": lambda: (a_constant(1.0), 1.0),
    "checkerboard": lambda: (a_checkerboard, 0.0),
    "ramp": lambda: (a_ramp, 0.0),
}


def make_spec(cfg: RunConfig) -> KernelSpec:
    a_coeff = a_tail = None
    if cfg.variant is Variant.DOUBLE_PHASE:
        a_coeff, a_tail = _A_BUILDERS[cfg.a_coeff]()
        return KernelSpec(cfg.variant, cfg.p, cfg.s, cfg.q, cfg.r,
                          a_coeff, a_tail, mu=cfg.mu_ladder[-1])
    return KernelSpec(cfg.variant, cfg.p, cfg.s, mu=cfg.mu_ladder[-1])


def make_datum(cfg: RunConfig, points: np.ndarray) -> np.ndarray:
    if cfg.datum == "ramp":
        return np.clip(points, 0.0, 1.0)
    if cfg.datum == "bump":
        inside = (points > 0.0) & (points < 1.0)
        return np.where(inside, np.sin(np.pi * np.clip(points, 0.0, 1.0)) ** 2, 0.0)
    if cfg.datum == "constant":
        return np.ones_like(points)
    raise ConfigurationError(f"unknown datum {cfg.datum!r}")


def make_options(cfg: RunConfig, seed: Optional[int] = None) -> SolveOptions:
    return SolveOptions(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters,
                        mu_schedule=tuple(cfg.mu_ladder),
                        seed=cfg.seed if seed is None else seed)
