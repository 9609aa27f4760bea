"""Command-line orchestration and deterministic result export.

Subcommands: solve, verify, compare-weak, mollify-demo, poincare.  All
numeric output is printed with 17 significant digits so doubles round-trip
through the text artifacts; identical config and seed reproduce every file
byte for byte.

Exit codes: 0 all enabled checks pass, 1 configuration error,
2 I/O or missing artifact, 3 check failure.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import __version__
from .backend import backend_name
from .config import (ConfigParseError, RunConfig, make_datum, make_options,
                     make_spec, parse_config)
from .driver import run_ladder
from .errors import ConfigurationError, NumericalError
from .grid import (Trajectory, build_grid, estimate_poincare, make_problem,
                   poincare_constant_p2)
from .kernels import Variant
from .mollify import mollifier_convergence
from .stepping import implicit_euler_solve
from .verify import (compare_weak, corrupt_trajectory, parabolic_battery,
                     spectral_oracle_p2, vi_battery)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _write_manifest(path: str, items):
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key} = {_fmt(value)}\n")


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_trajectory(path: str, traj: Trajectory):
    """One time slice per block of delimited text, blocks separated by blank lines."""
    with open(path, "w") as fh:
        fh.write(f"# nlwide trajectory: {traj.values.shape[0]} slices, "
                 f"{traj.values.shape[1]} points, dt = {_fmt(traj.dt)}\n")
        for k in range(traj.values.shape[0]):
            fh.write(" ".join("%.17g" % v for v in traj.values[k]))
            fh.write("\n\n")


def read_trajectory(path: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path))


def _setup(cfg: RunConfig, seed):
    spec = make_spec(cfg)
    grid, _ = build_grid(cfg.R, cfg.M, cfg.K, cfg.horizon)
    u0 = make_datum(cfg, grid.points)
    problem = make_problem(spec, grid, u0)
    opts = make_options(cfg, seed)
    return spec, grid, problem, opts


def _config_items(cfg: RunConfig, seed, command):
    items = [("run.command", command), ("run.version", __version__),
             ("run.backend", backend_name()), ("run.seed", seed)]
    items += [(f"config.{k}", v) for k, v in cfg.echo_items()]
    return items


def _cmd_solve(cfg: RunConfig, outdir: str, seed: int) -> int:
    spec, grid, problem, opts = _setup(cfg, seed)
    result = run_ladder(cfg.eps_ladder, problem, spec, cfg.K, opts, T=cfg.horizon)
    write_trajectory(os.path.join(outdir, "solution.txt"), result.limit)

    diag = result.rungs[-1].diagnostics
    expI = np.exp(diag.times / cfg.eps_ladder[-1]) * diag.I
    _write_csv(os.path.join(outdir, "diagnostics.csv"),
               ["t", "L", "G", "I", "expI"],
               zip(diag.times, diag.L, diag.G, diag.I, expI))

    rows = []
    for rec in result.rungs:
        rows.append([rec.epsilon, rec.F_value, rec.F_bound, rec.weighted_kinetic,
                     rec.weighted_potential, rec.unweighted_kinetic, rec.mono_margin,
                     rec.slab_worst_mean, rec.slab_checked, rec.optimizer_iterations,
                     rec.optimizer_converged, rec.grad_max, rec.valid])
    _write_csv(os.path.join(outdir, "ladder.csv"),
               ["epsilon", "F", "F_bound", "weighted_kinetic", "weighted_potential",
                "unweighted_kinetic", "mono_margin", "slab_worst_mean", "slab_checked",
                "iterations", "converged", "grad_max", "valid"], rows)

    items = _config_items(cfg, seed, "solve")
    items.append(("ladder.lambda_disc", result.lambda_disc))
    items.append(("ladder.initializer", result.initializer))
    for j, gap in enumerate(result.cauchy_gaps):
        items.append((f"ladder.cauchy_gap.{j}", gap))
    items.append(("ladder.converged", result.converged))
    for rec in result.rungs:
        items.append((f"rung.{_fmt(rec.epsilon)}.valid", rec.valid))
    items += [
        ("check.holder_worst", result.holder.worst_ratio),
        ("check.holder.pass", result.holder.passed),
        ("check.recovery_worst", result.recovery_worst),
        ("check.recovery.pass", result.ok_recovery),
        ("check.limit_kinetic", result.limit_unweighted_kinetic),
        ("check.limit_kinetic.pass", result.ok_limit_kinetic),
        ("check.limit_slab", result.limit_slab_worst),
        ("check.limit_slab.pass", result.ok_limit_slab),
    ]
    ok = (all(r.valid for r in result.rungs) and result.converged
          and result.holder.passed and result.ok_recovery
          and result.ok_limit_kinetic and result.ok_limit_slab)
    items.append(("overall.pass", ok))
    _write_manifest(os.path.join(outdir, "manifest.txt"), items)
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_verify(cfg: RunConfig, outdir: str, seed: int) -> int:
    spec, grid, problem, opts = _setup(cfg, seed)
    path = os.path.join(outdir, "solution.txt")
    if not os.path.exists(path):
        print(f"missing solution artifact: {path}", file=sys.stderr)
        return EXIT_IO
    values = read_trajectory(path)
    if values.shape != (cfg.K + 1, cfg.M):
        print(f"solution artifact {path} has shape {values.shape}, "
              f"expected {(cfg.K + 1, cfg.M)}", file=sys.stderr)
        return EXIT_IO
    traj = Trajectory(values, cfg.horizon / cfg.K, grid)
    traj.validate(problem.u0)

    lam = problem.lambda_disc
    vi = vi_battery(spec, traj, lam)
    pb = parabolic_battery(spec, traj, lam)
    neg = vi_battery(spec, corrupt_trajectory(traj, seed), lam)

    rows = [("variational", tag, m, vi.viol_tol, m >= -vi.viol_tol)
            for tag, m in zip(vi.tags, vi.margins)]
    rows += [("parabolic", tag, m, pb.viol_tol, m >= -pb.viol_tol)
             for tag, m in zip(pb.tags, pb.margins)]
    rows += [("negative-control", tag, m, neg.viol_tol, m >= -neg.viol_tol)
             for tag, m in zip(neg.tags, neg.margins)]
    _write_csv(os.path.join(outdir, "verify.csv"),
               ["battery", "map", "margin", "viol_tol", "pass"], rows)

    ok = vi.all_pass and pb.all_pass and neg.any_fail
    items = _config_items(cfg, seed, "verify")
    items += [
        ("check.variational_worst", vi.worst),
        ("check.variational.pass", vi.all_pass),
        ("check.parabolic_worst", pb.worst),
        ("check.parabolic.pass", pb.all_pass),
        ("check.negative_control_worst", neg.worst),
        ("check.negative_control.fails", neg.any_fail),
        ("overall.pass", ok),
    ]
    _write_manifest(os.path.join(outdir, "verify_manifest.txt"), items)
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_compare_weak(cfg: RunConfig, outdir: str, seed: int) -> int:
    spec, grid, problem, opts = _setup(cfg, seed)
    ladder = run_ladder(cfg.eps_ladder, problem, spec, cfg.K, opts, T=cfg.horizon)
    euler = implicit_euler_solve(problem, spec, cfg.K, cfg.horizon, opts)
    spectral = None
    if spec.variant is Variant.PURE_PHASE and spec.p == 2.0:
        spectral = spectral_oracle_p2(problem, spec, ladder.limit.times)
    report = compare_weak(ladder.limit, euler.traj, spectral)

    rows = [("wide-vs-euler", report.rel_wide_euler, report.tol_euler)]
    if report.rel_wide_spectral is not None:
        rows.append(("wide-vs-spectral", report.rel_wide_spectral, report.tol_spectral))
        rows.append(("euler-vs-spectral", report.rel_euler_spectral, ""))
    _write_csv(os.path.join(outdir, "compare.csv"),
               ["pair", "relative_l2", "tolerance"], rows)

    items = _config_items(cfg, seed, "compare-weak")
    items.append(("compare.rel_wide_euler", report.rel_wide_euler))
    if report.rel_wide_spectral is not None:
        items.append(("compare.rel_wide_spectral", report.rel_wide_spectral))
        items.append(("compare.rel_euler_spectral", report.rel_euler_spectral))
    items.append(("overall.pass", report.passed))
    _write_manifest(os.path.join(outdir, "compare_manifest.txt"), items)
    return EXIT_OK if report.passed else EXIT_CHECK


def _cmd_mollify_demo(cfg: RunConfig, outdir: str, seed: int) -> int:
    spec, grid, problem, opts = _setup(cfg, seed)
    T = cfg.horizon
    times = np.arange(cfg.K + 1) * (T / cfg.K)
    bump = np.where(grid.omega_mask,
                    np.sin(np.pi * np.clip(grid.points, 0.0, 1.0)), 0.0)
    ramp = 1.0 - np.exp(-4.0 * times / T)
    U = problem.u0[None, :] + ramp[:, None] * bump[None, :]
    traj = Trajectory(U, T / cfg.K, grid)
    h_schedule = tuple(T / 2.0**k for k in range(1, 6))
    report = mollifier_convergence(spec, traj, h_schedule)

    _write_csv(os.path.join(outdir, "mollify.csv"),
               ["h", "norm_gap", "energy_gap", "lemma_margin"],
               [(r.h, r.norm_gap, r.energy_gap, r.lemma_margin) for r in report.rows])
    ok = (report.norm_monotone and report.energy_monotone
          and report.lemma_ok and report.final_norm_ok)
    items = _config_items(cfg, seed, "mollify-demo")
    items += [
        ("mollify.norm_monotone", report.norm_monotone),
        ("mollify.energy_monotone", report.energy_monotone),
        ("mollify.lemma_ok", report.lemma_ok),
        ("mollify.final_norm_ok", report.final_norm_ok),
        ("mollify.norm_rate_slope",
         "" if report.norm_rate_slope is None else report.norm_rate_slope),
        ("mollify.energy_rate_slope",
         "" if report.energy_rate_slope is None else report.energy_rate_slope),
        ("overall.pass", ok),
    ]
    _write_manifest(os.path.join(outdir, "mollify_manifest.txt"), items)
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_poincare(cfg: RunConfig, outdir: str, seed: int) -> int:
    spec, grid, problem, opts = _setup(cfg, seed)
    if cfg.p < 2:
        print("poincare estimation requires p >= 2", file=sys.stderr)
        return EXIT_CONFIG
    est = estimate_poincare(grid, cfg.p, cfg.s, iterations=2000)
    items = _config_items(cfg, seed, "poincare")
    items += [
        ("poincare.constant", est.constant),
        ("poincare.rayleigh", est.rayleigh),
        ("poincare.iterations", est.iterations),
        ("poincare.converged", est.converged),
    ]
    ok = est.converged
    if cfg.p == 2.0:
        oracle = poincare_constant_p2(grid, cfg.s)
        rel = abs(est.constant - oracle) / oracle
        ok = ok and rel <= 1e-3
        items += [("poincare.oracle", oracle), ("poincare.oracle_rel_err", rel),
                  ("poincare.oracle.pass", rel <= 1e-3)]
    items.append(("overall.pass", ok))
    _write_manifest(os.path.join(outdir, "poincare.txt"), items)
    return EXIT_OK if ok else EXIT_CHECK


_COMMANDS = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "compare-weak": _cmd_compare_weak,
    "mollify-demo": _cmd_mollify_demo,
    "poincare": _cmd_poincare,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlwide",
        description="Nonlocal evolution solver by weighted space-time minimization",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigParseError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG

    outdir = args.out if args.out is not None else cfg.directory
    seed = args.seed if args.seed is not None else cfg.seed
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return _COMMANDS[args.command](cfg, outdir, seed)
    except (ConfigurationError, NumericalError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ConfigurationError) else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
