"""Command-line front end.

Exit codes: 0 success, 2 malformed config, 3 fixed point did not converge,
4 sweep finished with failed cells, 5 output directory not writable,
6 oracle check out of tolerance.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import evaluate
from .config import ConfigError, RunConfig
from .errors import FixedPointError, IndefiniteError, RiccatiBlowupError
from .estimators import CausalFilter, optimal_smoother, robust_smoother, solve_sigma_f_fixed_point
from .model import UncertaintySpec, build_coefficients
from .oracle import BatchProblem, brute_force_optimal, brute_force_robust
from .plotting import render_sweep_svg
from .simulate import SimConfig, simulate_measurement, simulate_ou, write_trajectory_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CELL_FAILED = 4
EXIT_UNWRITABLE = 5
EXIT_ORACLE = 6

ORACLE_TOL = {"optimal": 1e-8, "robust": 1e-6}


def _mu_tag(mu):
    return format(mu, "g")


def _prepare_out(path):
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory {path!r} is not writable: {exc}", file=sys.stderr)
        return False
    return True


def cmd_fixedpoint(cfg: RunConfig) -> int:
    params = cfg.params()
    status = EXIT_OK
    print(f"{'mu':>6} {'branch':>8} {'sigma_f2':>22} {'R_sq':>22} {'iter':>5} {'residual':>10}")
    for mu in cfg.mu_list:
        for which in evaluate.BRANCHES:
            try:
                fp = solve_sigma_f_fixed_point(params, UncertaintySpec(mu), which)
            except (FixedPointError, RiccatiBlowupError) as exc:
                print(f"{mu:>6g} {which:>8} FAILED: {exc}")
                status = EXIT_NO_CONVERGENCE
                continue
            print(f"{mu:>6g} {which:>8} {fp.sigma_f2!r:>22} {fp.R_sq!r:>22} {fp.iterations:>5d} "
                  f"{fp.residual:>10.3g}")
    return status


def cmd_sweep(cfg: RunConfig) -> int:
    if not _prepare_out(cfg.out_dir):
        return EXIT_UNWRITABLE
    table = evaluate.run_sweep(cfg.params(), cfg.mu_list, cfg.delta_grid(), cfg.sim(), cfg.n_paths,
                               threads=cfg.threads, feedback_filter=cfg.feedback_filter,
                               refit_per_cell=cfg.refit_per_cell)
    try:
        for mu in table.mus:
            stem = os.path.join(cfg.out_dir, f"sweep_mu{_mu_tag(mu)}")
            with open(stem + ".csv", "w", newline="") as fh:
                table.subset(mu).to_csv(fh)
            if cfg.emit_plots:
                with open(stem + ".csv", newline="") as fh:
                    rows = evaluate.read_sweep_csv(fh)
                with open(stem + ".svg", "w") as fh:
                    fh.write(render_sweep_svg(rows, mu))
            print(f"wrote {stem}.csv" + (f", {stem}.svg" if cfg.emit_plots else ""))
        summary = evaluate.format_summary(evaluate.summarize(table))
        with open(os.path.join(cfg.out_dir, "summary.txt"), "w") as fh:
            fh.write(summary)
        if table.failures:
            with open(os.path.join(cfg.out_dir, "errors.txt"), "w") as fh:
                for mu, d1, d2, msg in table.failures:
                    fh.write(f"mu={mu!r} delta1={d1!r} delta2={d2!r}: {msg}\n")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    print(summary, end="")
    return EXIT_CELL_FAILED if table.failures else EXIT_OK


def _oracle_compare(traj, coeffs, which):
    """Return (relative RMS, worst index, error message or None)."""
    robust = which == "robust"
    smoother = robust_smoother if robust else optimal_smoother
    problem = BatchProblem.from_trajectory(traj, coeffs, robust)
    recursive = batch = None
    notes = []
    try:
        recursive = smoother(traj, coeffs).estimate
    except RiccatiBlowupError as exc:
        notes.append(f"Riccati escape: {exc}")
    try:
        batch = (brute_force_robust if robust else brute_force_optimal)(problem)
    except IndefiniteError as exc:
        notes.append(f"batch oracle: {exc}")
    if notes:
        return math.nan, None, "; ".join(notes)
    diff = recursive - batch
    scale = float(np.max(np.abs(batch))) or 1.0
    return float(np.sqrt(np.mean(diff * diff))) / scale, int(np.argmax(np.abs(diff))), None


def cmd_oracle_check(cfg: RunConfig) -> int:
    params = cfg.params()
    n = cfg.oracle_steps
    sim = SimConfig(cfg.dt, n * cfg.dt, cfg.seed)
    status = EXIT_OK
    for mu in cfg.mu_list:
        unc = UncertaintySpec(mu, cfg.traj_delta1, cfg.traj_delta2)
        R_sq = solve_sigma_f_fixed_point(params, unc.nominal, "optimal").R_sq
        coeffs = build_coefficients(params, unc, R_sq)
        traj = simulate_measurement(simulate_ou(coeffs, sim), coeffs, sim)
        robust_design = coeffs
        if cfg.oracle_ksq is not None:
            robust_design = replace(coeffs, k1=0.0, k2=math.sqrt(cfg.oracle_ksq))
            print(f"mu={mu:g}: robust check uses K'K = {cfg.oracle_ksq:g} (override)")
        for which in evaluate.BRANCHES:
            design = robust_design if which == "robust" else coeffs
            rel, worst, failure = _oracle_compare(traj, design, which)
            tol = ORACLE_TOL[which]
            if failure is not None:
                print(f"mu={mu:g} {which:>8}: FAILED ({failure})")
                status = EXIT_ORACLE
            elif rel <= tol:
                print(f"mu={mu:g} {which:>8}: rms/scale = {rel:.3e} <= {tol:g}  ok")
            else:
                print(f"mu={mu:g} {which:>8}: rms/scale = {rel:.3e} > {tol:g}  worst index {worst}")
                status = EXIT_ORACLE
    return status


def cmd_simulate(cfg: RunConfig) -> int:
    if not _prepare_out(cfg.out_dir):
        return EXIT_UNWRITABLE
    params = cfg.params()
    unc = UncertaintySpec(cfg.traj_mu, cfg.traj_delta1, cfg.traj_delta2)
    branch = "robust" if cfg.feedback_filter == "robust" else "optimal"
    R_sq = solve_sigma_f_fixed_point(params, unc.nominal, branch).R_sq
    coeffs = build_coefficients(params, unc, R_sq)
    sim = cfg.sim()
    feedback = CausalFilter(coeffs, sim.dt, robust=branch == "robust") if sim.explicit_feedback else None
    traj = simulate_measurement(simulate_ou(coeffs, sim), coeffs, sim, feedback=feedback)
    path = os.path.join(cfg.out_dir, "trajectory.csv")
    try:
        with open(path, "w", newline="") as fh:
            write_trajectory_csv(traj, fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    print(f"wrote {path} ({traj.n_steps} rows, R_sq = {R_sq!r})")
    return EXIT_OK


COMMANDS = {
    "fixedpoint": cmd_fixedpoint,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
    "simulate": cmd_simulate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=lambda s: int(s, 0), metavar="U64", help="base seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, metavar="N", help="worker processes for sweeps")
    common.add_argument("--diagonal", action="store_true", default=None, help="sweep only delta1 = delta2")
    common.add_argument("--refit-per-cell", action="store_true", default=None,
                        help="refit sigma_f2 per cell under the perturbed dynamics")
    common.add_argument("--plots", action="store_true", default=None, help="write one SVG per mu")
    common.add_argument("--feedback-filter", choices=("matched", "optimal", "robust"),
                        help="filter closing the homodyne loop")
    common.add_argument("--n-paths", type=int, metavar="N", help="Monte Carlo paths per cell")
    common.add_argument("--mu", metavar="LIST", help="comma-separated uncertainty levels")

    parser = argparse.ArgumentParser(prog="robustphase",
                                     description="Robust vs optimal smoothing of a squeezed-beam phase.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fixedpoint", parents=[common], help="solve the sigma_f2 / R_sq fixed point")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo (mu, delta1, delta2) sweep")
    sub.add_parser("oracle-check", parents=[common], help="Riccati smoothers vs batch solutions")
    sub.add_parser("simulate", parents=[common], help="dump one trajectory as CSV")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = RunConfig.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "threads": args.threads,
        "diagonal": args.diagonal,
        "refit_per_cell": args.refit_per_cell,
        "emit_plots": args.plots,
        "feedback_filter": args.feedback_filter,
        "n_paths": args.n_paths,
    }
    if args.mu is not None:
        try:
            overrides["mu_list"] = tuple(float(m) for m in args.mu.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --mu: {exc}") from exc
    return cfg.replace(**{k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
