"""Monte Carlo smoothed-error estimates and the (mu, delta1, delta2) sweep.

Both smoothers see the same noise draws on every path index (common random
numbers), so robust-minus-optimal differences are much sharper than either
marginal error estimate.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import FixedPointError, InstabilityError, RiccatiBlowupError
from .estimators import CausalFilter, FixedPointResult, optimal_smoother, robust_smoother, \
    solve_sigma_f_fixed_point
from .model import PhysicalParams, UncertaintySpec, build_coefficients
from .simulate import SimConfig, measurement_noise, simulate_measurement, simulate_ou

BRANCHES = ("optimal", "robust")
CSV_HEADER = ["mu", "delta1", "delta2", "sigma_s2_robust", "stderr_robust", "sigma_s2_optimal",
              "stderr_optimal", "n_paths", "sigma_f2_used", "R_sq_used"]
CELL_ERRORS = (FixedPointError, RiccatiBlowupError, InstabilityError, ArithmeticError, ValueError)

DEFAULT_CHUNK = 250


class CellError(RuntimeError):
    def __init__(self, unc, cause):
        super().__init__(f"cell (mu={unc.mu}, delta1={unc.delta1}, delta2={unc.delta2}): {cause}")
        self.unc = unc
        self.cause = cause


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    mean = math.fsum(x) / len(x)
    if len(x) < 2:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2) / (len(x) - 1)
    return mean, math.sqrt(var / len(x))


def fixed_points(params: PhysicalParams, unc: UncertaintySpec, feedback_filter: str = "matched",
                 refit_per_cell: bool = False) -> dict:
    """Fixed point (sigma_f2, R_sq) for each smoother branch.

    ``feedback_filter='matched'`` lets each branch close the loop with its own
    filter; 'optimal' or 'robust' imposes one filter on both branches.  With
    ``refit_per_cell`` the realized error on the perturbed system is used.
    """
    dynamics = "true" if refit_per_cell else "nominal"
    fp_unc = unc if refit_per_cell else unc.nominal
    if feedback_filter == "matched":
        return {w: solve_sigma_f_fixed_point(params, fp_unc, w, dynamics=dynamics) for w in BRANCHES}
    if feedback_filter not in BRANCHES:
        raise ValueError(f"feedback_filter must be matched/optimal/robust, got {feedback_filter!r}")
    shared = solve_sigma_f_fixed_point(params, fp_unc, feedback_filter, dynamics=dynamics)
    return {w: shared for w in BRANCHES}


def path_errors(params: PhysicalParams, unc: UncertaintySpec, cfg: SimConfig, n_paths: int,
                fps: dict, which: Sequence[str] = BRANCHES, chunk: int = DEFAULT_CHUNK) -> dict:
    """Window mean-square smoothing error per path, for each requested branch.

    Path ``i`` uses the derived seed of index ``i`` in every branch.
    """
    out = {w: np.empty(n_paths) for w in which}
    smoothers = {"optimal": optimal_smoother, "robust": robust_smoother}
    for start in range(0, n_paths, chunk):
        idx = list(range(start, min(start + chunk, n_paths)))
        traj = None
        omega = measurement_noise(cfg, idx)
        for w in which:
            coeffs = build_coefficients(params, unc, fps[w].R_sq)
            if traj is None:
                # a_true does not depend on R_sq, so phi is shared by the branches
                traj = simulate_ou(coeffs, cfg, paths=idx)
            feedback = CausalFilter(coeffs, cfg.dt, robust=(w == "robust")) if cfg.explicit_feedback else None
            measured = simulate_measurement(traj, coeffs, cfg, feedback=feedback, omega=omega)
            out[w][start:start + len(idx)] = smoothers[w](measured, coeffs).window_mse
    return out


def mc_sigma_s2(params: PhysicalParams, unc: UncertaintySpec, which: str, cfg: SimConfig, n_paths: int,
                feedback_filter: str = "matched", refit_per_cell: bool = False):
    """Monte Carlo smoothed error sigma_s^2 over [T/4, 3T/4] and its standard error."""
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")
    try:
        fps = fixed_points(params, unc, feedback_filter, refit_per_cell)
        errs = path_errors(params, unc, cfg, n_paths, fps, which=(which,))[which]
    except CELL_ERRORS as exc:
        raise CellError(unc, exc) from exc
    return _mean_stderr(errs)


@dataclass
class SweepRow:
    mu: float
    delta1: float
    delta2: float
    sigma_s2_robust: float = math.nan
    stderr_robust: float = math.nan
    sigma_s2_optimal: float = math.nan
    stderr_optimal: float = math.nan
    n_paths: int = 0
    sigma_f2_used: float = math.nan
    R_sq_used: float = math.nan
    stderr_diff: float = math.nan
    error: Optional[str] = None

    @property
    def key(self):
        return (self.mu, self.delta1, self.delta2)

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def robust_advantage(self) -> float:
        """sigma_s2(optimal) - sigma_s2(robust); positive when the robust smoother wins."""
        return self.sigma_s2_optimal - self.sigma_s2_robust

    def csv_fields(self):
        return [self.mu, self.delta1, self.delta2, self.sigma_s2_robust, self.stderr_robust,
                self.sigma_s2_optimal, self.stderr_optimal, self.n_paths, self.sigma_f2_used, self.R_sq_used]


@dataclass
class SweepTable:
    rows: list
    params: PhysicalParams
    config: str
    base_seed: int
    failures: list = field(default_factory=list)

    def __post_init__(self):
        keys = [r.key for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("sweep rows must be unique in (mu, delta1, delta2)")
        self.rows = sorted(self.rows, key=lambda r: r.key)

    @property
    def mus(self):
        return sorted({r.mu for r in self.rows})

    def subset(self, mu) -> "SweepTable":
        return SweepTable([r for r in self.rows if r.mu == mu], self.params, self.config, self.base_seed,
                          [f for f in self.failures if f[0] == mu])

    def row(self, mu, delta1, delta2) -> SweepRow:
        for r in self.rows:
            if r.key == (mu, delta1, delta2):
                return r
        raise KeyError((mu, delta1, delta2))

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([_fmt(x) for x in r.csv_fields()])

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def read_sweep_csv(fh) -> list:
    reader = csv.DictReader(fh)
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected sweep CSV header {reader.fieldnames}")
    return [{k: (int(v) if k == "n_paths" else float(v)) for k, v in row.items()} for row in reader]


def delta_grid(lo: float = -1.0, hi: float = 1.0, count: int = 5, diagonal: bool = False) -> list:
    """Full count x count grid over [lo, hi]^2, or the delta1 = delta2 line."""
    axis = [float(x) for x in np.linspace(lo, hi, count)]
    if diagonal:
        return [(d, d) for d in axis]
    return [(d1, d2) for d1 in axis for d2 in axis]


def _run_cell(task):
    params, mu, d1, d2, cfg, n_paths, feedback_filter, refit, chunk = task
    row = SweepRow(mu, d1, d2, n_paths=n_paths)
    try:
        unc = UncertaintySpec(mu, d1, d2)
        fps = fixed_points(params, unc, feedback_filter, refit)
        used = fps["optimal"]
        row.sigma_f2_used, row.R_sq_used = used.sigma_f2, used.R_sq
        errs = path_errors(params, unc, cfg, n_paths, fps, chunk=chunk)
    except CELL_ERRORS as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.sigma_s2_robust, row.stderr_robust = _mean_stderr(errs["robust"])
    row.sigma_s2_optimal, row.stderr_optimal = _mean_stderr(errs["optimal"])
    _, row.stderr_diff = _mean_stderr(errs["robust"] - errs["optimal"])
    return row


def run_sweep(params: PhysicalParams, mu_list, delta_grid, cfg: SimConfig, n_paths: int,
              threads: int = 1, feedback_filter: str = "matched", refit_per_cell: bool = False,
              chunk: int = DEFAULT_CHUNK) -> SweepTable:
    """One row per (mu, delta1, delta2).  Failed cells are kept as NaN rows and
    listed in ``failures``; the sweep itself never aborts on a cell.

    Results do not depend on ``threads``: each cell is computed independently
    from path seeds fixed by index.
    """
    for mu in mu_list:
        UncertaintySpec(mu)
    for d1, d2 in delta_grid:
        UncertaintySpec(0.0, d1, d2)
    tasks = [(params, float(mu), float(d1), float(d2), cfg, n_paths, feedback_filter, refit_per_cell, chunk)
             for mu in mu_list for d1, d2 in delta_grid]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell, tasks))
    else:
        rows = [_run_cell(t) for t in tasks]
    failures = [(r.mu, r.delta1, r.delta2, r.error) for r in rows if r.failed]
    return SweepTable(rows=rows, params=params, config=cfg.fingerprint(), base_seed=cfg.seed, failures=failures)


@dataclass
class MuSummary:
    mu: float
    max_robust_advantage: float
    robust_cell: Optional[tuple]
    max_optimal_advantage: float
    optimal_cell: Optional[tuple]
    crossover_cells: list
    failed_cells: list


def summarize(table: SweepTable) -> list:
    """Per-mu extremes of the robust/optimal error gap.

    Advantages are clipped at zero, so a mu = 0 table reports no advantage
    either way.  A crossover cell is one whose winner differs from at least
    one grid neighbour.  Failed cells are listed and otherwise ignored.
    """
    if not table.rows:
        raise ValueError("cannot summarize an empty sweep table")
    out = []
    for mu in table.mus:
        rows = [r for r in table.rows if r.mu == mu]
        good = [r for r in rows if not r.failed and math.isfinite(r.robust_advantage)]
        failed = [(r.delta1, r.delta2) for r in rows if r.failed]
        best_r, cell_r, best_o, cell_o = 0.0, None, 0.0, None
        for r in good:
            adv = r.robust_advantage
            if adv > best_r:
                best_r, cell_r = adv, (r.delta1, r.delta2)
            if -adv > best_o:
                best_o, cell_o = -adv, (r.delta1, r.delta2)
        out.append(MuSummary(mu, best_r, cell_r, best_o, cell_o, _crossovers(good), failed))
    return out


def _crossovers(rows):
    d1s = sorted({r.delta1 for r in rows})
    d2s = sorted({r.delta2 for r in rows})
    sign = {(d1s.index(r.delta1), d2s.index(r.delta2)): np.sign(r.robust_advantage) for r in rows}
    cells = []
    for (i, j), s in sorted(sign.items()):
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            other = sign.get((i + di, j + dj))
            if other is not None and other != s:
                cells.append((d1s[i], d2s[j]))
                break
    return cells


def format_summary(summaries) -> str:
    lines = []
    for s in summaries:
        lines.append(f"mu = {s.mu:g}")
        if s.robust_cell is None:
            lines.append("  robust smoother never better")
        else:
            lines.append(f"  max robust advantage  {s.max_robust_advantage:.6g} rad^2 at "
                         f"(delta1, delta2) = ({s.robust_cell[0]:g}, {s.robust_cell[1]:g})")
        if s.optimal_cell is None:
            lines.append("  optimal smoother never better")
        else:
            lines.append(f"  max optimal advantage {s.max_optimal_advantage:.6g} rad^2 at "
                         f"(delta1, delta2) = ({s.optimal_cell[0]:g}, {s.optimal_cell[1]:g})")
        cross = ", ".join(f"({a:g}, {b:g})" for a, b in s.crossover_cells) or "none"
        lines.append(f"  crossover cells: {cross}")
        if s.failed_cells:
            lines.append("  FAILED cells: " + ", ".join(f"({a:g}, {b:g})" for a, b in s.failed_cells))
    return "\n".join(lines) + "\n"
