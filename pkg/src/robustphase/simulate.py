"""Seeded sample paths of the phase process and the scaled homodyne record.

Every path is driven by its own 64-bit seed.  Path ``i`` of a run with base
seed ``s`` uses ``path_seed(s, i)``, so a batch can be split across workers or
chunks without changing a single draw.  Within a path, the process noise and
the measurement noise come from two independent streams of the same seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, InstabilityError
from .model import SystemCoefficients

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15

_PROCESS_STREAM = 0
_MEASUREMENT_STREAM = 1


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-8
    t_end: float = 2e-4
    seed: int = 0
    explicit_feedback: bool = False
    exact_ou: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 10 * self.dt:
            raise DomainError(f"t_end must cover at least 10 steps, got t_end={self.t_end}, dt={self.dt}")
        if not 0 <= int(self.seed) <= MASK64:
            raise DomainError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def fingerprint(self) -> str:
        return (f"dt={self.dt!r},t_end={self.t_end!r},seed={self.seed},"
                f"explicit_feedback={self.explicit_feedback},exact_ou={self.exact_ou}")


@dataclass
class Trajectory:
    """Sampled signals on the grid t_k = k*dt.

    Series are 1-D for a single path or (n_paths, n_steps) for a batch; time is
    always the last axis.  ``nu`` and ``omega`` are the white-noise samples
    (variance 1/dt each) that drove the path.  ``phi`` may be None for a
    measured record without ground truth.
    """

    dt: float
    phi: Optional[np.ndarray]
    theta: Optional[np.ndarray] = None
    current: Optional[np.ndarray] = None
    phi_f: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    seed: object = None

    def __post_init__(self):
        present = [(name, getattr(self, name)) for name in ("phi", "theta", "current", "phi_f", "nu", "omega")]
        present = [(name, s) for name, s in present if s is not None]
        if not present:
            raise ValueError("trajectory needs at least one series")
        ref_name, ref = present[0]
        for name, series in present[1:]:
            if series.shape[-1] != ref.shape[-1]:
                raise ValueError(f"{name} has {series.shape[-1]} samples, {ref_name} has {ref.shape[-1]}")

    @property
    def n_steps(self) -> int:
        return (self.phi if self.phi is not None else self.theta).shape[-1]

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps)


def path_seed(base_seed: int, index: int) -> int:
    return (int(base_seed) ^ ((int(index) * GOLDEN64) & MASK64)) & MASK64


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream,)))


def _seeds(cfg: SimConfig, paths):
    if paths is None:
        return [int(cfg.seed)]
    return [path_seed(cfg.seed, i) for i in paths]


def _pack(rows, single):
    return rows[0] if single else np.stack(rows)


def simulate_ou(coeffs: SystemCoefficients, cfg: SimConfig, paths: Optional[Sequence[int]] = None,
                phi0: Optional[float] = None) -> Trajectory:
    """Simulate the true phase process on the configured grid.

    With ``paths=None`` a single path seeded by ``cfg.seed`` is returned;
    otherwise one row per path index.  ``phi0`` overrides the stationary draw
    of the initial phase.
    """
    dt, n = cfg.dt, cfg.n_steps
    a, kappa = coeffs.a_true, coeffs.kappa
    if cfg.exact_ou:
        F = math.exp(a * dt)
        gain = math.sqrt(kappa * (1.0 - F * F) / (-2.0 * a)) if kappa > 0 else 0.0
    else:
        F = 1.0 + a * dt
        if abs(F) >= 1.0:
            raise InstabilityError(f"|1 + a dt| = {abs(F):.6g} >= 1; reduce dt below {2.0 / abs(a):.3g} s")
        gain = math.sqrt(kappa * dt)
    stationary_sd = math.sqrt(kappa / (-2.0 * a)) if kappa > 0 else 0.0

    seeds = _seeds(cfg, paths)
    phis, nus = [], []
    for s in seeds:
        rng = _rng(s, _PROCESS_STREAM)
        z0 = rng.standard_normal()
        xi = rng.standard_normal(n)
        drive = np.empty(n)
        drive[0] = stationary_sd * z0 if phi0 is None else phi0
        drive[1:] = gain * xi[:-1]
        phis.append(lfilter([1.0], [1.0, -F], drive))
        nus.append(xi / math.sqrt(dt))
    single = paths is None
    return Trajectory(dt=dt, phi=_pack(phis, single), nu=_pack(nus, single),
                      seed=seeds[0] if single else np.array(seeds, dtype=np.uint64))


def measurement_noise(cfg: SimConfig, paths: Optional[Sequence[int]] = None) -> np.ndarray:
    """White measurement noise omega_k ~ N(0, 1/dt) for the given paths."""
    rows = [_rng(s, _MEASUREMENT_STREAM).standard_normal(cfg.n_steps) / math.sqrt(cfg.dt)
            for s in _seeds(cfg, paths)]
    return _pack(rows, paths is None)


def simulate_measurement(traj: Trajectory, coeffs: SystemCoefficients, cfg: SimConfig,
                         feedback=None, paths: Optional[Sequence[int]] = None,
                         omega: Optional[np.ndarray] = None) -> Trajectory:
    """Attach the scaled measurement theta (and, with explicit feedback, I and phi_f).

    ``feedback`` is a causal filter exposing ``reset(shape)``, ``estimate`` (the
    prediction for the current sample) and ``update(theta_k)``.  In the
    explicit loop the homodyne current is formed first and theta is recovered
    from it as (I + 2|alpha| phi_f) / sqrt(R_sq).
    """
    if omega is None:
        omega = measurement_noise(cfg, paths)
    if omega.shape != traj.phi.shape:
        raise ValueError(f"noise shape {omega.shape} does not match phi {traj.phi.shape}")
    if not cfg.explicit_feedback:
        theta = coeffs.c_true * traj.phi + omega
        return replace(traj, theta=theta, omega=omega)

    if feedback is None:
        raise ValueError("explicit_feedback requires a feedback filter")
    sqrt_R = math.sqrt(coeffs.R_sq)
    two_alpha = 2.0 * coeffs.alpha_mag
    phi = traj.phi
    current = np.empty_like(phi)
    phi_f = np.empty_like(phi)
    theta = np.empty_like(phi)
    feedback.reset(phi.shape[:-1])
    for k in range(phi.shape[-1]):
        est = feedback.estimate
        phi_f[..., k] = est
        current[..., k] = sqrt_R * coeffs.c_true * phi[..., k] - two_alpha * est + sqrt_R * omega[..., k]
        theta[..., k] = (current[..., k] + two_alpha * est) / sqrt_R
        feedback.update(theta[..., k])
    return replace(traj, theta=theta, current=current, phi_f=phi_f, omega=omega)


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    """Write a single-path trajectory as ``t,phi,theta[,current,phi_f]``."""
    if traj.phi.ndim != 1:
        raise ValueError("CSV dump needs a single path")
    if traj.theta is None:
        raise ValueError("trajectory has no measurement record")
    cols = [("t", traj.t), ("phi", traj.phi), ("theta", traj.theta)]
    if traj.current is not None:
        cols += [("current", traj.current), ("phi_f", traj.phi_f)]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([name for name, _ in cols])
    for row in zip(*(series for _, series in cols)):
        writer.writerow([format(float(x), ".17g") for x in row])


def read_trajectory_csv(fh) -> dict:
    reader = csv.reader(fh)
    header = next(reader)
    data = np.array([[float(x) for x in row] for row in reader])
    return {name: data[:, i] for i, name in enumerate(header)}
