"""Brute-force batch smoothers used as ground truth for the Riccati recursions.

The whole phase path is treated as one unknown vector and the (possibly
indefinite) quadratic cost is minimized by solving its tridiagonal normal
equations directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .errors import DomainError, IndefiniteError
from .model import SystemCoefficients
from .simulate import Trajectory

MAX_POINTS = 2000


@dataclass(frozen=True)
class BatchProblem:
    n: int
    dt: float
    theta: np.ndarray
    a: float
    b_var: float
    c: float
    k_sq: float = 0.0
    prior_var: Optional[float] = None

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"need n >= 2, got {self.n}")
        if self.n > MAX_POINTS:
            raise DomainError(f"oracle capped at {MAX_POINTS} points, got {self.n}")
        if not self.b_var > 0:
            raise DomainError(f"b_var must be positive, got {self.b_var}")
        if np.shape(self.theta)[-1] != self.n:
            raise ValueError(f"theta has {np.shape(self.theta)[-1]} samples, expected {self.n}")

    @property
    def prior(self) -> float:
        # stationary kappa / (2 lam) unless given
        if self.prior_var is not None:
            return self.prior_var
        return self.b_var / (self.dt * -2.0 * self.a)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, design: SystemCoefficients, robust: bool = False):
        return cls(n=traj.n_steps, dt=traj.dt, theta=np.asarray(traj.theta, dtype=float),
                   a=design.a_nom, b_var=design.kappa * traj.dt, c=design.c_nom,
                   k_sq=design.ksq if robust else 0.0)


def normal_equations(p: BatchProblem, dtype=float):
    """Diagonal, off-diagonal and right-hand side(s) of the stationarity condition."""
    one = np.asarray(1.0, dtype=dtype)
    dt = one * p.dt
    F = one + p.a * dt
    Q = one * p.b_var
    diag = np.full(p.n, (one * p.c * p.c - p.k_sq) * dt, dtype=dtype)
    diag[:-1] += F * F / Q
    diag[1:] += one / Q
    diag[0] += one / p.prior
    off = np.full(p.n - 1, -F / Q, dtype=dtype)
    rhs = one * p.c * dt * np.asarray(p.theta, dtype=dtype)
    return diag, off, rhs


def ldl_pivots(diag, off):
    piv = np.empty_like(diag)
    piv[0] = diag[0]
    for k in range(1, len(diag)):
        piv[k] = diag[k] - off[k - 1] ** 2 / piv[k - 1]
    return piv


def _solve(p: BatchProblem):
    diag, off, rhs = normal_equations(p)
    piv = ldl_pivots(diag, off)
    if not np.all(piv > 0):
        k = int(np.argmin(piv))
        raise IndefiniteError(
            f"batch quadratic not positive definite: smallest pivot {piv[k]:.6g} at index {k}",
            pivot=float(piv[k]), index=k)
    ab = np.vstack([np.concatenate([[0.0], off]), diag])
    sol = solveh_banded(ab, rhs.T).T
    # The F^2/Q and F/Q entries nearly cancel, so rounding them costs a few digits.
    # Refine against the system assembled in extended precision.
    exact = normal_equations(p, np.longdouble)
    for _ in range(2):
        sol = sol + solveh_banded(ab, _residual(*exact, sol).T).T
    return sol


def _residual(diag, off, rhs, x):
    x = x.astype(diag.dtype)
    Hx = diag * x
    Hx[..., :-1] += off * x[..., 1:]
    Hx[..., 1:] += off * x[..., :-1]
    return (rhs - Hx).astype(float)


def brute_force_optimal(p: BatchProblem) -> np.ndarray:
    if p.k_sq != 0:
        raise DomainError("brute_force_optimal needs k_sq = 0")
    return _solve(p)


def brute_force_robust(p: BatchProblem) -> np.ndarray:
    """Stationary point of the indefinite quadratic (optimal cost minus sum k_sq phi_k^2 dt).

    Raises IndefiniteError, carrying the smallest pivot, once the Hessian is no
    longer positive definite.
    """
    if p.k_sq < 0:
        raise DomainError(f"k_sq must be non-negative, got {p.k_sq}")
    return _solve(p)
