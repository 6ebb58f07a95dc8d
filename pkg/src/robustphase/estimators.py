"""Kalman and robust (IQC) filters and fixed-interval smoothers for the scalar model.

All recursions are the exact discrete-time counterparts of the quadratic

    J(phi) = phi_0^2 / P0 + sum_k (phi_{k+1} - F phi_k)^2 / (kappa dt)
             + sum_k [(theta_k - c phi_k)^2 - ksq phi_k^2] dt,

with F = 1 + a dt.  ``ksq = 0`` gives the Kalman filter / optimal smoother;
``ksq = k1^2 + k2^2`` gives the robust pair, whose Riccati equation is the
Kalman one with c^2 replaced by c^2 - ksq and whose state equation carries
the extra +P ksq phi_hat drift.  In the dt -> 0 limit this is

    dP/dt = 2 a P + kappa - P^2 (c^2 - ksq).

Estimators are always designed from the nominal coefficients of a
``SystemCoefficients``; the true coefficients only drive simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import DegenerateIntervalError, DomainError, FixedPointError, RiccatiBlowupError
from .model import PhysicalParams, SystemCoefficients, UncertaintySpec, build_coefficients, compute_R_sq
from .simulate import Trajectory

Which = Literal["optimal", "robust"]

MIN_SMOOTHER_STEPS = 10


@dataclass
class FilterRun:
    estimate: np.ndarray
    variance: np.ndarray
    steady_sigma_f2: float
    predicted: Optional[np.ndarray] = None


@dataclass
class SmootherRun:
    estimate: np.ndarray
    variance: np.ndarray
    window_mse: Optional[np.ndarray] = None
    filtered: Optional[FilterRun] = field(default=None, repr=False)


def interior_window(n: int) -> slice:
    """Grid indices with 0.25 T <= t_k <= 0.75 T, T = n dt."""
    return slice(math.ceil(0.25 * n), math.floor(0.75 * n) + 1)


def _design(design: SystemCoefficients, robust: bool):
    ksq = design.ksq if robust else 0.0
    return design.a_nom, design.c_nom, ksq, design.kappa


def stationary_prior(design: SystemCoefficients) -> float:
    """kappa / (2 lam): the prior variance every recursion starts from."""
    return design.kappa / (-2.0 * design.a_nom)


# ---------------------------------------------------------------------------
# Riccati recursions (data independent, cached per design)


@lru_cache(maxsize=64)
def _forward_riccati(a, c, ksq, kappa, dt, n, P0):
    F = 1.0 + a * dt
    Q = kappa * dt
    info_gain = (c * c - ksq) * dt
    P_post = np.empty(n)
    P_pred = np.empty(n)
    P = P0
    for k in range(n):
        P_pred[k] = P
        if P == 0.0:
            Pk = 0.0
        else:
            J = 1.0 / P + info_gain
            if not J > 0.0:
                raise RiccatiBlowupError(
                    f"forward Riccati escaped at step {k} (t = {k * dt:.6g} s)", step=k, time=k * dt)
            Pk = 1.0 / J
        P_post[k] = Pk
        P = F * F * Pk + Q
    # state recursion x+_k = g_k x+_{k-1} + h_k theta_k
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(P_pred > 0, F * P_post / P_pred, F)
    h = c * dt * P_post
    for arr in (P_post, P_pred, g, h):
        arr.setflags(write=False)
    return P_post, P_pred, g, h


@lru_cache(maxsize=64)
def _backward_information(a, c, ksq, kappa, dt, n):
    """Information S_k about phi_k carried by theta_{k+1..n-1}, zero at the end."""
    F = 1.0 + a * dt
    Q = kappa * dt
    info_gain = (c * c - ksq) * dt
    S = np.zeros(n)
    u = np.zeros(n)
    for k in range(n - 2, -1, -1):
        S_next = S[k + 1] + info_gain
        den = 1.0 + Q * S_next
        if not den > 0.0:
            raise RiccatiBlowupError(
                f"backward Riccati escaped at step {k} (t = {k * dt:.6g} s)", step=k, time=k * dt)
        S[k] = F * F * S_next / den
        u[k] = F / den
    v = c * dt * u
    for arr in (S, u, v):
        arr.setflags(write=False)
    return S, u, v


def _check_theta(traj: Trajectory):
    if traj.theta is None:
        raise ValueError("trajectory has no measurement record")
    return np.asarray(traj.theta, dtype=float)


def _filter(traj: Trajectory, design: SystemCoefficients, robust: bool) -> FilterRun:
    theta = _check_theta(traj)
    a, c, ksq, kappa = _design(design, robust)
    n = theta.shape[-1]
    P_post, _, g, h = _forward_riccati(a, c, ksq, kappa, traj.dt, n, stationary_prior(design))
    F = 1.0 + a * traj.dt
    x_post = np.empty_like(theta)
    x_pred = np.empty_like(theta)
    x = np.zeros(theta.shape[:-1])
    for k in range(n):
        x_pred[..., k] = F * x if k else x
        x = g[k] * x + h[k] * theta[..., k]
        x_post[..., k] = x
    return FilterRun(estimate=x_post, variance=np.array(P_post), steady_sigma_f2=float(P_post[-1]),
                     predicted=x_pred)


def kalman_filter(traj: Trajectory, design: SystemCoefficients) -> FilterRun:
    """Kalman filter designed at the nominal coefficients.

    ``estimate`` holds the filtered phase after each sample and ``variance``
    the matching Riccati solution; ``predicted`` is the causal one-step-ahead
    estimate that would steer the local oscillator.
    """
    return _filter(traj, design, robust=False)


def robust_filter(traj: Trajectory, design: SystemCoefficients) -> FilterRun:
    """Robust IQC filter; equal to ``kalman_filter`` when the gain K vanishes.

    Raises RiccatiBlowupError when P escapes within the horizon.
    """
    return _filter(traj, design, robust=True)


def _two_filter(traj: Trajectory, design: SystemCoefficients, robust: bool) -> SmootherRun:
    theta = _check_theta(traj)
    n = theta.shape[-1]
    if n < MIN_SMOOTHER_STEPS:
        raise DegenerateIntervalError(f"need at least {MIN_SMOOTHER_STEPS} steps, got {n}")
    fwd = _filter(traj, design, robust)
    a, c, ksq, kappa = _design(design, robust)
    S, u, v = _backward_information(a, c, ksq, kappa, traj.dt, n)

    P_post = fwd.variance
    with np.errstate(divide="ignore"):
        J_post = 1.0 / P_post
    info = J_post + S
    if np.any(info <= 0):
        k = int(np.argmax(info <= 0))
        raise RiccatiBlowupError(f"combined information non-positive at step {k}", step=k, time=k * traj.dt)
    x_s = np.empty_like(theta)
    s = np.zeros(theta.shape[:-1])
    exact = P_post == 0.0
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            s = u[k] * s + v[k] * theta[..., k + 1]
        if exact[k]:
            x_s[..., k] = fwd.estimate[..., k]
        else:
            x_s[..., k] = (J_post[k] * fwd.estimate[..., k] + s) / info[k]
    variance = np.where(exact, 0.0, 1.0 / np.where(exact, 1.0, info))
    return SmootherRun(estimate=x_s, variance=variance, window_mse=_window_mse(traj, x_s), filtered=fwd)


def _window_mse(traj: Trajectory, estimate):
    if traj.phi is None:
        return None
    w = interior_window(estimate.shape[-1])
    err = traj.phi[..., w] - estimate[..., w]
    return np.mean(err * err, axis=-1)


def optimal_smoother(traj: Trajectory, design: SystemCoefficients) -> SmootherRun:
    """Mayne-Fraser two-filter smoother: Kalman forward pass plus a backward
    information filter with zero information at t = T.

    ``window_mse`` is the realized mean-square error over [T/4, 3T/4].
    """
    return _two_filter(traj, design, robust=False)


def robust_smoother(traj: Trajectory, design: SystemCoefficients) -> SmootherRun:
    return _two_filter(traj, design, robust=True)


def rts_smoother(traj: Trajectory, design: SystemCoefficients, robust: bool = False) -> SmootherRun:
    """Rauch-Tung-Striebel form of the same smoother (cross-check for the two-filter form)."""
    theta = _check_theta(traj)
    n = theta.shape[-1]
    if n < MIN_SMOOTHER_STEPS:
        raise DegenerateIntervalError(f"need at least {MIN_SMOOTHER_STEPS} steps, got {n}")
    fwd = _filter(traj, design, robust)
    a, c, ksq, kappa = _design(design, robust)
    P_post, P_pred, _, _ = _forward_riccati(a, c, ksq, kappa, traj.dt, n, stationary_prior(design))
    F = 1.0 + a * traj.dt
    x_s = np.empty_like(theta)
    P_s = np.empty(n)
    x_s[..., -1] = fwd.estimate[..., -1]
    P_s[-1] = P_post[-1]
    for k in range(n - 2, -1, -1):
        G = P_post[k] * F / P_pred[k + 1]
        x_s[..., k] = fwd.estimate[..., k] + G * (x_s[..., k + 1] - F * fwd.estimate[..., k])
        P_s[k] = P_post[k] + G * G * (P_s[k + 1] - P_pred[k + 1])
    return SmootherRun(estimate=x_s, variance=P_s, window_mse=_window_mse(traj, x_s), filtered=fwd)


class CausalFilter:
    """Streaming form of the Kalman / robust filter for the feedback loop.

    ``estimate`` is the prediction for the sample about to arrive; calling
    ``update`` with that sample advances one step.
    """

    def __init__(self, design: SystemCoefficients, dt: float, robust: bool = False):
        self.a, self.c, self.ksq, self.kappa = _design(design, robust)
        self.dt = dt
        self.P0 = stationary_prior(design)
        self.reset(())

    def reset(self, shape=()):
        self.x = np.zeros(shape)
        self.P = self.P0
        self.step = 0

    @property
    def estimate(self):
        return self.x

    def update(self, theta_k):
        dt = self.dt
        F = 1.0 + self.a * dt
        if self.P == 0.0:
            x_post, P_post = self.x, 0.0
        else:
            J = 1.0 / self.P + (self.c * self.c - self.ksq) * dt
            if not J > 0.0:
                raise RiccatiBlowupError(f"feedback filter escaped at step {self.step}", step=self.step)
            P_post = 1.0 / J
            x_post = P_post * (self.x / self.P + self.c * dt * np.asarray(theta_k))
        self.x = F * x_post
        self.P = F * F * P_post + self.kappa * dt
        self.step += 1
        return x_post


# ---------------------------------------------------------------------------
# Steady state and the sigma_f^2 <-> R_sq fixed point


def steady_filter_variance(design: SystemCoefficients, robust: bool = False) -> float:
    """Positive root of the continuous algebraic Riccati equation
    2 a P + kappa - P^2 (c^2 - ksq) = 0, written as kappa / (sqrt(a^2 + kappa d) - a)
    to avoid cancellation.  ``robust=False`` ignores K.
    """
    if not design.c_nom > 0:
        raise DomainError(f"c_nom must be positive, got {design.c_nom}")
    kappa = design.kappa
    if kappa == 0:
        return 0.0
    a = design.a_nom
    d = design.c_nom ** 2 - (design.ksq if robust else 0.0)
    disc = a * a + kappa * d
    if disc < 0:
        raise RiccatiBlowupError(f"no stabilizing steady solution (a^2 + kappa d = {disc:.6g} < 0)")
    return kappa / (math.sqrt(disc) - a)


def realized_filter_mse(design: SystemCoefficients, robust: bool = False) -> float:
    """Steady E[(phi - phi_hat)^2] of the nominal-designed filter running on the true system.

    Solves the Lyapunov equation of the joint (phi, phi_hat) diffusion.
    """
    P = steady_filter_variance(design, robust)
    ksq = design.ksq if robust else 0.0
    if P == 0.0:
        return 0.0
    gain = P * design.c_nom
    A = np.array([[design.a_true, 0.0],
                  [gain * design.c_true, design.a_nom - gain * design.c_nom + P * ksq]])
    noise = np.diag([design.kappa, gain * gain])
    cov = solve_continuous_lyapunov(A, -noise)
    return float(cov[0, 0] - 2.0 * cov[0, 1] + cov[1, 1])


@dataclass(frozen=True)
class FixedPointResult:
    sigma_f2: float
    R_sq: float
    iterations: int
    residual: float
    history: tuple = ()
    damped: bool = False


def _fixed_point_map(params, unc, which, dynamics):
    robust = which == "robust"
    if which not in ("optimal", "robust"):
        raise ValueError(f"which must be 'optimal' or 'robust', got {which!r}")
    if dynamics not in ("nominal", "true"):
        raise ValueError(f"dynamics must be 'nominal' or 'true', got {dynamics!r}")

    def f(sigma_f2):
        R = compute_R_sq(sigma_f2, params.r_m, params.r_p)
        coeffs = build_coefficients(params, unc, R)
        if dynamics == "nominal":
            return steady_filter_variance(coeffs, robust), R
        return realized_filter_mse(coeffs, robust), R

    return f


def solve_sigma_f_fixed_point(params: PhysicalParams, unc: UncertaintySpec, which: Which = "optimal",
                              initial: float = 0.0, dynamics: str = "nominal",
                              tol: float = 1e-6, max_iter: int = 100) -> FixedPointResult:
    """Iterate sigma_f2 <- steady filter variance under R_sq(sigma_f2).

    Stops once successive iterates differ by less than ``tol``, then keeps
    iterating to machine precision so the returned pair satisfies both the
    noise law and the Riccati equation tightly.  If plain iteration stalls for
    ``max_iter`` steps, a 0.5-damped iteration gets another ``max_iter``.
    ``dynamics='true'`` replaces the design variance by the realized error of
    the nominal filter on the perturbed system.
    """
    f = _fixed_point_map(params, unc, which, dynamics)
    history = []
    x = float(initial)
    residual = math.inf
    iterations = 0
    damped = False
    relax = 1.0
    for relax in (1.0, 0.5):
        for _ in range(max_iter):
            fx, R = f(x)
            history.append((x, R))
            iterations += 1
            x_new = x + relax * (fx - x)
            residual = abs(x_new - x)
            x = x_new
            if residual < tol:
                break
        if residual < tol:
            break
        damped = True
    else:
        raise FixedPointError(f"sigma_f2 iteration did not converge (residual {residual:.3g})")

    # polish: the converged iteration contracts, so continue to machine precision
    for _ in range(200):
        fx, _ = f(x)
        step = abs(fx - x)
        x = x + relax * (fx - x)
        if step <= 4 * np.finfo(float).eps * max(abs(x), 1e-300):
            break
    return FixedPointResult(sigma_f2=x, R_sq=compute_R_sq(x, params.r_m, params.r_p),
                            iterations=iterations, residual=residual, history=tuple(history),
                            damped=damped)
