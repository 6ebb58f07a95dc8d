"""Physical parameters, uncertainty description and scalar state-space coefficients.

The phase follows an Ornstein-Uhlenbeck process

    dphi/dt = -lam * phi + sqrt(kappa) * nu

and is observed through the scaled homodyne record

    theta = (2 |alpha| / sqrt(R_sq)) * phi + omega,

where R_sq blends squeezed and anti-squeezed noise according to the
mean-square filtered error sigma_f2.  Parametric uncertainty enters through
the gain K = (k1, k2) and the realized perturbations (delta1, delta2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# default operating point
LAMBDA = 5.9e4
KAPPA = 1.9e4
ALPHA_SQ = 1.0e6
R_M = 0.36
R_P = 0.59


@dataclass(frozen=True)
class PhysicalParams:
    """Beam and phase-noise constants.

    ``lam`` is in rad/s, ``kappa`` is stored with the unit label rad/s used by
    the experiment it comes from, ``alpha_mag`` is |alpha| in s^-1/2.
    """

    lam: float = LAMBDA
    kappa: float = KAPPA
    alpha_mag: float = math.sqrt(ALPHA_SQ)
    r_m: float = R_M
    r_p: float = R_P

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be non-negative, got {self.kappa}")
        if not self.alpha_mag > 0:
            raise DomainError(f"alpha_mag must be positive, got {self.alpha_mag}")
        if not 0 <= self.r_m <= self.r_p:
            raise DomainError(f"need 0 <= r_m <= r_p, got r_m={self.r_m}, r_p={self.r_p}")

    @property
    def coherent(self) -> "PhysicalParams":
        """Same beam without squeezing (r_m = r_p = 0)."""
        return PhysicalParams(self.lam, self.kappa, self.alpha_mag, 0.0, 0.0)


@dataclass(frozen=True)
class UncertaintySpec:
    mu: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0

    def __post_init__(self):
        if not 0 <= self.mu < 1:
            raise DomainError(f"mu must lie in [0, 1), got {self.mu}")
        if not (abs(self.delta1) <= 1 and abs(self.delta2) <= 1):
            raise DomainError(f"|delta| must be <= 1, got ({self.delta1}, {self.delta2})")

    @property
    def nominal(self) -> "UncertaintySpec":
        return UncertaintySpec(self.mu, 0.0, 0.0)


@dataclass(frozen=True)
class SqueezedNoise:
    sigma_f2: float
    R_sq: float

    @classmethod
    def from_sigma(cls, sigma_f2, r_m, r_p):
        return cls(sigma_f2, compute_R_sq(sigma_f2, r_m, r_p))


@dataclass(frozen=True)
class SystemCoefficients:
    """Nominal and perturbed scalar coefficients plus the uncertainty gain.

    ``a_*`` are process poles, ``b`` is the process-noise gain sqrt(kappa),
    ``c_*`` are measurement gains.  ``R_sq`` is kept so the homodyne current
    can be rebuilt from theta.
    """

    a_nom: float
    b: float
    c_nom: float
    k1: float
    k2: float
    a_true: float
    c_true: float
    R_sq: float = 1.0

    @property
    def alpha_mag(self) -> float:
        return 0.5 * self.c_nom * math.sqrt(self.R_sq)

    @property
    def kappa(self) -> float:
        return self.b * self.b

    @property
    def ksq(self) -> float:
        """K'K = k1^2 + k2^2."""
        return self.k1 * self.k1 + self.k2 * self.k2


@dataclass(frozen=True)
class IqcBudget:
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs


def compute_R_sq(sigma_f2, r_m, r_p):
    """Effective measurement-noise power for a mean-square feedback error sigma_f2.

    Affine in ``sigma_f2``: the anti-squeezed quadrature leaks in with weight
    sigma_f2, the squeezed one carries the remainder.
    """
    if sigma_f2 < 0:
        raise DomainError(f"sigma_f2 must be non-negative, got {sigma_f2}")
    if not 0 <= r_m <= r_p:
        raise DomainError(f"need 0 <= r_m <= r_p, got r_m={r_m}, r_p={r_p}")
    return sigma_f2 * math.exp(2.0 * r_p) + (1.0 - sigma_f2) * math.exp(-2.0 * r_m)


def build_coefficients(params: PhysicalParams, unc: UncertaintySpec, R_sq: float) -> SystemCoefficients:
    if not R_sq > 0:
        raise DomainError(f"R_sq must be positive, got {R_sq}")
    lam, kappa, alpha = params.lam, params.kappa, params.alpha_mag
    mu = unc.mu
    sqrt_R = math.sqrt(R_sq)
    b = math.sqrt(kappa)
    c_nom = 2.0 * alpha / sqrt_R
    if mu == 0:
        k1 = 0.0
    elif kappa > 0:
        k1 = -mu * lam / b
    else:
        # kappa -> 0 limit; sqrt(kappa) * k1 = -mu * lam stays finite
        k1 = -math.inf
    k2 = 2.0 * mu * alpha / sqrt_R
    return SystemCoefficients(
        a_nom=-lam,
        b=b,
        c_nom=c_nom,
        k1=k1,
        k2=k2,
        a_true=-lam * (1.0 + mu * unc.delta1),
        c_true=c_nom * (1.0 + mu * unc.delta2),
        R_sq=R_sq,
    )


def iqc_check(phi, nu, omega, unc, coeffs: SystemCoefficients, dt: float) -> IqcBudget:
    """Evaluate the integral quadratic constraint on a sampled signal set.

    With w = delta1*k1*phi + nu, v = delta2*k2*phi + omega and z = K phi the
    constraint reads  int (w^2 + v^2) dt <= 1 + int |z|^2 dt.  ``unc`` only
    needs ``delta1`` and ``delta2`` attributes, so out-of-set perturbations can
    be probed.  Integrals use the trapezoid rule.
    """
    phi = np.asarray(phi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if not (phi.shape == nu.shape == omega.shape):
        raise ValueError(f"series lengths differ: {phi.shape}, {nu.shape}, {omega.shape}")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    k1 = coeffs.k1
    w = unc.delta1 * k1 * phi + nu
    v = unc.delta2 * coeffs.k2 * phi + omega
    z_sq = (k1 * phi) ** 2 + (coeffs.k2 * phi) ** 2
    lhs = float(np.trapezoid(w * w + v * v, dx=dt))
    rhs = 1.0 + float(np.trapezoid(z_sq, dx=dt))
    return IqcBudget(lhs, rhs)
