"""Run configuration and its flat ``key = value`` text format."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

from .evaluate import delta_grid
from .model import ALPHA_SQ, KAPPA, LAMBDA, R_M, R_P, PhysicalParams, UncertaintySpec
from .simulate import SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # physical parameters
    lam: float = LAMBDA
    kappa: float = KAPPA
    alpha_mag: float = math.sqrt(ALPHA_SQ)
    r_m: float = R_M
    r_p: float = R_P
    # simulation grid
    dt: float = 1e-8
    t_end: float = 2e-4
    seed: int = 0
    explicit_feedback: bool = False
    exact_ou: bool = False
    # sweep
    mu_list: tuple = (0.2, 0.4)
    delta_min: float = -1.0
    delta_max: float = 1.0
    delta_count: int = 5
    delta_list: Optional[tuple] = None
    diagonal: bool = False
    n_paths: int = 200
    refit_per_cell: bool = False
    feedback_filter: str = "matched"
    threads: int = 1
    out_dir: str = "out"
    emit_plots: bool = False
    # single-trajectory dump and oracle check
    traj_mu: float = 0.0
    traj_delta1: float = 0.0
    traj_delta2: float = 0.0
    oracle_steps: int = 100
    # stress override of K'K for the robust oracle check (mu < 1 never loses definiteness)
    oracle_ksq: Optional[float] = None

    def __post_init__(self):
        if self.feedback_filter not in ("matched", "optimal", "robust"):
            raise ConfigError(f"feedback_filter must be matched, optimal or robust, got {self.feedback_filter!r}")
        if self.n_paths < 2:
            raise ConfigError(f"n_paths must be >= 2, got {self.n_paths}")
        if self.delta_count < 1:
            raise ConfigError(f"delta_count must be >= 1, got {self.delta_count}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not 2 <= self.oracle_steps <= 2000:
            raise ConfigError(f"oracle_steps must lie in [2, 2000], got {self.oracle_steps}")
        try:
            self.params()
            self.sim()
            for mu in self.mu_list:
                UncertaintySpec(mu)
            UncertaintySpec(self.traj_mu, self.traj_delta1, self.traj_delta2)
            for d1, d2 in self.delta_grid():
                UncertaintySpec(0.0, d1, d2)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def params(self) -> PhysicalParams:
        return PhysicalParams(self.lam, self.kappa, self.alpha_mag, self.r_m, self.r_p)

    def sim(self) -> SimConfig:
        return SimConfig(self.dt, self.t_end, self.seed, self.explicit_feedback, self.exact_ou)

    def delta_grid(self) -> list:
        if self.delta_list is not None:
            return [tuple(p) for p in self.delta_list]
        return delta_grid(self.delta_min, self.delta_max, self.delta_count, self.diagonal)

    def to_text(self) -> str:
        lines = ["# robustphase run configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kinds = {f.name: f.default for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = _parse(key, value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
        return cls(**values)

    def replace(self, **changes) -> "RunConfig":
        return RunConfig(**{**asdict(self), **changes})


_BOOL_KEYS = {"explicit_feedback", "exact_ou", "diagonal", "refit_per_cell", "emit_plots"}
_INT_KEYS = {"seed", "delta_count", "n_paths", "threads", "oracle_steps"}
_STR_KEYS = {"feedback_filter", "out_dir"}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{_format(a)}:{_format(b)}" for a, b in value)
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(key, value):
    if key in _BOOL_KEYS:
        low = value.lower()
        if low not in ("true", "false"):
            raise ValueError(f"expected true/false, got {value!r}")
        return low == "true"
    if key in _INT_KEYS:
        return int(value, 0)
    if key in _STR_KEYS:
        return value
    if key == "mu_list":
        return tuple(float(v) for v in value.split(",") if v.strip())
    if key == "oracle_ksq":
        return None if value.lower() == "none" else float(value)
    if key == "delta_list":
        if value.lower() == "none":
            return None
        pairs = []
        for item in value.split(","):
            a, b = item.split(":")
            pairs.append((float(a), float(b)))
        return tuple(pairs)
    return float(value)
