#!/usr/bin/env python3
"""Push K'K past the definiteness limit and watch both sides fail together.

For a 100-step problem the forward Riccati escape and the loss of positive
definiteness of the batch quadratic are located by bisection over K'K and
printed side by side, along with the recursion/batch agreement below the limit.
"""

import argparse
import math
from dataclasses import replace

import numpy as np

from robustphase.errors import IndefiniteError, RiccatiBlowupError
from robustphase.estimators import robust_filter, robust_smoother, solve_sigma_f_fixed_point
from robustphase.model import PhysicalParams, UncertaintySpec, build_coefficients
from robustphase.oracle import BatchProblem, brute_force_robust
from robustphase.simulate import SimConfig, simulate_measurement, simulate_ou


def bisect(ok, lo=0.0, hi=1e10, steps=200):
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = PhysicalParams()
    R = solve_sigma_f_fixed_point(p, UncertaintySpec()).R_sq
    co = build_coefficients(p, UncertaintySpec(), R)
    cfg = SimConfig(1e-8, args.steps * 1e-8, args.seed)
    traj = simulate_measurement(simulate_ou(co, cfg), co, cfg)

    def design(ksq):
        return replace(co, k1=0.0, k2=math.sqrt(ksq))

    def filter_ok(ksq):
        try:
            robust_filter(traj, design(ksq))
            return True
        except RiccatiBlowupError:
            return False

    def batch_ok(ksq):
        try:
            brute_force_robust(BatchProblem.from_trajectory(traj, design(ksq), robust=True))
            return True
        except IndefiniteError:
            return False

    t_f, t_b = bisect(filter_ok), bisect(batch_ok)
    print(f"c^2                    = {co.c_nom ** 2:.6e}")
    print(f"K'K at mu = 0.4        = {build_coefficients(p, UncertaintySpec(0.4), R).ksq:.6e}")
    print(f"Riccati escape at K'K  = {t_f:.12e}")
    print(f"Hessian indefinite at  = {t_b:.12e}  (relative gap {abs(t_f - t_b) / t_b:.1e})")
    print("K'K / limit".rjust(12), "rms/scale".rjust(12))
    for frac in (0.0, 0.5, 0.9, 0.99, 0.999):
        d = design(frac * t_b)
        ref = brute_force_robust(BatchProblem.from_trajectory(traj, d, robust=True))
        est = robust_smoother(traj, d).estimate
        print(f"{frac:12g} {np.sqrt(np.mean((est - ref) ** 2)) / np.abs(ref).max():12.3e}")


if __name__ == "__main__":
    main()
