#!/usr/bin/env python3
"""Fixed points and steady errors, squeezed vs coherent beam, across mu."""

import math

from robustphase.estimators import solve_sigma_f_fixed_point
from robustphase.model import PhysicalParams, UncertaintySpec, build_coefficients


def steady_smoothed(params, R):
    co = build_coefficients(params, UncertaintySpec(), R)
    return params.kappa / (2 * math.sqrt(params.lam ** 2 + params.kappa * co.c_nom ** 2))


def main():
    print(f"{'beam':>9} {'mu':>4} {'branch':>8} {'sigma_f2':>12} {'R_sq':>10} {'iter':>4} {'sigma_s2 (mu=0)':>16}")
    for name, params in (("squeezed", PhysicalParams()), ("coherent", PhysicalParams().coherent)):
        for mu in (0.0, 0.2, 0.4):
            for which in ("optimal", "robust"):
                fp = solve_sigma_f_fixed_point(params, UncertaintySpec(mu), which)
                extra = f"{steady_smoothed(params, fp.R_sq):16.6g}" if mu == 0 and which == "optimal" else ""
                print(f"{name:>9} {mu:4g} {which:>8} {fp.sigma_f2:12.7g} {fp.R_sq:10.6g} {fp.iterations:4d}{extra}")


if __name__ == "__main__":
    main()
