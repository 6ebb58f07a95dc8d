import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import are_root
from robustphase.errors import DegenerateIntervalError, DomainError, FixedPointError, RiccatiBlowupError
from robustphase.estimators import (CausalFilter, interior_window, kalman_filter, optimal_smoother,
                                    realized_filter_mse, robust_filter, robust_smoother, rts_smoother,
                                    solve_sigma_f_fixed_point, steady_filter_variance)
from robustphase.model import PhysicalParams, UncertaintySpec, build_coefficients, compute_R_sq
from robustphase.simulate import SimConfig, Trajectory, simulate_measurement, simulate_ou


def _run(coeffs, cfg, paths=None):
    return simulate_measurement(simulate_ou(coeffs, cfg, paths=paths), coeffs, cfg, paths=paths)


@pytest.fixture
def design(beam):
    return build_coefficients(beam, UncertaintySpec(0.3, 0.0, 0.0), 0.6131671641082607)


def test_interior_window():
    assert interior_window(20000) == slice(5000, 15001)
    assert interior_window(10) == slice(3, 8)


def test_zero_record_gives_zero_estimates(design):
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(200))
    for run in (kalman_filter(traj, design), robust_filter(traj, design)):
        assert np.all(run.estimate == 0.0)
    for sm in (optimal_smoother(traj, design), robust_smoother(traj, design)):
        assert np.all(sm.estimate == 0.0) and sm.window_mse is None


def test_missing_record_rejected(design):
    with pytest.raises(ValueError):
        kalman_filter(Trajectory(dt=1e-8, phi=np.zeros(20), theta=None), design)


# --- steady state --------------------------------------------------------------------

def test_coherent_steady_variance(beam):
    co = build_coefficients(beam.coherent, UncertaintySpec(), 1.0)
    P = steady_filter_variance(co)
    assert P == pytest.approx(are_root(beam.lam, beam.kappa, 2000.0), rel=1e-12)
    assert P == pytest.approx(5.573e-2, rel=1e-3)


def test_steady_special_cases(beam):
    co = build_coefficients(PhysicalParams(kappa=0.0), UncertaintySpec(), 1.0)
    assert steady_filter_variance(co) == 0.0
    # marginal drift: P = sqrt(kappa) / c
    co = replace(build_coefficients(beam, UncertaintySpec(), 1.0), a_nom=0.0)
    assert steady_filter_variance(co) == pytest.approx(math.sqrt(beam.kappa) / 2000.0, rel=1e-14)
    with pytest.raises(DomainError):
        steady_filter_variance(replace(co, c_nom=0.0))
    with pytest.raises(RiccatiBlowupError):
        steady_filter_variance(replace(co, k1=0.0, k2=1e4), robust=True)


@given(st.floats(1e3, 1e6), st.floats(1e2, 1e6), st.floats(10.0, 1e4), st.floats(0, 0.95))
def test_are_residual(lam, kappa, alpha, mu):
    p = PhysicalParams(lam=lam, kappa=kappa, alpha_mag=alpha)
    co = build_coefficients(p, UncertaintySpec(mu), 0.8)
    for robust in (False, True):
        P = steady_filter_variance(co, robust)
        d = co.c_nom ** 2 - (co.ksq if robust else 0.0)
        assert abs(2 * co.a_nom * P + kappa - d * P * P) <= 1e-9 * kappa
        assert P > 0


@given(st.floats(0, 0.95))
def test_robust_steady_dominates(mu):
    co = build_coefficients(PhysicalParams(), UncertaintySpec(mu), 0.6)
    assert steady_filter_variance(co, robust=True) >= steady_filter_variance(co)


def test_riccati_converges_to_steady(design):
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(20000))
    for robust in (False, True):
        run = (robust_filter if robust else kalman_filter)(traj, design)
        P = run.steady_sigma_f2
        d = design.c_nom ** 2 - (design.ksq if robust else 0.0)
        # exact fixed point of the discrete information recursion
        F, Q, dt = 1 + design.a_nom * 1e-8, design.kappa * 1e-8, 1e-8
        assert 1.0 / (1.0 / (F * F * P + Q) + d * dt) == pytest.approx(P, rel=1e-12)
        # and O(dt sqrt(a^2 + kappa d)) away from the continuous root
        rate = math.sqrt(design.a_nom ** 2 + design.kappa * d)
        assert abs(P / steady_filter_variance(design, robust) - 1) < 2 * dt * rate
        assert np.all(run.variance > 0)


def test_mc_filter_mse_matches_riccati(beam):
    co = build_coefficients(beam, UncertaintySpec(), 0.6131671641082607)
    cfg = SimConfig(t_end=1e-4, seed=12)
    traj = _run(co, cfg, paths=range(200))
    run = kalman_filter(traj, co)
    err = np.mean((traj.phi - run.estimate)[:, 5000:] ** 2, axis=-1)
    mean, se = err.mean(), err.std(ddof=1) / math.sqrt(len(err))
    assert abs(mean - run.steady_sigma_f2) < 3 * se


def test_mu_zero_robust_equals_kalman(beam):
    co = build_coefficients(beam, UncertaintySpec(0.0, 0.5, -0.5), 0.6)
    traj = _run(co, SimConfig(t_end=2e-6, seed=4))
    np.testing.assert_allclose(robust_filter(traj, co).estimate, kalman_filter(traj, co).estimate, rtol=1e-12)
    a, b = robust_smoother(traj, co).estimate, optimal_smoother(traj, co).estimate
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


# --- smoothers -----------------------------------------------------------------------

def test_smoothed_variance_below_filtered(design):
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(400))
    for robust in (False, True):
        sm = (robust_smoother if robust else optimal_smoother)(traj, design)
        assert np.all(sm.variance <= sm.filtered.variance * (1 + 1e-12))
        assert sm.variance[-1] == pytest.approx(sm.filtered.variance[-1], rel=1e-12)
        assert np.all(sm.variance[:-50] < sm.filtered.variance[:-50])


@pytest.mark.parametrize("robust", [False, True])
def test_two_filter_matches_rts(design, robust):
    traj = _run(design, SimConfig(t_end=5e-6, seed=9), paths=range(3))
    two = (robust_smoother if robust else optimal_smoother)(traj, design)
    rts = rts_smoother(traj, design, robust=robust)
    scale = np.max(np.abs(rts.estimate))
    assert np.max(np.abs(two.estimate - rts.estimate)) <= 1e-9 * scale
    np.testing.assert_allclose(two.variance, rts.variance, rtol=1e-9)


def test_steady_smoother_variance(beam):
    co = build_coefficients(beam, UncertaintySpec(), 0.6)
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(20000))
    sm = optimal_smoother(traj, co)
    lam, kappa, c = beam.lam, beam.kappa, co.c_nom
    assert sm.variance[10000] == pytest.approx(kappa / (2 * math.sqrt(lam * lam + kappa * c * c)), rel=1e-3)


def test_degenerate_interval(design):
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(5))
    with pytest.raises(DegenerateIntervalError):
        optimal_smoother(traj, design)
    with pytest.raises(DegenerateIntervalError):
        rts_smoother(traj, design)


def test_riccati_escape_reports_step(design):
    # K'K far above c^2 makes the information form lose positivity
    bad = replace(design, k1=0.0, k2=10 * design.c_nom)
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(2000))
    with pytest.raises(RiccatiBlowupError) as info:
        robust_filter(traj, bad)
    assert info.value.step is not None and 0 <= info.value.step < 2000
    with pytest.raises(RiccatiBlowupError):
        robust_smoother(traj, bad)


def test_robust_riccati_stays_bounded_below_unit_mu(beam):
    # a^2 + kappa (c^2 - K'K) = (1 - mu^2)(lam^2 + kappa c^2) > 0
    co = build_coefficients(beam, UncertaintySpec(0.95), 0.6)
    assert co.a_nom ** 2 + co.kappa * (co.c_nom ** 2 - co.ksq) == pytest.approx(
        (1 - 0.95 ** 2) * (beam.lam ** 2 + beam.kappa * co.c_nom ** 2), rel=1e-10)
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(20000))
    assert np.isfinite(robust_smoother(traj, co).variance).all()


def test_causal_filter_matches_batch(design):
    cfg = SimConfig(t_end=1e-6, seed=3)
    traj = _run(design, cfg)
    for robust in (False, True):
        run = (robust_filter if robust else kalman_filter)(traj, design)
        cf = CausalFilter(design, cfg.dt, robust=robust)
        preds, posts = [], []
        for th in traj.theta:
            preds.append(float(cf.estimate))
            posts.append(float(cf.update(th)))
        np.testing.assert_allclose(preds, run.predicted, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(posts, run.estimate, rtol=1e-12, atol=1e-15)


# --- sigma_f^2 fixed point -------------------------------------------------------------

def test_coherent_fixed_point(beam):
    fp = solve_sigma_f_fixed_point(beam.coherent, UncertaintySpec())
    assert all(R == 1.0 for _, R in fp.history)
    assert fp.R_sq == 1.0
    assert fp.sigma_f2 == pytest.approx(are_root(beam.lam, beam.kappa, 2000.0), rel=1e-12)


@pytest.mark.parametrize("which", ["optimal", "robust"])
@pytest.mark.parametrize("mu", [0.0, 0.2, 0.4])
def test_fixed_point_is_consistent(beam, which, mu):
    fp = solve_sigma_f_fixed_point(beam, UncertaintySpec(mu), which)
    co = build_coefficients(beam, UncertaintySpec(mu), fp.R_sq)
    assert fp.R_sq == compute_R_sq(fp.sigma_f2, beam.r_m, beam.r_p)
    assert steady_filter_variance(co, which == "robust") == pytest.approx(fp.sigma_f2, rel=1e-12)
    assert fp.residual < 1e-6 and not fp.damped
    other = solve_sigma_f_fixed_point(beam, UncertaintySpec(mu), which, initial=1.0)
    assert other.sigma_f2 == pytest.approx(fp.sigma_f2, rel=1e-12)


def test_squeezing_helps(beam):
    sq = solve_sigma_f_fixed_point(beam, UncertaintySpec())
    coh = solve_sigma_f_fixed_point(beam.coherent, UncertaintySpec())
    assert sq.sigma_f2 < coh.sigma_f2
    assert sq.R_sq < 1.0


def test_fixed_point_damping_and_failure(beam):
    fp = solve_sigma_f_fixed_point(beam, UncertaintySpec(), max_iter=5)
    assert fp.damped
    assert fp.sigma_f2 == pytest.approx(solve_sigma_f_fixed_point(beam, UncertaintySpec()).sigma_f2, rel=1e-12)
    with pytest.raises(FixedPointError):
        solve_sigma_f_fixed_point(beam, UncertaintySpec(), max_iter=2)
    with pytest.raises(ValueError):
        solve_sigma_f_fixed_point(beam, UncertaintySpec(), which="median")
    with pytest.raises(ValueError):
        solve_sigma_f_fixed_point(beam, UncertaintySpec(), dynamics="actual")


def test_realized_mse_matched_equals_design(beam, design):
    nominal = build_coefficients(beam, UncertaintySpec(0.3), 0.6)
    assert realized_filter_mse(nominal) == pytest.approx(steady_filter_variance(nominal), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(-1, 1), st.floats(-1, 1))
def test_realized_mse_exceeds_matched_optimum(mu, d1, d2):
    # the Kalman filter built for the true system is the best linear filter
    p = PhysicalParams()
    co = build_coefficients(p, UncertaintySpec(mu, d1, d2), 0.6)
    matched = replace(co, a_nom=co.a_true, c_nom=co.c_true)
    assert realized_filter_mse(co) >= steady_filter_variance(matched) * (1 - 1e-9)


def test_true_dynamics_fixed_point(beam):
    unc = UncertaintySpec(0.4, -1.0, -1.0)
    fp = solve_sigma_f_fixed_point(beam, unc, "optimal", dynamics="true")
    co = build_coefficients(beam, unc, fp.R_sq)
    assert realized_filter_mse(co) == pytest.approx(fp.sigma_f2, rel=1e-10)


def test_riccati_settles_within_horizon(design):
    n = SimConfig().n_steps
    lag = round(1 / (design.a_nom * -1e-8))
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(n))
    for robust in (False, True):
        P = (robust_filter if robust else kalman_filter)(traj, design).variance
        assert abs(P[-1] - P[-1 - lag]) / P[-1] < 1e-6


def test_robust_riccati_dominates_pointwise(beam):
    traj = Trajectory(dt=1e-8, phi=None, theta=np.zeros(5000))
    for mu in (0.2, 0.4, 0.9):
        co = build_coefficients(beam, UncertaintySpec(mu), 0.6)
        assert np.all(robust_filter(traj, co).variance >= kalman_filter(traj, co).variance)


@pytest.mark.parametrize("robust", [False, True])
def test_halving_dt_moves_smoother_variance_below_mc_resolution(beam, robust):
    # matched case: the expected window MSE is the smoother variance, so compare it
    # deterministically against the 200-path standard error of about 5e-4 rad^2
    co = build_coefficients(beam, UncertaintySpec(0.4), 0.6131671641082607)
    mids = []
    for dt in (1e-8, 5e-9):
        n = round(2e-4 / dt)
        sm = (robust_smoother if robust else optimal_smoother)(Trajectory(dt, None, np.zeros(n)), co)
        mids.append(sm.variance[n // 2])
    assert abs(mids[0] - mids[1]) < 5e-5
