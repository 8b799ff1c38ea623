import math
from types import SimpleNamespace

import numpy as np
import pytest

from nsstab.constants import ConstantPack, build_schedule
from nsstab.dynamics import LatchedFeedback, ScheduledFeedback, simulate
from nsstab.experiments import (
    calibrate_small_time_basin,
    fit_cost_curve,
    random_low_mode_state,
    run_null_control,
    run_rapid_stab,
    run_small_time,
)


@pytest.fixture(scope="module")
def small_setup(square16, pack_schedule):
    s = dict(square16)
    s["pack"] = pack_schedule
    return s


def test_random_state_is_low_mode_and_normalized():
    x = random_low_mode_state(24, 0.5, seed=3)
    assert np.linalg.norm(x) == pytest.approx(0.5, rel=1e-12)
    assert np.all(x[8:] == 0.0)
    assert np.array_equal(x, random_low_mode_state(24, 0.5, seed=3))
    assert np.all(random_low_mode_state(24, 0.0, seed=3) == 0.0)


def test_rapid_stab_zero_state_flagged(square16, pack_schedule):
    report = run_rapid_stab(
        square16["basis"], square16["tensor"], square16["gram"], pack_schedule,
        float(square16["basis"].eigenvalues[3]), y0_scale=0.0, seed=0,
    )
    assert report.trivial
    assert math.isnan(report.rate_lyapunov) and math.isnan(report.rate_norm)


def test_rapid_stab_cutoff_comparison(square16, pack_rapid):
    basis = square16["basis"]
    report = run_rapid_stab(
        basis, square16["tensor"], square16["gram"], pack_rapid,
        float(basis.eigenvalues[3]), y0_scale=0.5, cutoff=True, seed=1,
    )
    assert report.control_stayed_below_radius
    assert report.cutoff_matches_linear
    assert report.basin == report.params.cutoff_radius**2


def test_null_control_zero_state(small_setup):
    report = run_null_control(
        small_setup["basis"], small_setup["tensor"], small_setup["gram"],
        small_setup["pack"], 1, y0_norm=0.0, n_max=4, seed=0,
    )
    assert report.cost == 0.0
    assert report.null_reached and report.latch_time == 0.0
    assert report.final_relative_norm == 0.0


def test_null_control_requires_norm_in_practical_mode(small_setup):
    with pytest.raises(ValueError, match="practical"):
        run_null_control(
            small_setup["basis"], small_setup["tensor"], small_setup["gram"],
            small_setup["pack"], 1, n_max=4,
        )


def test_null_control_sampling_covers_intervals(small_setup):
    report = run_null_control(
        small_setup["basis"], small_setup["tensor"], small_setup["gram"],
        small_setup["pack"], 1, y0_norm=1e-3, n_max=4, seed=2,
    )
    sched = report.schedule
    counts = np.diff(np.rint(np.append(sched.start_times, sched.period) / report.dt))
    assert np.all(counts >= 8)
    assert len(report.interval_norms) == sched.n_max + 3


def test_null_control_restart_reproduces_tail(small_setup):
    basis, tensor, gram = small_setup["basis"], small_setup["tensor"], small_setup["gram"]
    pack = small_setup["pack"]
    sched = build_schedule(1, pack, basis, 4)
    dt = 2.0**-11
    y0 = random_low_mode_state(basis.n_modes, 1e-3, seed=4)
    law = ScheduledFeedback(sched)
    full = simulate(y0, law, 0.0, sched.period, dt, basis, tensor, gram)
    t1 = float(sched.start_times[1])
    idx = int(round(t1 / dt))
    resumed = simulate(full.states[idx], ScheduledFeedback(sched), t1, sched.period,
                       dt, basis, tensor, gram)
    assert np.abs(resumed.states - full.states[idx:]).max() <= 1e-10


def test_null_control_cutoff_respects_feedback_norm_constraint(small_setup):
    report = run_null_control(
        small_setup["basis"], small_setup["tensor"], small_setup["gram"],
        small_setup["pack"], 1, y0_norm=1e-3, n_max=4, cutoff=True, seed=5,
    )
    traj = report.trajectory
    limit = np.minimum(1.0, np.sqrt(2.0 * traj.norm_h))
    assert np.all(traj.control_norm <= limit + 1e-12)


def test_null_control_certified_arithmetic_path(square16):
    pack = ConstantPack.certified(1.0, 1.0)
    for cutoff in (False, True):
        report = run_null_control(
            square16["basis"], square16["tensor"], square16["gram"], pack, 1,
            n_max=6, cutoff=cutoff,
        )
        assert report.basin_below_precision
        assert report.trajectory is None
        assert report.state_bound_ok is not None and report.state_bound_ok.all()
        assert math.isnan(report.cost)
    # the cutoff basin is the square of the linear one (in logs: doubled)
    linear = run_null_control(square16["basis"], square16["tensor"], square16["gram"],
                              pack, 1, n_max=6)
    squared = run_null_control(square16["basis"], square16["tensor"], square16["gram"],
                               pack, 1, n_max=6, cutoff=True)
    assert squared.log_basin == pytest.approx(2.0 * linear.log_basin, rel=1e-14)


def test_latched_feedback_shuts_off(small_setup):
    basis, tensor, gram = small_setup["basis"], small_setup["tensor"], small_setup["gram"]
    sched = build_schedule(1, small_setup["pack"], basis, 4)
    y0 = random_low_mode_state(basis.n_modes, 1e-3, seed=6)
    law = LatchedFeedback(ScheduledFeedback(sched), 0.5e-3)
    traj = simulate(y0, law, 0.0, sched.period, 2.0**-11, basis, tensor, gram)
    assert law.latched
    after = traj.times >= law.latch_time
    assert np.all(traj.control_norm[after] == 0.0)


def test_small_time_probe(small_setup):
    period = 0.5
    probe = run_small_time(
        small_setup["basis"], small_setup["tensor"], small_setup["gram"],
        small_setup["pack"], 1, 1e-3, [0.0, period / 3.0], n_max=4, seed=7,
    )
    assert probe.two_period_ok
    assert probe.feedback_bound_ok
    assert np.all(np.diff(probe.delta_table) >= 0.0)
    assert len(probe.trajectories) == 2


def test_small_time_zero_state_stays_zero(small_setup):
    probe = run_small_time(
        small_setup["basis"], small_setup["tensor"], small_setup["gram"],
        small_setup["pack"], 1, 0.0, [0.0], n_max=4, eta_grid=np.array([]), seed=0,
    )
    assert probe.two_period_ok
    assert np.all(probe.trajectories[0].states == 0.0)


def test_rapid_stab_bound_check_is_scale_covariant(square16, pack_rapid):
    # both sides of the pointwise envelope scale linearly in the initial
    # norm, so shrinking the start inside the basin never flips the verdict
    basis = square16["basis"]
    lam = float(basis.eigenvalues[3])
    for scale in (0.5, 0.05):
        report = run_rapid_stab(
            basis, square16["tensor"], square16["gram"], pack_rapid,
            lam, y0_scale=scale, seed=1,
        )
        assert report.state_bound_ok and report.control_bound_ok


def test_small_time_rejects_single_period(small_setup):
    with pytest.raises(ValueError):
        run_small_time(
            small_setup["basis"], small_setup["tensor"], small_setup["gram"],
            small_setup["pack"], 1, 1e-3, [0.0], periods=1, n_max=4,
        )


def test_calibrate_basin_returns_hi_when_everything_passes(small_setup):
    value = calibrate_small_time_basin(
        small_setup["basis"], small_setup["tensor"], small_setup["gram"],
        small_setup["pack"], 1, hi=1e-3, n_max=4,
    )
    assert value == 1e-3


def test_fit_cost_curve_trivial_oracles():
    def fake(period, cost):
        return SimpleNamespace(period=period, cost=cost, y0_norm=1.0)

    constant = [fake(0.5, 2.0), fake(0.25, 2.0), fake(0.125, 2.0)]
    slope, intercept = fit_cost_curve(constant)
    assert slope == pytest.approx(0.0, abs=1e-12)
    assert intercept == pytest.approx(math.log(2.0), rel=1e-12)

    a = 0.7
    synthetic = [fake(T, math.exp(a / T)) for T in (0.5, 0.25, 0.125)]
    slope, intercept = fit_cost_curve(synthetic)
    assert slope == pytest.approx(a, abs=1e-10)
    assert intercept == pytest.approx(0.0, abs=1e-10)

    with pytest.raises(ValueError):
        fit_cost_curve(constant[:2])
