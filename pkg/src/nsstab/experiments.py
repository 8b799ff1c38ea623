"""Closed-loop experiments with measurable pass/fail bounds.

Three experiments mirror the three guarantees of the control design:

* rapid stabilization -- stationary modal feedback at a fixed threshold;
  measures the decay rate of the weighted energy and checks the pointwise
  exponential envelopes,
* null control -- the dyadic piecewise schedule over one period; measures
  per-interval norms, the control cost, and the cost bound exp(c3/T),
* small-time stabilization -- the periodic cutoff law over two periods from
  arbitrary start offsets, plus a uniform-stability probe.

Certified constant packs put the admissible initial data below double
precision (the basin scales like exp(-c3/T) with an astronomically large
c3); for those runs the null-control experiment degenerates by design to a
bound-arithmetic verification carried out in log space, and says so in the
report.  Practical packs produce observable dynamics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ConstantPack, FeedbackParams, Schedule, build_schedule, feedback_params
from .dynamics import (
    LatchedFeedback,
    ModalFeedback,
    ScheduledFeedback,
    Trajectory,
    simulate,
)
from .errors import BoundViolatedError, TwoPeriodFailedError
from .spectral import StokesBasis

logger = logging.getLogger(__name__)

#: initial data are spread isotropically over this many low modes
ACTIVE_INIT_MODES = 8

#: below this log-threshold a basin is unrepresentable in float64
LOG_PRECISION_FLOOR = math.log(1e-290)


def random_low_mode_state(n_modes: int, norm: float, seed: int) -> np.ndarray:
    """Seeded isotropic state on the first min(8, M) modes, given norm."""
    x = np.zeros(n_modes)
    if norm == 0.0:
        return x
    rng = np.random.default_rng(seed)
    active = min(ACTIVE_INIT_MODES, n_modes)
    g = rng.standard_normal(active)
    x[:active] = g * (norm / np.linalg.norm(g))
    return x


def default_dt(max_gain: float, tau_max: float) -> float:
    """Step-size heuristic: the control term is the remaining explicit stiffness."""
    return min(0.25 / max_gain, 0.1 / math.sqrt(tau_max))


def _dyadic_dt(max_gain: float, k_floor: int) -> float:
    """Largest power of two below the gain heuristic and 2**-k_floor."""
    k = max(k_floor, math.ceil(math.log2(max(max_gain, 1e-12) / 0.25)))
    return 2.0 ** (-k)


def _log_slope(times: np.ndarray, values: np.ndarray, skip_fraction: float = 0.05) -> float:
    """Least-squares slope of log(values) vs time, skipping the initial transient."""
    start = int(math.ceil(skip_fraction * len(times)))
    t = times[start:]
    v = values[start:]
    if len(t) < 2 or np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(t, np.log(v), 1)[0])


@dataclass
class RapidStabReport:
    """Outcome of a stationary-feedback stabilization run."""

    params: FeedbackParams
    y0_norm: float
    basin: float
    cutoff: bool
    dt: float
    horizon: float
    rate_lyapunov: float  # fitted decay rate of the weighted energy
    rate_norm: float  # fitted decay rate of the state norm
    state_bound_ok: bool  # ||y(t)|| <= c1 e^{c1 sqrt(lam)} e^{-lam t/4} ||y0||
    control_bound_ok: bool  # ||F y(t)|| <= c2 e^{c2 sqrt(lam)} e^{-lam t/4} ||y0||
    lyapunov_decay_ok: bool  # sampled dV/dt <= -(lam/2) V within tolerance
    basin_lyapunov: float  # V(y0)
    basin_lyapunov_bound: float  # (8 mu c0)^-2
    trivial: bool
    trajectory: Trajectory
    cutoff_trajectory: Trajectory | None = None
    cutoff_matches_linear: bool | None = None
    control_stayed_below_radius: bool | None = None

    @property
    def threshold(self) -> float:
        return self.params.threshold


def run_rapid_stab(
    basis: StokesBasis,
    tensor: np.ndarray,
    gram: np.ndarray,
    pack: ConstantPack,
    lam: float,
    y0_scale: float = 0.5,
    cutoff: bool = False,
    horizon: float | None = None,
    dt: float | None = None,
    seed: int = 0,
    nu: float = 1.0,
) -> RapidStabReport:
    """Close the loop with the stationary modal feedback at threshold lam.

    The initial norm is y0_scale times the cutoff radius (linear law) or its
    square (cutoff law).  With cutoff=True the run is performed twice, with
    and without the cutoff, and the trajectories are compared bitwise; they
    must coincide whenever the raw feedback never exceeds the radius.
    """
    params = feedback_params(lam, pack, basis)
    basin = params.cutoff_radius**2 if cutoff else params.cutoff_radius
    y0_norm = y0_scale * basin
    y0 = random_low_mode_state(basis.n_modes, y0_norm, seed)
    if dt is None:
        dt = default_dt(params.gain, float(basis.eigenvalues[-1]))
        logger.info("dt defaulted to %.3e (gain %.3e)", dt, params.gain)
    if horizon is None:
        horizon = 16.0 / lam
    n_steps = max(1, int(round(horizon / dt)))
    stride = max(1, n_steps // 1024)
    n_steps = ((n_steps + stride - 1) // stride) * stride
    horizon = n_steps * dt

    traj = simulate(
        y0, ModalFeedback(params, cutoff=False), 0.0, horizon, dt,
        basis, tensor, gram, nu=nu, sample_stride=stride,
    )
    trivial = y0_norm == 0.0

    rate_v = -_log_slope(traj.times, traj.lyapunov)
    rate_n = -_log_slope(traj.times, traj.norm_h)

    c1 = pack.spectral_constant
    c2 = pack.feedback_constant
    sqrt_lam = math.sqrt(lam)
    envelope = np.exp(-0.25 * lam * traj.times) * y0_norm
    state_bound_ok = bool(np.all(traj.norm_h <= c1 * math.exp(c1 * sqrt_lam) * envelope + 1e-300))
    n = params.n_active
    raw_control = params.gain * np.linalg.norm(traj.states[:, :n], axis=1)
    control_bound_ok = bool(np.all(raw_control <= c2 * math.exp(c2 * sqrt_lam) * envelope + 1e-300))

    # sampled Lyapunov decay: secant slope between samples, 5% slack
    dv = np.diff(traj.lyapunov) / np.diff(traj.times)
    lyap_ok = bool(np.all(dv <= -0.5 * lam * 0.95 * traj.lyapunov[:-1] + 1e-300))

    mu = params.weight
    c0 = pack.trilinear_constant
    basin_v = float(traj.lyapunov[0])
    basin_v_bound = 1.0 / (8.0 * mu * c0) ** 2

    report = RapidStabReport(
        params=params,
        y0_norm=y0_norm,
        basin=basin,
        cutoff=cutoff,
        dt=dt,
        horizon=horizon,
        rate_lyapunov=rate_v,
        rate_norm=rate_n,
        state_bound_ok=state_bound_ok,
        control_bound_ok=control_bound_ok,
        lyapunov_decay_ok=lyap_ok,
        basin_lyapunov=basin_v,
        basin_lyapunov_bound=basin_v_bound,
        trivial=trivial,
        trajectory=traj,
    )
    if trivial:
        report.rate_lyapunov = float("nan")
        report.rate_norm = float("nan")
    if cutoff:
        traj_cut = simulate(
            y0, ModalFeedback(params, cutoff=True), 0.0, horizon, dt,
            basis, tensor, gram, nu=nu, sample_stride=stride,
        )
        report.cutoff_trajectory = traj_cut
        report.cutoff_matches_linear = bool(np.array_equal(traj.states, traj_cut.states))
        report.control_stayed_below_radius = bool(np.all(raw_control <= params.cutoff_radius))
    return report


@dataclass
class NullControlReport:
    """Outcome of one dyadic-schedule null-control run.

    When the admissible basin of a certified pack underflows double
    precision, basin_below_precision is set, the dynamic fields are empty,
    and only the log-space bound arithmetic is reported.
    """

    n0: int
    period: float
    n_max: int
    mode: str
    cutoff: bool
    y0_norm: float
    log_basin: float  # ln of the admissible initial norm for this law
    basin_below_precision: bool
    schedule: Schedule
    dt: float = float("nan")
    cost: float = float("nan")
    cost_bound_ok: bool = True  # ln cost <= c3/T + ln ||y0||
    final_relative_norm: float = float("nan")
    null_reached: bool = False
    latch_time: float | None = None
    interval_times: np.ndarray | None = None  # T_0 .. T_{n_max+1}, then T
    interval_norms: np.ndarray | None = None  # ||y|| at those times
    interval_control_sup: np.ndarray | None = None  # sup ||f|| per interval
    state_bound_ok: np.ndarray | None = None  # per-interval norm bound table
    control_bound_ok: np.ndarray | None = None  # per-interval control bound table
    monotone_ok: np.ndarray | None = None  # ||y(T_{n+1})|| <= ||y(T_n)||, n >= 1
    trajectory: Trajectory | None = None

    @property
    def T(self) -> float:
        return self.period


def _schedule_skeleton(n0: int, pack: ConstantPack, n_max: int) -> Schedule:
    """Times and raw thresholds only, for bound arithmetic without a basis.

    Certified thresholds overrun any desk-scale basis, so the log-space
    verification path cannot ask :func:`build_schedule` for feedback data.
    """
    period = 2.0 ** (-n0)
    n = np.arange(n_max + 2)
    start_times = period * (1.0 - 0.5 ** n)
    q = pack.schedule_constant
    raw = q * q * 4.0 ** (n0 + np.arange(n_max + 1))
    return Schedule(
        n0=n0,
        period=period,
        n_max=n_max,
        start_times=start_times,
        thresholds_raw=raw,
        thresholds=raw.copy(),
        params=(),
        clamped=np.zeros(n_max + 1, dtype=bool),
    )


def _interval_norm_log_bounds(schedule: Schedule, q: float) -> np.ndarray:
    """ln of the per-interval norm envelope exp(-(7 q^2/64) 2^n0 (2^n - 1))."""
    n = np.arange(schedule.n_max + 2)
    return -(7.0 * q * q / 64.0) * 2.0**schedule.n0 * (2.0**n - 1.0)


def _interval_control_log_bounds(schedule: Schedule, q: float) -> np.ndarray:
    """ln of the control envelope exp(-(5 q^2/64) 2^(n0+n-1)) for n >= 1."""
    n = np.arange(1, schedule.n_max + 1)
    return -(5.0 * q * q / 64.0) * 2.0 ** (schedule.n0 + n - 1)


def run_null_control(
    basis: StokesBasis,
    tensor: np.ndarray,
    gram: np.ndarray,
    pack: ConstantPack,
    n0: int,
    y0_norm: float | None = None,
    n_max: int = 8,
    eps_zero: float = 1e-6,
    cutoff: bool = False,
    dt: float | None = None,
    seed: int = 0,
    nu: float = 1.0,
    enforce_bounds: bool | None = None,
) -> NullControlReport:
    """Steer the state toward zero over one period of the dyadic schedule.

    Certified packs fix the initial norm from the admissible basin
    exp(-c3/T) (exp(-2 c3/T) for the cutoff variant); practical packs take
    the caller's y0_norm.  The state is declared numerically null once its
    norm falls below eps_zero times the initial norm, after which the
    control is latched to zero.  With enforce_bounds (default: certified
    packs only) a violated per-interval bound raises BoundViolatedError.
    """
    period = 2.0 ** (-n0)
    q = pack.schedule_constant
    c3 = pack.cost_exponent
    log_basin = (-2.0 if cutoff else -1.0) * c3 / period
    if enforce_bounds is None:
        enforce_bounds = pack.mode == "certified"

    if pack.mode == "certified":
        below = log_basin < LOG_PRECISION_FLOOR
        if below:
            report = NullControlReport(
                n0=n0,
                period=period,
                n_max=n_max,
                mode=pack.mode,
                cutoff=cutoff,
                y0_norm=0.0 if y0_norm is None else y0_norm,
                log_basin=log_basin,
                basin_below_precision=below,
                schedule=_schedule_skeleton(n0, pack, n_max),
            )
            _verify_bound_arithmetic(report, pack)
            logger.info(
                "certified basin exp(%.4g) below float precision; "
                "bound arithmetic verified in log space, dynamics skipped",
                log_basin,
            )
            return report
        schedule = build_schedule(n0, pack, basis, n_max)
        if y0_norm is None:
            y0_norm = math.exp(log_basin)
        report = NullControlReport(
            n0=n0,
            period=schedule.period,
            n_max=n_max,
            mode=pack.mode,
            cutoff=cutoff,
            y0_norm=y0_norm,
            log_basin=log_basin,
            basin_below_precision=below,
            schedule=schedule,
        )
    else:
        schedule = build_schedule(n0, pack, basis, n_max)
        if y0_norm is None:
            raise ValueError("practical mode requires an explicit initial norm")
        report = NullControlReport(
            n0=n0,
            period=schedule.period,
            n_max=n_max,
            mode=pack.mode,
            cutoff=cutoff,
            y0_norm=y0_norm,
            log_basin=log_basin,
            basin_below_precision=False,
            schedule=schedule,
        )

    if dt is None:
        dt = _dyadic_dt(schedule.max_gain, n0 + n_max + 4)
        logger.info("dt defaulted to %.3e (max gain %.3e)", dt, schedule.max_gain)
    report.dt = dt
    y0 = random_low_mode_state(basis.n_modes, y0_norm, seed)
    controller = LatchedFeedback(
        ScheduledFeedback(schedule, cutoff=cutoff), eps_zero * y0_norm
    )
    traj = simulate(y0, controller, 0.0, schedule.period, dt, basis, tensor, gram, nu=nu)
    report.trajectory = traj
    report.latch_time = controller.latch_time
    report.null_reached = controller.latched

    times = np.append(schedule.start_times, schedule.period)
    idx = np.rint(times / dt).astype(int)
    report.interval_times = times
    report.interval_norms = traj.norm_h[idx]
    sup = np.empty(schedule.n_max + 1)
    for n in range(schedule.n_max + 1):
        sup[n] = traj.control_norm[idx[n] : idx[n + 1] + 1].max()
    report.interval_control_sup = sup
    report.cost = float(traj.control_norm.max())
    report.final_relative_norm = float(traj.norm_h[-1] / y0_norm) if y0_norm else 0.0

    with np.errstate(divide="ignore"):
        log_rel_norms = np.log(report.interval_norms[: schedule.n_max + 2]) - math.log(y0_norm) if y0_norm else np.full(schedule.n_max + 2, -np.inf)
    report.state_bound_ok = log_rel_norms <= _interval_norm_log_bounds(schedule, q) + 1e-12
    ctrl_bounds = _interval_control_log_bounds(schedule, q)
    with np.errstate(divide="ignore"):
        log_rel_ctrl = np.log(sup[1:]) - math.log(y0_norm) if y0_norm else np.full(schedule.n_max, -np.inf)
    report.control_bound_ok = log_rel_ctrl <= ctrl_bounds + 1e-12
    report.monotone_ok = report.interval_norms[2 : schedule.n_max + 2] <= report.interval_norms[1 : schedule.n_max + 1]
    log_cost = math.log(report.cost) if report.cost > 0 else -math.inf
    log_y0 = math.log(y0_norm) if y0_norm else -math.inf
    report.cost_bound_ok = bool(log_cost <= c3 / schedule.period + log_y0 + 1e-12)

    if enforce_bounds:
        for n in range(schedule.n_max + 2):
            if not report.state_bound_ok[n]:
                raise BoundViolatedError(
                    n, "interval norm", float(report.interval_norms[n]),
                    y0_norm * math.exp(_interval_norm_log_bounds(schedule, q)[n]),
                )
        for i, ok in enumerate(report.control_bound_ok):
            if not ok:
                raise BoundViolatedError(
                    i + 1, "interval control", float(sup[i + 1]),
                    y0_norm * math.exp(ctrl_bounds[i]),
                )
    return report


def _verify_bound_arithmetic(report: NullControlReport, pack: ConstantPack) -> None:
    """Log-space check of the bootstrap chain for an unrepresentable basin.

    Verifies that the admissible envelope stays inside the cutoff radii:

        ln(R_T) - (7 q^2/64) 2^n0 (2^n - 1) <= -q^2 2^(n0+n)/64 <= ln r_n

    for the linear law; the cutoff variant squares the radius and doubles
    both the basin exponent and the middle term.
    """
    schedule = report.schedule
    q = pack.schedule_constant
    c2 = pack.feedback_constant
    n = np.arange(schedule.n_max + 1)
    lhs = report.log_basin + _interval_norm_log_bounds(schedule, q)[:-1]
    mid_scale = 32.0 if report.cutoff else 64.0
    mid = -(q * q / mid_scale) * 2.0 ** (schedule.n0 + n)
    log_radius = -(np.log(c2) + c2 * np.sqrt(schedule.thresholds_raw))
    if report.cutoff:
        log_radius = 2.0 * log_radius
    ok = (lhs <= mid + 1e-12) & (mid <= log_radius + 1e-12)
    report.state_bound_ok = ok
    report.control_bound_ok = np.ones(schedule.n_max, dtype=bool)
    if not np.all(ok):
        first = int(np.argmin(ok))
        raise BoundViolatedError(first, "bootstrap envelope", float(lhs[first]), float(log_radius[first]))


@dataclass
class StabilityProbe:
    """Outcome of the periodic small-time stabilization experiment."""

    n0: int
    period: float
    y0_norm: float
    offsets: np.ndarray
    two_period_residuals: np.ndarray  # ||state(s + 2T)|| / ||y0|| per offset
    two_period_ok: bool
    feedback_bound_ok: bool  # ||U|| <= min(1, sqrt(2 ||y||)) at every sample
    eta_grid: np.ndarray
    delta_table: np.ndarray  # sup-over-time norm per eta (max over offsets)
    dt: float
    trajectories: list[Trajectory] = field(default_factory=list)


def _feedback_bound_satisfied(traj: Trajectory, slack: float = 1e-12) -> bool:
    limit = np.minimum(1.0, np.sqrt(2.0 * traj.norm_h))
    return bool(np.all(traj.control_norm <= limit + slack))


def run_small_time(
    basis: StokesBasis,
    tensor: np.ndarray,
    gram: np.ndarray,
    pack: ConstantPack,
    n0: int,
    y0_norm: float,
    s_offsets,
    periods: int = 2,
    eps_zero: float = 1e-6,
    eta_grid: np.ndarray | None = None,
    n_max: int = 8,
    dt: float | None = None,
    seed: int = 0,
    nu: float = 1.0,
) -> StabilityProbe:
    """Run the periodic cutoff law from several start offsets.

    Checks the two-period null property ||state(s + 2T)|| <= eps_zero *
    max(||y0||, eps_zero) for every offset (raising TwoPeriodFailedError
    otherwise), the feedback norm constraint at every sample, and fills the
    uniform-stability table delta(eta) = sup-over-time norm for initial
    norms eta.  eta defaults to {1e-4, 1e-3, 1e-2} times the first cutoff
    radius of the schedule.
    """
    if periods < 2:
        raise ValueError("need at least two periods for the null check")
    schedule = build_schedule(n0, pack, basis, n_max)
    if dt is None:
        dt = _dyadic_dt(schedule.max_gain, n0 + n_max + 4)
    if eta_grid is None:
        eta_grid = np.array([1e-4, 1e-3, 1e-2]) * schedule.params[0].cutoff_radius
    eta_grid = np.asarray(eta_grid, dtype=float)
    if eta_grid.size and np.any(np.diff(eta_grid) < 0):
        raise ValueError("eta grid must be ascending")
    offsets = np.asarray(list(s_offsets), dtype=float)

    def one_run(norm: float, offset: float) -> Trajectory:
        y0 = random_low_mode_state(basis.n_modes, norm, seed)
        controller = ScheduledFeedback(schedule, cutoff=True)
        return simulate(
            y0, controller, offset, offset + periods * schedule.period, dt,
            basis, tensor, gram, nu=nu,
        )

    trajectories = []
    residuals = np.empty(len(offsets))
    feedback_ok = True
    two_period_index = int(round(2 * schedule.period / dt))
    for i, s in enumerate(offsets):
        traj = one_run(y0_norm, float(s))
        trajectories.append(traj)
        residuals[i] = traj.norm_h[two_period_index] / max(y0_norm, eps_zero)
        feedback_ok = feedback_ok and _feedback_bound_satisfied(traj)
    two_period_ok = bool(np.all(residuals <= eps_zero))

    delta = np.empty(len(eta_grid))
    for j, eta in enumerate(eta_grid):
        worst = 0.0
        for s in offsets:
            traj = one_run(float(eta), float(s))
            feedback_ok = feedback_ok and _feedback_bound_satisfied(traj)
            worst = max(worst, float(traj.norm_h.max()))
        delta[j] = worst

    probe = StabilityProbe(
        n0=n0,
        period=schedule.period,
        y0_norm=y0_norm,
        offsets=offsets,
        two_period_residuals=residuals,
        two_period_ok=two_period_ok,
        feedback_bound_ok=feedback_ok,
        eta_grid=np.asarray(eta_grid, dtype=float),
        delta_table=delta,
        dt=dt,
        trajectories=trajectories,
    )
    if not two_period_ok:
        worst = int(np.argmax(residuals))
        raise TwoPeriodFailedError(float(offsets[worst]), float(residuals[worst]))
    return probe


def calibrate_small_time_basin(
    basis: StokesBasis,
    tensor: np.ndarray,
    gram: np.ndarray,
    pack: ConstantPack,
    n0: int,
    lo: float = 1e-8,
    hi: float = 1.0,
    iterations: int = 8,
    eps_zero: float = 1e-6,
    n_max: int = 8,
    seed: int = 0,
) -> float:
    """Empirical stand-in for the admissible basin of the periodic law.

    Bisects the largest initial norm whose two-period run still reaches
    numerical zero from offset 0.  Returns hi when even that passes (the
    desk-scale dynamics rarely fail below blow-up).
    """

    def passes(norm: float) -> bool:
        try:
            run_small_time(
                basis, tensor, gram, pack, n0, norm, [0.0],
                eps_zero=eps_zero, eta_grid=np.array([]), n_max=n_max, seed=seed,
            )
            return True
        except Exception:
            return False

    if passes(hi):
        return hi
    if not passes(lo):
        raise RuntimeError(f"no admissible norm found down to {lo:g}")
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def fit_cost_curve(reports) -> tuple[float, float]:
    """Least-squares fit of ln(cost / ||y0||) against 1/T over a run set.

    Returns (slope, intercept); the slope is the empirical cost exponent.
    """
    reports = list(reports)
    periods = {r.period for r in reports}
    if len(periods) < 3:
        raise ValueError("need reports for at least 3 distinct horizons")
    x = np.array([1.0 / r.period for r in reports])
    y = []
    for r in reports:
        if not (r.cost > 0 and r.y0_norm > 0):
            raise ValueError("cost-curve fit needs positive costs and initial norms")
        y.append(math.log(r.cost / r.y0_norm))
    slope, intercept = np.polyfit(x, np.array(y), 1)
    return float(slope), float(intercept)
