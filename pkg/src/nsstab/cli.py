"""Configuration, subcommands, artifact formats, and the eigenbasis cache.

One structured JSON config file drives every run; there are no positional
numeric arguments, so every figure is reproducible from the file.  Unknown
keys are rejected.  All numeric output uses full 64-bit precision (17
significant digits in CSV) so artifacts re-parse bit-faithfully.

Subcommands:

    eigen        solve (or load) the eigenbasis and refresh the cache
    fit-c1       fit the spectral-inequality constant, write the table
    constants    derive and echo the constant pack
    simulate     closed-loop rapid-stabilization run
    nullcontrol  dyadic-schedule null-control run
    stabilize    periodic small-time stabilization probe
    cost-curve   nullcontrol runs over several horizons plus a slope fit
    report       summarize the artifacts in the output directory
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import struct
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import ConstantPack, estimate_trilinear_constant
from .dynamics import Trajectory, build_trilinear_tensor
from .errors import ConfigError
from .experiments import (
    fit_cost_curve,
    run_null_control,
    run_rapid_stab,
    run_small_time,
)
from .grid import DomainSpec, Grid, build_grid
from .spectral import StokesBasis, assemble_gram, assemble_operators, fit_spectral_constant, solve_eigenbasis

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"NSSTAB1\x00"
CACHE_VERSION = 1

SUBCOMMANDS = (
    "eigen",
    "fit-c1",
    "constants",
    "simulate",
    "nullcontrol",
    "stabilize",
    "cost-curve",
    "report",
)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PracticalConstants:
    spectral_constant: float = 0.5
    trilinear_constant: float = 1.0
    feedback_constant: float | None = None
    schedule_constant: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    lambda_index: int = 4  # threshold = tau_k for the simulate subcommand
    y0_scale: float = 0.5  # initial norm as a fraction of the admissible basin
    y0_norm: float = 1e-3  # initial norm for practical schedule runs
    cutoff: bool = False
    horizon: float | None = None
    n0: int = 1
    n_max: int = 8
    n0_list: tuple[int, ...] = (1, 2, 3)
    offsets: tuple[float, ...] = (0.0, 1.0 / 3.0, 0.9)  # fractions of the period
    periods: int = 2


@dataclass(frozen=True)
class RunConfig:
    Lx: float
    Ly: float
    nx: int
    ny: int
    omega: tuple[float, float, float, float]
    M: int = 24
    nu: float = 1.0
    dt: float | None = None
    mode: str = "practical"
    seed: int = 42
    eps_zero: float = 1e-8
    output_dir: str = "out"
    cache_path: str | None = None
    practical: PracticalConstants = field(default_factory=PracticalConstants)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def domain_spec(self) -> DomainSpec:
        try:
            return DomainSpec(self.Lx, self.Ly, self.nx, self.ny, self.omega)
        except ValueError as exc:
            key = _domain_error_key(str(exc))
            raise ConfigError(key, str(exc)) from exc

    def resolved_cache_path(self) -> Path:
        if self.cache_path is not None:
            return Path(self.cache_path)
        return Path(self.output_dir) / "basis_cache.nsstab"


def _domain_error_key(message: str) -> str:
    for key in ("omega", "nx", "ny", "Lx", "Ly"):
        if key in message:
            return key
    return "domain"


_SCHEMAS = {
    "root": {
        "Lx": float, "Ly": float, "nx": int, "ny": int, "omega": list,
        "M": int, "nu": float, "dt": (float, type(None)), "mode": str,
        "seed": int, "eps_zero": float, "output_dir": str,
        "cache_path": (str, type(None)), "practical": dict, "experiment": dict,
    },
    "practical": {
        "spectral_constant": float, "trilinear_constant": float,
        "feedback_constant": (float, type(None)),
        "schedule_constant": (float, type(None)),
    },
    "experiment": {
        "lambda_index": int, "y0_scale": float, "y0_norm": float,
        "cutoff": bool, "horizon": (float, type(None)), "n0": int,
        "n_max": int, "n0_list": list, "offsets": list, "periods": int,
    },
}

_REQUIRED = ("Lx", "Ly", "nx", "ny", "omega")


def _check_keys(data: dict, section: str, prefix: str = "") -> None:
    schema = _SCHEMAS[section]
    for key, value in data.items():
        full = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(full, "unknown key")
        expected = schema[key]
        if not isinstance(expected, tuple):
            expected = (expected,)
        if float in expected and isinstance(value, int) and not isinstance(value, bool):
            continue  # JSON integers are admissible floats
        if bool not in expected and isinstance(value, bool):
            raise ConfigError(full, "type mismatch (got bool)")
        if not isinstance(value, expected):
            raise ConfigError(full, f"type mismatch (got {type(value).__name__})")


def _config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _check_keys(data, "root")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(key, "missing required key")
    omega = data["omega"]
    if len(omega) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in omega):
        raise ConfigError("omega", "must be a list [a, b, c, d] of 4 numbers")
    kwargs = dict(data)
    kwargs["omega"] = tuple(float(v) for v in omega)
    if "practical" in data:
        _check_keys(data["practical"], "practical", "practical.")
        kwargs["practical"] = PracticalConstants(**data["practical"])
    if "experiment" in data:
        _check_keys(data["experiment"], "experiment", "experiment.")
        exp = dict(data["experiment"])
        if "n0_list" in exp:
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in exp["n0_list"]):
                raise ConfigError("experiment.n0_list", "must be a list of integers")
            exp["n0_list"] = tuple(exp["n0_list"])
        if "offsets" in exp:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in exp["offsets"]):
                raise ConfigError("experiment.offsets", "must be a list of numbers")
            exp["offsets"] = tuple(float(v) for v in exp["offsets"])
        kwargs["experiment"] = ExperimentConfig(**exp)
    for key in ("Lx", "Ly", "nu", "eps_zero"):
        if key in kwargs:
            kwargs[key] = float(kwargs[key])
    if kwargs.get("dt") is not None:
        kwargs["dt"] = float(kwargs["dt"])
    config = RunConfig(**kwargs)
    if config.mode not in ("certified", "practical"):
        raise ConfigError("mode", "must be 'certified' or 'practical'")
    if config.M < 5:
        raise ConfigError("M", "need at least 5 modes")
    if config.M > config.nx * config.ny:
        raise ConfigError("M", "cannot exceed the interior node count")
    if config.eps_zero <= 0:
        raise ConfigError("eps_zero", "must be positive")
    if config.dt is not None and config.dt <= 0:
        raise ConfigError("dt", "must be positive")
    if config.nu <= 0:
        raise ConfigError("nu", "must be positive")
    config.domain_spec()  # raises ConfigError naming the offending key
    return config


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return _config_from_dict(data)


def config_to_dict(config: RunConfig) -> dict:
    data = dataclasses.asdict(config)
    data["omega"] = list(config.omega)
    data["experiment"]["n0_list"] = list(config.experiment.n0_list)
    data["experiment"]["offsets"] = list(config.experiment.offsets)
    return data


def emit_config(config: RunConfig) -> str:
    """Canonical JSON text whose parse reproduces the config exactly."""
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# eigenbasis cache
# ---------------------------------------------------------------------------

def write_basis_cache(path: str | Path, basis: StokesBasis) -> None:
    """Binary cache: magic, version, grid signature, eigenvalues, stream
    functions (all little-endian float64), and a trailing sha256 of the rest.

    Written atomically via rename.
    """
    grid = basis.grid
    header = CACHE_MAGIC + struct.pack(
        "<III", CACHE_VERSION, grid.nx, grid.ny
    ) + struct.pack("<ddI", grid.spec.Lx, grid.spec.Ly, basis.n_modes)
    payload = (
        basis.eigenvalues.astype("<f8").tobytes()
        + basis.stream_functions.astype("<f8").tobytes()
    )
    blob = header + payload
    blob += hashlib.sha256(blob).digest()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_basis_cache(path: str | Path, grid: Grid, m: int) -> StokesBasis | None:
    """Load a cached basis; None if absent, corrupt, or mismatched."""
    path = Path(path)
    if not path.exists():
        return None
    blob = path.read_bytes()
    if len(blob) < len(CACHE_MAGIC) + 12 + 20 + 32 or blob[: len(CACHE_MAGIC)] != CACHE_MAGIC:
        logger.warning("cache %s: bad magic or truncated; ignoring", path)
        return None
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        logger.warning("cache %s: checksum mismatch; ignoring", path)
        return None
    off = len(CACHE_MAGIC)
    version, nx, ny = struct.unpack_from("<III", body, off)
    off += 12
    lx, ly, mm = struct.unpack_from("<ddI", body, off)
    off += 20
    if version != CACHE_VERSION:
        logger.warning("cache %s: version %d != %d; ignoring", path, version, CACHE_VERSION)
        return None
    if (nx, ny, mm) != (grid.nx, grid.ny, m) or (lx, ly) != (grid.spec.Lx, grid.spec.Ly):
        logger.warning("cache %s: signature mismatch; ignoring", path)
        return None
    expected = mm * 8 + mm * nx * ny * 8
    if len(body) - off != expected:
        logger.warning("cache %s: payload size mismatch; ignoring", path)
        return None
    tau = np.frombuffer(body, dtype="<f8", count=mm, offset=off).copy()
    off += mm * 8
    psi = np.frombuffer(body, dtype="<f8", count=mm * nx * ny, offset=off).reshape(mm, nx, ny).copy()
    from .grid import stream_to_velocity

    velocities = np.stack([stream_to_velocity(psi[i], grid) for i in range(mm)])
    return StokesBasis(eigenvalues=tau, stream_functions=psi, velocities=velocities, grid=grid)


def ensure_basis(config: RunConfig) -> tuple[StokesBasis, Grid, bool]:
    """Return (basis, grid, cache_hit), refreshing the cache on a miss."""
    grid = build_grid(config.domain_spec())
    cache_path = config.resolved_cache_path()
    cached = read_basis_cache(cache_path, grid, config.M)
    if cached is not None:
        logger.info("cache hit: %s", cache_path)
        return cached, grid, True
    k1, k2 = assemble_operators(grid)
    basis = solve_eigenbasis(k1, k2, config.M, grid)
    write_basis_cache(cache_path, basis)
    logger.info("cache written: %s", cache_path)
    return basis, grid, False


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_trajectory_csv(path: str | Path, traj: Trajectory) -> None:
    """Fixed schema: t, norm_H, V, norm_f, interval_n, lambda_n."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["t,norm_H,V,norm_f,interval_n,lambda_n"]
    for i in range(len(traj.times)):
        lines.append(
            ",".join(
                (
                    _fmt(traj.times[i]),
                    _fmt(traj.norm_h[i]),
                    _fmt(traj.lyapunov[i]),
                    _fmt(traj.control_norm[i]),
                    str(int(traj.interval[i])),
                    _fmt(traj.threshold[i]),
                )
            )
        )
    path.write_text("\n".join(lines) + "\n")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest}"


def _write_json(path: str | Path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _base_report(config: RunConfig, pack: ConstantPack | None, inputs: dict) -> dict:
    return {
        "config": config_to_dict(config),
        "constants": pack.as_dict() if pack is not None else None,
        "inputs": inputs,
        "seed": config.seed,
    }


def build_pack(config: RunConfig, basis: StokesBasis, grid: Grid,
               tensor: np.ndarray | None = None,
               gram: np.ndarray | None = None) -> ConstantPack:
    """Constant pack per the config mode.

    Certified: fit the spectral constant on the default threshold grid and
    measure the trilinear constant (building the tensor if not supplied).
    Practical: take the configured overrides, deriving omitted entries.
    """
    if config.mode == "practical":
        p = config.practical
        return ConstantPack.practical(
            spectral_constant=p.spectral_constant,
            trilinear_constant=p.trilinear_constant,
            feedback_constant=p.feedback_constant,
            schedule_constant=p.schedule_constant,
        )
    if gram is None:
        gram = assemble_gram(basis, grid)
    fit = fit_spectral_constant(basis, gram)
    if tensor is None:
        tensor = build_trilinear_tensor(basis, grid)
    c0 = estimate_trilinear_constant(basis, tensor, seed=config.seed)
    return ConstantPack.certified(fit.value, c0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_eigen(config: RunConfig, out: Path) -> None:
    basis, grid, hit = ensure_basis(config)
    cache_path = config.resolved_cache_path()
    _write_json(
        out / "eigen_report.json",
        {
            **_base_report(config, None, {"cache": sha256_file(cache_path)}),
            "cache_hit": hit,
            "cache_path": cache_path.name,
            "eigenvalues": [float(t) for t in basis.eigenvalues],
        },
    )


def _cmd_fit_c1(config: RunConfig, out: Path) -> None:
    basis, grid, _ = ensure_basis(config)
    gram = assemble_gram(basis, grid)
    fit = fit_spectral_constant(basis, gram)
    table_path = out / "c1_table.csv"
    lines = ["threshold,n_active,gram_min_eig,root_unclamped,root_clamped"]
    for lam, n, min_eig, root, clamped in fit.table:
        lines.append(
            f"{_fmt(lam)},{int(n)},{_fmt(min_eig)},{_fmt(root)},{_fmt(clamped)}"
        )
    table_path.parent.mkdir(parents=True, exist_ok=True)
    table_path.write_text("\n".join(lines) + "\n")
    _write_json(
        out / "fit_c1_report.json",
        {
            **_base_report(config, None, {"cache": sha256_file(config.resolved_cache_path())}),
            "spectral_constant": fit.value,
            "spectral_constant_unclamped": fit.unclamped_value,
            "table": table_path.name,
        },
    )


def _cmd_constants(config: RunConfig, out: Path) -> None:
    basis, grid, _ = ensure_basis(config)
    pack = build_pack(config, basis, grid)
    _write_json(
        out / "constants_report.json",
        _base_report(config, pack, {"cache": sha256_file(config.resolved_cache_path())}),
    )


def _prepare_dynamics(config: RunConfig):
    basis, grid, _ = ensure_basis(config)
    tensor = build_trilinear_tensor(basis, grid)
    gram = assemble_gram(basis, grid)
    pack = build_pack(config, basis, grid, tensor=tensor, gram=gram)
    return basis, grid, tensor, gram, pack


def _cmd_simulate(config: RunConfig, out: Path) -> None:
    basis, grid, tensor, gram, pack = _prepare_dynamics(config)
    exp = config.experiment
    idx = exp.lambda_index
    if not 1 <= idx < basis.n_modes:
        raise ConfigError("experiment.lambda_index", f"must lie in [1, {basis.n_modes - 1}]")
    lam = float(basis.eigenvalues[idx - 1])
    report = run_rapid_stab(
        basis, tensor, gram, pack, lam,
        y0_scale=exp.y0_scale, cutoff=exp.cutoff, horizon=exp.horizon,
        dt=config.dt, seed=config.seed, nu=config.nu,
    )
    traj_path = out / "simulate_trajectory.csv"
    write_trajectory_csv(traj_path, report.trajectory)
    payload = {
        **_base_report(config, pack, {"cache": sha256_file(config.resolved_cache_path())}),
        "threshold": report.threshold,
        "n_active": report.params.n_active,
        "gain": report.params.gain,
        "weight": report.params.weight,
        "cutoff_radius": report.params.cutoff_radius,
        "y0_norm": report.y0_norm,
        "dt": report.dt,
        "horizon": report.horizon,
        "rate_lyapunov": report.rate_lyapunov,
        "rate_norm": report.rate_norm,
        "state_bound_ok": report.state_bound_ok,
        "control_bound_ok": report.control_bound_ok,
        "lyapunov_decay_ok": report.lyapunov_decay_ok,
        "trivial": report.trivial,
        "trajectory": traj_path.name,
        "trajectory_sha256": sha256_file(traj_path),
    }
    if report.cutoff_trajectory is not None:
        cut_path = out / "simulate_trajectory_cutoff.csv"
        write_trajectory_csv(cut_path, report.cutoff_trajectory)
        payload["cutoff_trajectory"] = cut_path.name
        payload["cutoff_matches_linear"] = report.cutoff_matches_linear
        payload["control_stayed_below_radius"] = report.control_stayed_below_radius
    _write_json(out / "simulate_report.json", payload)


def _null_control_payload(config: RunConfig, pack: ConstantPack, report) -> dict:
    payload = {
        "n0": report.n0,
        "T": report.period,
        "n_max": report.n_max,
        "cutoff": report.cutoff,
        "y0_norm": report.y0_norm,
        "log_basin": report.log_basin,
        "basin_below_precision": report.basin_below_precision,
        "thresholds_raw": [float(v) for v in report.schedule.thresholds_raw],
        "thresholds": [float(v) for v in report.schedule.thresholds],
    }
    if report.basin_below_precision:
        payload["note"] = "basin below float precision; bound arithmetic verified in log space"
        payload["state_bound_ok"] = [bool(b) for b in report.state_bound_ok]
        return payload
    payload.update(
        {
            "dt": report.dt,
            "cost": report.cost,
            "cost_bound_ok": report.cost_bound_ok,
            "final_relative_norm": report.final_relative_norm,
            "null_reached": report.null_reached,
            "latch_time": report.latch_time,
            "interval_times": [float(v) for v in report.interval_times],
            "interval_norms": [float(v) for v in report.interval_norms],
            "interval_control_sup": [float(v) for v in report.interval_control_sup],
            "state_bound_ok": [bool(b) for b in report.state_bound_ok],
            "control_bound_ok": [bool(b) for b in report.control_bound_ok],
            "monotone_ok": [bool(b) for b in report.monotone_ok],
        }
    )
    return payload


def _cmd_nullcontrol(config: RunConfig, out: Path) -> None:
    basis, grid, tensor, gram, pack = _prepare_dynamics(config)
    exp = config.experiment
    report = run_null_control(
        basis, tensor, gram, pack, exp.n0,
        y0_norm=exp.y0_norm if config.mode == "practical" else None,
        n_max=exp.n_max, eps_zero=config.eps_zero, cutoff=exp.cutoff,
        dt=config.dt, seed=config.seed, nu=config.nu,
    )
    payload = {
        **_base_report(config, pack, {"cache": sha256_file(config.resolved_cache_path())}),
        **_null_control_payload(config, pack, report),
    }
    if report.trajectory is not None:
        traj_path = out / "nullcontrol_trajectory.csv"
        write_trajectory_csv(traj_path, report.trajectory)
        payload["trajectory"] = traj_path.name
        payload["trajectory_sha256"] = sha256_file(traj_path)
    _write_json(out / "nullcontrol_report.json", payload)


def _cmd_stabilize(config: RunConfig, out: Path) -> None:
    basis, grid, tensor, gram, pack = _prepare_dynamics(config)
    exp = config.experiment
    period = 2.0 ** (-exp.n0)
    offsets = [f * period for f in exp.offsets]
    probe = run_small_time(
        basis, tensor, gram, pack, exp.n0, exp.y0_norm, offsets,
        periods=exp.periods, eps_zero=config.eps_zero, n_max=exp.n_max,
        dt=config.dt, seed=config.seed, nu=config.nu,
    )
    traj_names = []
    for i, traj in enumerate(probe.trajectories):
        traj_path = out / f"stabilize_trajectory_{i}.csv"
        write_trajectory_csv(traj_path, traj)
        traj_names.append({"file": traj_path.name, "sha256": sha256_file(traj_path)})
    _write_json(
        out / "stabilize_report.json",
        {
            **_base_report(config, pack, {"cache": sha256_file(config.resolved_cache_path())}),
            "n0": probe.n0,
            "T": probe.period,
            "dt": probe.dt,
            "y0_norm": probe.y0_norm,
            "offsets": [float(v) for v in probe.offsets],
            "two_period_residuals": [float(v) for v in probe.two_period_residuals],
            "two_period_ok": probe.two_period_ok,
            "feedback_bound_ok": probe.feedback_bound_ok,
            "eta_grid": [float(v) for v in probe.eta_grid],
            "delta_table": [float(v) for v in probe.delta_table],
            "trajectories": traj_names,
        },
    )


def _cmd_cost_curve(config: RunConfig, out: Path) -> None:
    basis, grid, tensor, gram, pack = _prepare_dynamics(config)
    exp = config.experiment
    reports = []
    rows = []
    for n0 in exp.n0_list:
        rep = run_null_control(
            basis, tensor, gram, pack, n0,
            y0_norm=exp.y0_norm if config.mode == "practical" else None,
            n_max=exp.n_max, eps_zero=config.eps_zero, cutoff=exp.cutoff,
            dt=None, seed=config.seed, nu=config.nu,
        )
        reports.append(rep)
        rows.append((rep.period, 1.0 / rep.period, rep.cost, rep.y0_norm))
    slope, intercept = fit_cost_curve(reports)
    curve_path = out / "cost_curve.csv"
    lines = ["T,inv_T,cost,y0_norm"]
    for T, inv_t, cost, y0n in rows:
        lines.append(f"{_fmt(T)},{_fmt(inv_t)},{_fmt(cost)},{_fmt(y0n)}")
    curve_path.parent.mkdir(parents=True, exist_ok=True)
    curve_path.write_text("\n".join(lines) + "\n")
    _write_json(
        out / "cost_curve_report.json",
        {
            **_base_report(config, pack, {"cache": sha256_file(config.resolved_cache_path())}),
            "n0_list": list(exp.n0_list),
            "slope": slope,
            "intercept": intercept,
            "cost_exponent": pack.cost_exponent,
            "slope_over_cost_exponent": slope / pack.cost_exponent,
            "curve": curve_path.name,
            "runs": [_null_control_payload(config, pack, r) for r in reports],
        },
    )


def _cmd_report(config: RunConfig, out: Path) -> None:
    lines = []
    plot_source = None
    for name in ("simulate", "nullcontrol", "stabilize", "cost_curve", "constants", "fit_c1", "eigen"):
        report_path = out / f"{name}_report.json"
        if not report_path.exists():
            continue
        data = json.loads(report_path.read_text())
        lines.append(f"[{name}] {report_path.name}")
        for key in ("threshold", "rate_lyapunov", "cost", "final_relative_norm",
                    "slope", "two_period_ok", "spectral_constant", "cache_hit"):
            if key in data:
                lines.append(f"  {key} = {data[key]}")
        if "trajectory" in data:
            traj_path = out / data["trajectory"]
            digest = sha256_file(traj_path)
            lines.append(f"  trajectory = {data['trajectory']} ({digest})")
            if data.get("trajectory_sha256") not in (None, digest):
                lines.append("  WARNING: trajectory hash changed since the run")
            plot_source = traj_path
        lines.append("")
    if not lines:
        raise FileNotFoundError(f"no report artifacts in {out}")
    (out / "summary.txt").write_text("\n".join(lines))
    if plot_source is not None:
        rows = plot_source.read_text().strip().splitlines()
        header = rows[0].split(",")
        keep = [header.index(c) for c in ("t", "norm_H", "V", "norm_f")]
        plot_lines = ["t,norm_H,V,norm_f"]
        for row in rows[1:]:
            parts = row.split(",")
            plot_lines.append(",".join(parts[i] for i in keep))
        (out / "report_plot.csv").write_text("\n".join(plot_lines) + "\n")


_HANDLERS = {
    "eigen": _cmd_eigen,
    "fit-c1": _cmd_fit_c1,
    "constants": _cmd_constants,
    "simulate": _cmd_simulate,
    "nullcontrol": _cmd_nullcontrol,
    "stabilize": _cmd_stabilize,
    "cost-curve": _cmd_cost_curve,
    "report": _cmd_report,
}


def run_subcommand(name: str, config: RunConfig) -> int:
    """Execute a subcommand against a validated config; returns exit status."""
    if name not in _HANDLERS:
        raise ValueError(f"unknown subcommand {name!r}; expected one of {SUBCOMMANDS}")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _HANDLERS[name](config, out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nsstab",
        description="Feedback stabilization and null-control experiments "
        "for 2D Navier-Stokes on a rectangle.",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = parse_config(args.config)
        return run_subcommand(args.subcommand, config)
    except Exception as exc:  # machine-parsable error channel
        error = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            error["key"] = exc.key
        print(json.dumps(error), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
