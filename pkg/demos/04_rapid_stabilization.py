#!/usr/bin/env python3
"""Rapid stabilization by the stationary low-mode feedback law.

The control is -gain times the projection onto the modes below the chosen
threshold lam, applied through the window.  The weighted energy
V = weight * ||low||^2 + ||high||^2 then decays at least at rate lam/2,
and the state obeys the envelope

    ||y(t)|| <= c1 e^{c1 sqrt(lam)} e^{-lam t / 4} ||y0||.

The cutoff variant saturates the feedback radially; inside its admissible
ball it is numerically indistinguishable from the linear law (bitwise).
"""

from nsstab import (
    ConstantPack,
    DomainSpec,
    assemble_gram,
    assemble_operators,
    build_grid,
    build_trilinear_tensor,
    run_rapid_stab,
    solve_eigenbasis,
)

spec = DomainSpec(1.0, 1.0, 32, 32, omega=(0.6, 0.9, 0.1, 0.4))
grid = build_grid(spec)
k1, k2 = assemble_operators(grid)
basis = solve_eigenbasis(k1, k2, 24, grid)
gram = assemble_gram(basis, grid)
tensor = build_trilinear_tensor(basis, grid)

pack = ConstantPack.practical(spectral_constant=0.6, trilinear_constant=1.0)
lam = float(basis.eigenvalues[3])

report = run_rapid_stab(basis, tensor, gram, pack, lam, y0_scale=0.5, seed=7)
p = report.params
print(f"threshold lam = {lam:.2f} (4 active modes), gain = {p.gain:.3e}, "
      f"weight = {p.weight:.3e}")
print(f"initial norm  = {report.y0_norm:.3e} (half the admissible radius)")
print(f"dt = {report.dt:.2e}, horizon = {report.horizon:.3f}")

print(f"\nmeasured decay rate of V: {report.rate_lyapunov:8.1f}")
print(f"guaranteed rate lam/2:    {lam / 2:8.1f}")
print(f"pointwise state envelope holds: {report.state_bound_ok}")
print(f"pointwise control envelope holds: {report.control_bound_ok}")
print(f"sampled dV/dt <= -(lam/2) V throughout: {report.lyapunov_decay_ok}")

traj = report.trajectory
for frac in (0.0, 0.25, 0.5, 1.0):
    i = int(frac * (len(traj.times) - 1))
    print(f"  t = {traj.times[i]:.4f}: ||y|| = {traj.norm_h[i]:.3e}, V = {traj.lyapunov[i]:.3e}")

# cutoff law inside its (much smaller) admissible ball
paired = run_rapid_stab(basis, tensor, gram, pack, lam, y0_scale=0.5, cutoff=True, seed=7)
print(f"\ncutoff run from ||y0|| = {paired.y0_norm:.3e} (half the squared radius):")
print(f"  raw feedback stayed below the cutoff radius: {paired.control_stayed_below_radius}")
print(f"  cutoff and linear trajectories bitwise equal: {paired.cutoff_matches_linear}")
