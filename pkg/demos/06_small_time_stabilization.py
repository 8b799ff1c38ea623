#!/usr/bin/env python3
"""Small-time stabilization by the periodic piecewise cutoff law.

The schedule of the null-control experiment, with the radially saturated
feedback on each interval, is extended T-periodically in time.  Whatever
the start offset s, the state is driven to numerical zero within two
periods, and the applied feedback always satisfies

    ||U(t; y)|| <= min(1, sqrt(2 ||y||)).

The uniform-stability table records the sup-over-time norm delta(eta) for
initial norms eta; smaller starts stay uniformly smaller.
"""

import numpy as np

from nsstab import (
    ConstantPack,
    DomainSpec,
    assemble_gram,
    assemble_operators,
    build_grid,
    build_schedule,
    build_trilinear_tensor,
    run_small_time,
    solve_eigenbasis,
)

spec = DomainSpec(1.0, 1.0, 32, 32, omega=(0.6, 0.9, 0.1, 0.4))
grid = build_grid(spec)
k1, k2 = assemble_operators(grid)
basis = solve_eigenbasis(k1, k2, 24, grid)
gram = assemble_gram(basis, grid)
tensor = build_trilinear_tensor(basis, grid)

pack = ConstantPack.practical(
    spectral_constant=0.02, trilinear_constant=1.0, schedule_constant=4.0
)
period = 0.5
schedule = build_schedule(1, pack, basis, 8)
eta_grid = np.array([1e-4, 1e-3, 1e-2]) * schedule.params[0].cutoff_radius

probe = run_small_time(
    basis, tensor, gram, pack, n0=1, y0_norm=1e-3,
    s_offsets=[0.0, period / 3.0, 0.9 * period],
    eps_zero=1e-6, eta_grid=eta_grid, seed=5,
)

print(f"period T = {probe.period}, dt = {probe.dt:.3e}")
print("\nstart offset   ||state(s + 2T)|| / ||y0||")
for s, res in zip(probe.offsets, probe.two_period_residuals):
    print(f"  {s:8.4f}     {res:.3e}")
print(f"\nfeedback norm bound min(1, sqrt(2||y||)) held at every sample: "
      f"{probe.feedback_bound_ok}")

print("\nuniform stability: delta(eta) = sup-over-time norm")
print("   eta           delta(eta)")
for eta, delta in zip(probe.eta_grid, probe.delta_table):
    print(f"  {eta:.3e}    {delta:.3e}")
print(f"nondecreasing in eta: {bool(np.all(np.diff(probe.delta_table) >= 0))}")
