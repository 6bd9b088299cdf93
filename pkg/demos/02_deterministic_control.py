"""
Cooling a parametric oscillator
===============================

The control modulates the stiffness of a harmonic oscillator that starts
with energy 0.5; the goal is the smallest energy at t = 15.

Three answers are compared: the unconstrained optimum, that optimum
truncated to the 12-waveform subspace after the fact, and an optimization
that projects every gradient onto the subspace.
"""

import time

import numpy as np

from pinvcontrol import (
    BasisSpec,
    OptimizerConfig,
    OscillatorControlProblem,
    ProjectionStrategy,
    build_basis,
    dominant_frequency,
    optimize,
    post_truncate,
    projector,
)

problem = OscillatorControlProblem()
B = build_basis(BasisSpec.standard(N=problem.N))
cfg = OptimizerConfig(algorithm="quasi_newton", epsilon=1e-6)

t = time.perf_counter()
full = optimize(problem, ProjectionStrategy.none(), cfg)
print("full space:     E = %.3e after %d iterations (%.2f s)"
      % (full.final_objective, full.iterations, time.perf_counter() - t))

# truncating afterwards throws away most of what made the control work
u_trunc = post_truncate(full.final_control, projector(B))
print("post-truncated: E = %.3f" % problem.cost(u_trunc))

t = time.perf_counter()
sub = optimize(problem, ProjectionStrategy.pinv(B), cfg)
print("projected:      E = %.3e after %d iterations (%.2f s)"
      % (sub.final_objective, sub.iterations, time.perf_counter() - t))

# both good controls pump at twice the oscillator frequency
dt = problem.grid.dt
print("dominant frequencies: %.3f, %.3f" % (dominant_frequency(full.final_control, dt),
                                            dominant_frequency(sub.final_control, dt)))

traj = problem.trajectory(sub.final_control)
E = traj.energies(problem.model)
for t_mark in (0.0, 5.0, 10.0, 15.0):
    k = int(round(t_mark / dt))
    print("  E(%4.1f) = %.3e" % (t_mark, E[k]))
print("max |u| of the projected control: %.2f" % np.abs(sub.final_control).max())
