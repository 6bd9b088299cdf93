"""Parametrically driven harmonic oscillator: states, costates and gradients.

Equations of motion (control ``u`` modulates the stiffness)::

    q' = p / m
    p' = -m w0^2 q - u(t) q

The terminal cost is the final energy ``m w0^2 q^2 / 2 + p^2 / (2 m)``. Costates
obey ``lq' = (m w0^2 + u) lp``, ``lp' = -lq / m`` with ``lam(tau) = dE/dz``.
Everything is discretized with RK4 on the :class:`~pinvcontrol.waveforms.TimeGrid`
and the returned gradient is the exact gradient of the discrete cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _linear, io
from .waveforms import TimeGrid

_DA = np.array([[0.0, 0.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class OscillatorModel:
    m: float = 1.0
    omega0: float = 1.0

    def __post_init__(self):
        if not self.m > 0 or not self.omega0 > 0:
            raise ValueError(f"m and omega0 must be positive (m={self.m}, omega0={self.omega0})")

    @property
    def stiffness(self):
        return self.m * self.omega0**2

    def generators(self, u):
        """State matrices ``A(u_k)`` for every control sample, shape ``(N, 2, 2)``."""
        u = np.asarray(u, dtype=float)
        A = np.zeros((u.size, 2, 2))
        A[:, 0, 1] = 1.0 / self.m
        A[:, 1, 0] = -(self.stiffness + u)
        return A

    def energy(self, q, p):
        with np.errstate(over="ignore"):
            return 0.5 * self.stiffness * np.square(q) + 0.5 * np.square(p) / self.m

    def energy_gradient(self, q, p):
        """``(dE/dq, dE/dp)``: the terminal costate."""
        return self.stiffness * np.asarray(q), np.asarray(p) / self.m


def energy(model, state):
    """Energy of a phase-space point ``state = (q, p)``."""
    q, p = state
    return float(model.energy(q, p))


def _check_control(u, grid):
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.N,):
        raise ValueError(f"control has shape {u.shape}, expected ({grid.N},)")
    if not np.all(np.isfinite(u)):
        raise ValueError("control contains non-finite values")
    return u


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States at ``grid.state_times``; ``states`` has shape ``(N + 1, 2)``.

    ``control`` is the signal the trajectory was propagated with.
    """

    grid: TimeGrid
    states: np.ndarray
    control: np.ndarray

    @property
    def q(self):
        return self.states[:, 0]

    @property
    def p(self):
        return self.states[:, 1]

    @property
    def final(self):
        return self.states[-1]

    def energies(self, model):
        return model.energy(self.q, self.p)

    def to_csv(self, path, model):
        return io.write_columns(
            path, {"t": self.grid.state_times, "q": self.q, "p": self.p, "E": self.energies(model)}
        )


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Costates ``(lam_q, lam_p)`` at ``grid.state_times``, shape ``(N + 1, 2)``."""

    grid: TimeGrid
    costates: np.ndarray

    @property
    def lam_q(self):
        return self.costates[:, 0]

    @property
    def lam_p(self):
        return self.costates[:, 1]


def _maps(model, u, grid):
    return _linear.step_maps(model.generators(u), _DA, grid.dt)


def propagate(model, u, z0, grid):
    """Integrate the oscillator under control ``u`` starting from ``z0 = (q, p)``."""
    u = _check_control(u, grid)
    z0 = np.asarray(z0, dtype=float).reshape(1, 2)
    if not np.all(np.isfinite(z0)):
        raise ValueError("initial state is not finite")
    Z = _linear.forward(_maps(model, u, grid), z0)
    _linear.check_finite(Z, grid.state_times)
    traj = Trajectory(grid, Z[:, 0, :], u.copy())
    traj.states.setflags(write=False)
    traj.control.setflags(write=False)
    return traj


def adjoint(model, traj, u=None):
    """Integrate the costates backwards from ``lam(tau) = dE/dz(tau)``.

    ``u`` defaults to the control stored in ``traj``; if given it must match.
    """
    grid = traj.grid
    if u is None:
        u = traj.control
    u = _check_control(u, grid)
    if not np.array_equal(u, traj.control):
        raise ValueError("adjoint requested for a different control than the trajectory's")
    lam_final = np.array(model.energy_gradient(*traj.final)).reshape(1, 2)
    L = _linear.backward(_maps(model, u, grid), lam_final)
    adj = AdjointTrajectory(grid, L[:, 0, :])
    adj.costates.setflags(write=False)
    return adj


def gradient(model, traj, adj):
    """Gradient of the discrete terminal energy with respect to every ``u_k``.

    To leading order in ``dt`` this is ``-dt * lam_p(t_k) q(t_k)``; the RK4
    stage corrections make it exact for the discretized problem, so it agrees
    with finite differences of :func:`propagate` to rounding error.
    """
    if traj.grid != adj.grid:
        raise ValueError("trajectory and adjoint live on different grids")
    maps = _maps(model, traj.control, traj.grid)
    return _linear.gradient_terms(maps, traj.states[:, None, :], adj.costates[:, None, :])[0]


class OscillatorControlProblem:
    """Final-energy minimization for a single deterministic oscillator.

    Calling the problem with a control returns ``(cost, gradient)``, which is
    the interface expected by :func:`pinvcontrol.optimize.optimize`.
    """

    def __init__(self, model=None, grid=None, z0=(2**-0.5, 2**-0.5)):
        self.model = model or OscillatorModel()
        self.grid = grid or TimeGrid(15.0, 1500)
        self.z0 = np.asarray(z0, dtype=float)
        self.n_evaluations = 0

    @property
    def N(self):
        return self.grid.N

    def trajectory(self, u):
        return propagate(self.model, u, self.z0, self.grid)

    def cost(self, u):
        self.n_evaluations += 1
        traj = self.trajectory(u)
        return energy(self.model, traj.final)

    def cost_and_gradient(self, u):
        self.n_evaluations += 1
        traj = self.trajectory(u)
        adj = adjoint(self.model, traj)
        return energy(self.model, traj.final), gradient(self.model, traj, adj)

    __call__ = cost_and_gradient
