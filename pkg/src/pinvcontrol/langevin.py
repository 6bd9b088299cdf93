"""Parametrically controlled oscillator coupled to a Drude-damped thermal bath.

The generalized Langevin equation

    q' = p / m
    p' = -m w0^2 q - int_0^t gamma(t - s) q'(s) ds - u(t) q + xi(t)

with the Drude kernel ``gamma(t) = gamma0 wc exp(-wc t)`` is embedded exactly
into a Markovian system by the friction variable ``w`` (the memory integral)::

    w' = -wc w + gamma0 wc p / m,   w(0) = 0.

The noise obeys ``<xi(t) xi(t')> = m kT gamma(|t - t'|)``, i.e. it is an
Ornstein-Uhlenbeck process of stationary variance ``m kT gamma0 wc`` and
correlation time ``1 / wc``.

Noise paths and initial conditions are drawn once per realization from seeds
derived from ``(base_seed, realization index)``, so that the ensemble-averaged
final energy is a deterministic, differentiable function of the control.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from . import _linear, io
from .errors import DivergenceError
from .dynamics import OscillatorModel, _check_control
from .waveforms import TimeGrid

#: Environment variable capping the number of worker threads.
WORKERS_ENV = "PINVCONTROL_WORKERS"

#: Realizations per work unit. Fixed so the summation order (and therefore
#: every bit of the result) does not depend on the number of workers.
CHUNK = 250

_DA = np.zeros((3, 3))
_DA[1, 0] = -1.0
_FORCING = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class BathModel:
    gamma0: float = 0.1
    omega_c: float = 10.0
    kT: float = 1.0

    def __post_init__(self):
        if self.gamma0 < 0 or not self.omega_c > 0 or self.kT < 0:
            raise ValueError(
                f"need gamma0 >= 0, omega_c > 0, kT >= 0 "
                f"(got {self.gamma0}, {self.omega_c}, {self.kT})"
            )

    def noise_variance(self, m=1.0):
        return m * self.kT * self.gamma0 * self.omega_c


@dataclass(frozen=True)
class EnsembleConfig:
    M: int = 1000
    base_seed: int = 0
    initial_energy_mean: float = 0.5

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if self.initial_energy_mean < 0:
            raise ValueError("initial_energy_mean must be nonnegative")


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Bath force sampled on ``grid.state_times`` (``N + 1`` values)."""

    grid: TimeGrid
    xi: np.ndarray
    seed: object


def _realization_rng(base_seed, index):
    return np.random.default_rng([int(base_seed), int(index)])


def _ou_paths(white, variance, decay):
    """Exact OU recursion driven by standard normals ``white`` (shape ``(R, K)``).

    ``xi_0 ~ N(0, variance)``, ``xi_{k+1} = a xi_k + sqrt(variance (1 - a^2)) n_{k+1}``.
    """
    a = np.exp(-decay)
    sd = np.sqrt(variance)
    drive = sd * np.sqrt(-np.expm1(-2.0 * decay)) * white
    drive[:, 0] = sd * white[:, 0]
    return lfilter([1.0], [1.0, -a], drive, axis=1)


def sample_noise(bath, grid, seed, m=1.0):
    """Draw one stationary colored-noise path; the same ``seed`` gives the same path."""
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((1, grid.N + 1))
    xi = _ou_paths(white, bath.noise_variance(m), bath.omega_c * grid.dt)[0]
    xi.setflags(write=False)
    return NoisePath(grid, xi, seed)


def generators(model, bath, u):
    """Augmented state matrices for ``z = (q, p, w)``, shape ``(N, 3, 3)``."""
    u = np.asarray(u, dtype=float)
    A = np.zeros((u.size, 3, 3))
    A[:, 0, 1] = 1.0 / model.m
    A[:, 1, 0] = -(model.stiffness + u)
    A[:, 1, 2] = -1.0
    A[:, 2, 1] = bath.gamma0 * bath.omega_c / model.m
    A[:, 2, 2] = -bath.omega_c
    return A


def _maps(model, bath, u, grid):
    return _linear.step_maps(generators(model, bath, u), _DA, grid.dt, forcing=_FORCING)


def _terminal_costate(model, Zf):
    lam = np.zeros_like(Zf)
    lam[:, 0], lam[:, 1] = model.energy_gradient(Zf[:, 0], Zf[:, 1])
    return lam


@dataclass(frozen=True, eq=False)
class AugmentedTrajectory:
    """States ``(q, p, w)`` at ``grid.state_times``, shape ``(N + 1, 3)``."""

    grid: TimeGrid
    states: np.ndarray
    control: np.ndarray
    noise: NoisePath

    @property
    def q(self):
        return self.states[:, 0]

    @property
    def p(self):
        return self.states[:, 1]

    @property
    def w(self):
        return self.states[:, 2]

    def energies(self, model):
        return model.energy(self.q, self.p)

    def to_csv(self, path, model):
        return io.write_columns(
            path, {"t": self.grid.state_times, "q": self.q, "p": self.p, "E": self.energies(model)}
        )


def propagate_realization(model, bath, u, z0, noise):
    """Integrate one realization of the Langevin equation with a given noise path."""
    grid = noise.grid
    u = _check_control(u, grid)
    q0, p0 = np.asarray(z0, dtype=float)
    Z = _linear.forward(_maps(model, bath, u, grid), np.array([[q0, p0, 0.0]]), noise.xi[None, :])
    _linear.check_finite(Z, grid.state_times)
    return AugmentedTrajectory(grid, Z[:, 0, :], u.copy(), noise)


def _default_workers():
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


class LangevinEnsembleProblem:
    """Ensemble-averaged final energy of the controlled Langevin oscillator.

    Initial phase-space points are independent zero-mean Gaussians with
    ``<E(0)> = initial_energy_mean`` split evenly between potential and kinetic
    energy. Initial states and noise paths are generated on construction and
    reused for every evaluation (common random numbers).

    Realizations are processed in fixed chunks of :data:`CHUNK`; with more than
    one worker the chunks run on a thread pool, and partial sums are always
    reduced in chunk order.
    """

    def __init__(self, model=None, bath=None, grid=None, ensemble=None, workers=None):
        self.model = model or OscillatorModel()
        self.bath = bath or BathModel()
        self.grid = grid or TimeGrid(15.0, 2250)
        self.ensemble = ensemble or EnsembleConfig()
        self.workers = workers or _default_workers()
        self.n_evaluations = 0
        self.initial_states, self.noise = self._draw()

    @property
    def N(self):
        return self.grid.N

    def _draw(self):
        M, N = self.ensemble.M, self.grid.N
        model = self.model
        # zero-mean Gaussian with <m w0^2 q^2 / 2> = <p^2 / 2m> = E0 / 2
        half = 0.5 * self.ensemble.initial_energy_mean
        sd_q = np.sqrt(2.0 * half / model.stiffness)
        sd_p = np.sqrt(2.0 * half * model.m)
        variance = self.bath.noise_variance(model.m)
        decay = self.bath.omega_c * self.grid.dt
        z0 = np.empty((M, 2))
        xi = np.empty((M, N + 1))
        for r in range(M):
            rng = _realization_rng(self.ensemble.base_seed, r)
            z0[r] = rng.standard_normal(2)
            xi[r] = _ou_paths(rng.standard_normal((1, N + 1)), variance, decay)[0]
        z0 *= (sd_q, sd_p)
        z0.setflags(write=False)
        xi.setflags(write=False)
        return z0, xi

    def noise_path(self, r):
        return NoisePath(self.grid, self.noise[r], (self.ensemble.base_seed, r))

    def _chunks(self):
        M = self.ensemble.M
        return [(s, min(s + CHUNK, M)) for s in range(0, M, CHUNK)]

    def _map_chunks(self, fn):
        chunks = self._chunks()
        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, chunks))
        return [fn(c) for c in chunks]

    def _initial_augmented(self, lo, hi):
        z = np.zeros((hi - lo, 3))
        z[:, :2] = self.initial_states[lo:hi]
        return z

    def _forward_chunk(self, maps, lo, hi):
        xi = self.noise[lo:hi]
        Z = _linear.forward(maps, self._initial_augmented(lo, hi), xi)
        _linear.check_finite(Z, self.grid.state_times, first_realization=lo)
        return Z, xi

    def cost(self, u):
        u = _check_control(u, self.grid)
        self.n_evaluations += 1
        maps = _maps(self.model, self.bath, u, self.grid)

        def work(chunk):
            Z, _ = self._forward_chunk(maps, *chunk)
            return np.sum(self.model.energy(Z[-1, :, 0], Z[-1, :, 1]))

        return float(sum(self._map_chunks(work))) / self.ensemble.M

    def cost_and_gradient(self, u):
        """Mean final energy and its exact gradient with respect to ``u``."""
        u = _check_control(u, self.grid)
        self.n_evaluations += 1
        maps = _maps(self.model, self.bath, u, self.grid)

        def work(chunk):
            Z, xi = self._forward_chunk(maps, *chunk)
            E = self.model.energy(Z[-1, :, 0], Z[-1, :, 1])
            L = _linear.backward(maps, _terminal_costate(self.model, Z[-1]))
            g = _linear.gradient_terms(maps, Z, L, xi)
            return np.sum(E), g.sum(axis=0)

        parts = self._map_chunks(work)
        M = self.ensemble.M
        cost = sum(p[0] for p in parts) / M
        grad = parts[0][1].copy()
        for p in parts[1:]:
            grad += p[1]
        return float(cost), grad / M

    __call__ = cost_and_gradient

    def energy_summary(self, u):
        """Ensemble mean and standard error of ``E(t)`` on ``grid.state_times``.

        States are not stored, so this is usable for long horizons.
        """
        u = _check_control(u, self.grid)
        maps = _maps(self.model, self.bath, u, self.grid)
        model = self.model

        def work(chunk):
            lo, hi = chunk
            E = _linear.forward_observe(
                maps, self._initial_augmented(lo, hi), self.noise[lo:hi],
                lambda z: model.energy(z[:, 0], z[:, 1]),
            )
            bad = ~np.isfinite(E)
            if bad.any():
                k, r = np.argwhere(bad)[0]
                raise DivergenceError(self.grid.state_times[k], int(r) + lo)
            return E.sum(axis=1), np.square(E).sum(axis=1)

        parts = self._map_chunks(work)
        M = self.ensemble.M
        s1 = sum(p[0] for p in parts)
        s2 = sum(p[1] for p in parts)
        mean = s1 / M
        var = np.maximum(s2 / M - mean**2, 0.0) * M / max(M - 1, 1)
        return EnsembleSummary(self.grid.state_times, mean, np.sqrt(var / M))


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    t: np.ndarray
    mean_E: np.ndarray
    stderr_E: np.ndarray

    def to_csv(self, path):
        return io.write_columns(path, {"t": self.t, "mean_E": self.mean_E, "stderr_E": self.stderr_E})


def ensemble_cost_and_gradient(model, bath, u, ens, grid, workers=None):
    """One-shot ensemble cost and gradient (builds a fresh problem each call)."""
    return LangevinEnsembleProblem(model, bath, grid, ens, workers).cost_and_gradient(u)
