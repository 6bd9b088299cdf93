"""Time grids and the enveloped sine/cosine/monomial waveform family.

The waveform family used throughout the package consists of ``n/3`` sines,
``n/3`` cosines and ``n/3`` monomials, all multiplied by a smooth switching
envelope that vanishes at both ends of the control interval::

    b_l(t)         = e(t) sin(2 pi l t / tau) / N_l
    b_{l+n/3}(t)   = e(t) cos(2 pi l t / tau) / N_l
    b_{l+2n/3}(t)  = e(t) t**(l - 1)          / N_l,      l = 1, ..., n/3

The envelope rises from 0 to 1 on ``[0, t0]`` through

    e(t) = (1 + tanh(eta * y / (1 - y**4))) / 2,   y = 2 t / t0 - 1,

stays at 1 on the plateau and mirrors the rise on ``[tau - t0, tau]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import io


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, tau]`` with ``N`` control samples.

    Control samples sit at ``t_k = k * dt`` for ``k = 1..N``; the state of a
    propagated system is stored at ``k = 0..N`` (see :attr:`state_times`).
    Control sample ``k`` is held constant on the interval ``(t_{k-1}, t_k]``.
    """

    tau: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def dt(self):
        return self.tau / self.N

    @property
    def times(self):
        """Control sample times ``t_1 .. t_N`` (the last one equals ``tau``)."""
        return self.tau * np.arange(1, self.N + 1) / self.N

    @property
    def state_times(self):
        """State times ``t_0 = 0 .. t_N = tau``."""
        return self.tau * np.arange(self.N + 1) / self.N

    @classmethod
    def from_step(cls, tau, dt):
        N = int(round(tau / dt))
        if not np.isclose(N * dt, tau, rtol=1e-12, atol=0):
            raise ValueError(f"tau={tau} is not an integer multiple of dt={dt}")
        return cls(tau, N)


@dataclass(frozen=True)
class EnvelopeSpec:
    t0: float = 0.5
    eta: float = 2.0
    tau: float = 15.0

    def __post_init__(self):
        if not 0 < self.t0 < self.tau / 2:
            raise ValueError(f"need 0 < t0 < tau/2, got t0={self.t0}, tau={self.tau}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class BasisSpec:
    n: int
    grid: TimeGrid
    envelope: EnvelopeSpec
    normalize: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3 or self.n % 3:
            raise ValueError(f"n must be a positive multiple of 3, got {self.n}")
        if not np.isclose(self.envelope.tau, self.grid.tau):
            raise ValueError("envelope tau and grid tau differ")

    @classmethod
    def standard(cls, N=1500, tau=15.0, n=12):
        """The 12-waveform basis of the oscillator benchmarks (t0 = 0.5, eta = 2)."""
        return cls(n, TimeGrid(tau, N), EnvelopeSpec(0.5, 2.0, tau))


def _rise(s, t0, eta):
    """Rising branch of the envelope for ``s`` in ``[0, t0]``."""
    y = 2.0 * s / t0 - 1.0
    denom = 1.0 - y**4
    out = np.empty_like(y)
    # the tanh argument diverges at y = +-1; use the exact limits there
    edge = np.abs(denom) < 1e-300
    out[edge] = np.where(y[edge] > 0, 1.0, 0.0)
    inner = ~edge
    out[inner] = 0.5 * (1.0 + np.tanh(eta * y[inner] / denom[inner]))
    return out


def envelope(t, spec):
    """Evaluate the switching envelope at time(s) ``t`` in ``[0, tau]``.

    Returns an array shaped like ``t`` (a float for scalar input).
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    slack = 1e-12 * spec.tau
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < -slack) or np.any(t_arr > spec.tau + slack):
        raise ValueError(f"envelope evaluated outside [0, {spec.tau}]")
    t_arr = np.clip(t_arr, 0.0, spec.tau)
    # distance to the nearer end of the interval; mirrors the rise onto the fall
    s = np.minimum(t_arr, spec.tau - t_arr)
    out = np.ones_like(t_arr)
    ramp = s < spec.t0
    out[ramp] = _rise(s[ramp], spec.t0, spec.eta)
    return float(out[0]) if scalar else out


def build_basis(spec):
    """Sample the waveform family of ``spec`` into an ``n x N`` matrix."""
    t = spec.grid.times
    e = envelope(t, spec.envelope)
    k = spec.n // 3
    tau = spec.grid.tau
    rows = []
    for l in range(1, k + 1):
        rows.append(e * np.sin(2 * np.pi * l * t / tau))
    for l in range(1, k + 1):
        rows.append(e * np.cos(2 * np.pi * l * t / tau))
    for l in range(1, k + 1):
        rows.append(e * t ** (l - 1))
    B = np.array(rows)
    if spec.normalize:
        B /= np.linalg.norm(B, axis=1, keepdims=True)
    return B


def export_basis(spec, path):
    """Build the basis for ``spec`` and write it as CSV (rows = waveforms)."""
    return io.write_matrix(path, build_basis(spec))
