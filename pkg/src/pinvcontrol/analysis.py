"""Short-time Fourier analysis of control signals."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import io
from .errors import NumericalError

_WINDOWS = {
    "hann": lambda L: np.hanning(L + 1)[:-1],  # periodic Hann
    "rect": np.ones,
}


@dataclass(frozen=True)
class SpectrogramSpec:
    window_length: int
    hop: int
    window_shape: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop <= self.window_length:
            raise ValueError(f"need 0 < hop <= window_length, got hop={self.hop}")
        if self.window_shape not in _WINDOWS:
            raise ValueError(f"unknown window {self.window_shape!r}; choose from {sorted(_WINDOWS)}")

    @classmethod
    def default(cls, N):
        """Hann window of ``N/8`` samples (rounded to even) with 75 % overlap."""
        L = max(2, 2 * round(N / 16))
        return cls(L, max(1, L // 4))


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Magnitudes indexed ``[frequency, time]``.

    The one-sided spectrum is scaled so that, per window, the squared
    magnitudes sum to the energy ``sum((w * u)**2)`` of the windowed segment.
    """

    times: np.ndarray
    frequencies: np.ndarray
    magnitudes: np.ndarray

    def peak_frequencies(self, include_zero=False):
        """Frequency of the strongest bin in every window."""
        mags = self.magnitudes if include_zero else self.magnitudes[1:]
        idx = np.argmax(mags, axis=0) + (0 if include_zero else 1)
        return self.frequencies[idx]

    def to_csv(self, path):
        """Write as a matrix: header row of window times, then one row per frequency."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["omega\\t"] + [io.FLOAT_FMT % t for t in self.times])
            for w, row in zip(self.frequencies, self.magnitudes):
                writer.writerow([io.FLOAT_FMT % w] + [io.FLOAT_FMT % v for v in row])
        return path


def read_spectrogram_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    times = np.array([float(v) for v in rows[0][1:]])
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return Spectrogram(times, body[:, 0], body[:, 1:])


def _one_sided_scale(L):
    scale = np.full(L // 2 + 1, np.sqrt(2.0 / L))
    scale[0] = np.sqrt(1.0 / L)
    if L % 2 == 0:
        scale[-1] = np.sqrt(1.0 / L)
    return scale


def spectrogram(u, spec, dt, t_start=None):
    """Windowed Fourier transform of ``u`` sampled with spacing ``dt``.

    Frequencies are angular (rad per time unit). ``t_start`` is the time of
    ``u[0]`` (default ``dt``, matching the control grid); window times are
    window centers.
    """
    u = np.asarray(u, dtype=float)
    L = spec.window_length
    if L > u.size:
        raise ValueError(f"window of {L} samples is longer than the signal ({u.size})")
    t_start = dt if t_start is None else t_start
    frames = sliding_window_view(u, L)[:: spec.hop]
    window = _WINDOWS[spec.window_shape](L)
    mags = np.abs(np.fft.rfft(frames * window, axis=1)) * _one_sided_scale(L)
    starts = np.arange(frames.shape[0]) * spec.hop
    times = t_start + (starts + 0.5 * (L - 1)) * dt
    freqs = 2 * np.pi * np.fft.rfftfreq(L, dt)
    return Spectrogram(times, freqs, mags.T)


def bin_width(N, dt):
    """Angular-frequency spacing of an ``N``-point DFT."""
    return 2 * np.pi / (N * dt)


def dominant_frequency(u, dt):
    """Angular frequency of the largest non-constant DFT component of ``u``."""
    u = np.asarray(u, dtype=float)
    spectrum = np.abs(np.fft.rfft(u))
    # rounding leaves ~1e-16 relative residue in the bins of a constant signal
    if u.size < 2 or not np.any(spectrum[1:] > 1e-12 * spectrum.max(initial=0.0)):
        raise NumericalError("dominant frequency undefined for a constant or zero signal")
    freqs = 2 * np.pi * np.fft.rfftfreq(u.size, dt)
    return float(freqs[1 + np.argmax(spectrum[1:])])
