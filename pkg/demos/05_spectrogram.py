"""
Where the control puts its power
================================

A short-time Fourier transform of the projected control shows the pumping
tone near twice the oscillator frequency throughout the interval.
"""

import numpy as np

from pinvcontrol import (
    BasisSpec,
    OscillatorControlProblem,
    ProjectionStrategy,
    SpectrogramSpec,
    build_basis,
    optimize,
    spectrogram,
)

problem = OscillatorControlProblem()
B = build_basis(BasisSpec.standard(N=problem.N))
u = optimize(problem, ProjectionStrategy.pinv(B)).final_control

# the default window (N/8 samples) is only 1.9 time units long; its bins are
# 3.3 rad apart, too coarse to resolve omega = 2. Six time units do better.
dt = problem.grid.dt
print("default bin spacing: %.2f" % (2 * np.pi / (SpectrogramSpec.default(problem.N).window_length * dt)))
spec = SpectrogramSpec(window_length=600, hop=75)
sg = spectrogram(u, spec, dt)
print("window %d samples, hop %d, %d frames, %d frequency bins"
      % (spec.window_length, spec.hop, sg.times.size, sg.frequencies.size))

peaks = sg.peak_frequencies()
for t, w in list(zip(sg.times, peaks))[::4]:
    print("  t = %5.2f   peak omega = %.2f" % (t, w))
print("median peak: %.2f rad per time unit" % np.median(peaks))

sg.to_csv("spectrogram.csv")
