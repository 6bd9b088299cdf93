"""Gradient-based optimal control restricted to the span of chosen waveforms.

The control signal is optimized directly in the time domain while every
gradient is projected onto the subspace spanned by a set of waveforms with the
Moore-Penrose projector ``B+ B``. See :mod:`pinvcontrol.optimize`.
"""
__version__ = "0.1.0"

from .errors import ConfigError, DivergenceError, NumericalError, PinvControlError
from .subspace import (
    SubspaceProjector,
    coefficients,
    gram_condition,
    orthonormal_basis,
    pinv,
    project,
    projector,
    synthesize,
)
from .waveforms import BasisSpec, EnvelopeSpec, TimeGrid, build_basis, envelope
from .dynamics import OscillatorControlProblem, OscillatorModel, propagate
from .langevin import BathModel, EnsembleConfig, LangevinEnsembleProblem
from .optimize import (
    OptimizerConfig,
    ProjectionStrategy,
    Strategy,
    Termination,
    compare_strategies,
    optimize,
    post_truncate,
)
from .analysis import SpectrogramSpec, dominant_frequency, spectrogram

__all__ = [
    "BasisSpec", "BathModel", "ConfigError", "DivergenceError", "EnsembleConfig",
    "EnvelopeSpec", "LangevinEnsembleProblem", "NumericalError", "OptimizerConfig",
    "OscillatorControlProblem", "OscillatorModel", "PinvControlError", "ProjectionStrategy",
    "SpectrogramSpec", "Strategy", "SubspaceProjector", "Termination", "TimeGrid",
    "build_basis", "coefficients", "compare_strategies", "dominant_frequency", "envelope",
    "gram_condition", "optimize", "orthonormal_basis", "pinv", "post_truncate", "project",
    "projector", "propagate", "spectrogram", "synthesize",
]
