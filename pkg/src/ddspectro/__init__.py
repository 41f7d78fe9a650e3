"""Dynamical-decoupling noise spectroscopy toolkit.

Simulates a dephasing probe qubit under pulse sequences (analytically and by
Monte Carlo over synthesized noise trajectories) and reconstructs the
environmental noise spectral density from the measured decay rates by
triangular-system inversion with a power-law tail correction.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .exceptions import (
    AliasingError,
    DomainError,
    GridMismatchError,
    InsufficientDataError,
    QuadratureError,
    SchemaError,
    SpectroscopyError,
    TailModelRejectedError,
)
from .filters import (
    HarmonicWeights,
    SensitivityMatrix,
    filter_function_sq,
    harmonic_tail_sum,
    harmonic_weights,
    sensitivity_matrix,
)
from .noise import (
    Lorentzian,
    Modulated,
    NoiseTrajectory,
    PowerLaw,
    SpectralModel,
    Tabulated,
    WhiteNoise,
    average_periodogram,
    synthesize,
)
from .sequence import PulseSequence, make_cpmg, modulation
from .simulate import (
    DecayCurve,
    analytic_curve,
    decay_exponent,
    monte_carlo_curve,
    run_suite,
)
from .spectro import (
    BaselineFit,
    RateFit,
    RateSet,
    SpectrumEstimate,
    TailFit,
    first_harmonic,
    fit_rate,
    fit_tail,
    invert_corrected,
    invert_naive,
    subtract_baseline,
    suite_weights,
)

__all__ = [
    "__version__",
    "KERNEL_BACKEND",
    "AliasingError",
    "DomainError",
    "GridMismatchError",
    "InsufficientDataError",
    "QuadratureError",
    "SchemaError",
    "SpectroscopyError",
    "TailModelRejectedError",
    "HarmonicWeights",
    "SensitivityMatrix",
    "filter_function_sq",
    "harmonic_tail_sum",
    "harmonic_weights",
    "sensitivity_matrix",
    "Lorentzian",
    "Modulated",
    "NoiseTrajectory",
    "PowerLaw",
    "SpectralModel",
    "Tabulated",
    "WhiteNoise",
    "average_periodogram",
    "synthesize",
    "PulseSequence",
    "make_cpmg",
    "modulation",
    "DecayCurve",
    "analytic_curve",
    "decay_exponent",
    "monte_carlo_curve",
    "run_suite",
    "BaselineFit",
    "RateFit",
    "RateSet",
    "SpectrumEstimate",
    "TailFit",
    "first_harmonic",
    "fit_rate",
    "fit_tail",
    "invert_corrected",
    "invert_naive",
    "subtract_baseline",
    "suite_weights",
]
