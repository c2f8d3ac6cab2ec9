"""Noise-robust one-qubit pulses from dynamical-invariant trajectories.

The package works on the invariant angles ``(gamma, beta, zeta)`` rather
than on the drive directly: filter functions, first-order infidelities,
gate decompositions and phases all follow from the angles, and the drive
is recovered from them by reverse engineering.
"""
from .errors import (CalibrationError, ConstraintError, DivergentVarianceError,
                     InstabilityError, ParseError, PulseforgeError, SingularityError,
                     SynthesisError, ThetaMismatchError, UnknownPulseError)
from .filters import (calibrate_amplitude, curve_geometry, ff_amplitude, ff_detuning,
                      ff_multiplicative_detuning, filter_function, frequency_infidelity,
                      infidelity, robustness_flags, static_filter_values)
from .geometric import phase_decompose, synthesize_robust_trajectory, theorem_check
from .invariants import (ControlPulse, Gate, InvariantTrajectory, TimeGrid, forward_solve,
                         gate_from_invariants, reverse_engineer, zxz_decompose)
from .kernels import BACKEND
from .noise import (ADDITIVE_DETUNING, MULTIPLICATIVE_AMPLITUDE, MULTIPLICATIVE_DETUNING,
                    BandOneOverF, DeltaPSD, NoiseChannel, OneOverFWithTail)
from .oracle import ff_direct, monte_carlo_infidelity, tdse_propagate
from .pulses import PULSE_KINDS, build_pulse, naive_pulse

__version__ = "0.1.0"

__all__ = [
    "ADDITIVE_DETUNING", "BACKEND", "BandOneOverF", "CalibrationError", "ConstraintError",
    "ControlPulse", "DeltaPSD", "DivergentVarianceError", "Gate", "InstabilityError",
    "InvariantTrajectory", "MULTIPLICATIVE_AMPLITUDE", "MULTIPLICATIVE_DETUNING",
    "NoiseChannel", "OneOverFWithTail", "PULSE_KINDS", "ParseError", "PulseforgeError",
    "SingularityError", "SynthesisError", "ThetaMismatchError", "TimeGrid",
    "UnknownPulseError", "build_pulse", "calibrate_amplitude", "curve_geometry",
    "ff_amplitude", "ff_detuning", "ff_direct", "ff_multiplicative_detuning",
    "filter_function", "forward_solve", "frequency_infidelity", "gate_from_invariants",
    "infidelity", "monte_carlo_infidelity", "naive_pulse", "phase_decompose",
    "reverse_engineer", "robustness_flags", "static_filter_values",
    "synthesize_robust_trajectory", "tdse_propagate", "theorem_check", "zxz_decompose",
]
