"""Noise spectra, time-domain kernels and sensitivity rules.

Every PSD is two-sided and even in ``omega``.  The kernel of a PSD is

    g(tau) = (1 / 2 pi) int S(omega) exp(i omega tau) d omega,

which is real and even.  Closed forms are used for all three families;
the test suite checks them against direct quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergentVarianceError
from .special import cin, si

TWO_PI = 2.0 * np.pi


def _positive(name, value):
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class DeltaPSD:
    """``S(omega) = weight * delta(omega)``: quasi-static noise."""

    weight: float

    kind = "delta"

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")

    def kernel(self, tau):
        tau = _check_tau(tau)
        return np.full_like(tau, self.weight / TWO_PI)

    def variance(self):
        return self.weight / TWO_PI

    def density(self, omega):
        # the continuous part is zero; the atom sits at omega = 0
        return np.zeros_like(np.asarray(omega, dtype=float))

    def scaled(self, factor):
        return DeltaPSD(self.weight * factor)

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight}


@dataclass(frozen=True)
class BandOneOverF:
    """``S = A / |omega|`` on ``omega0 <= |omega| <= omegac``, zero elsewhere."""

    amplitude: float
    omega0: float
    omegac: float

    kind = "band"

    def __post_init__(self):
        if not np.isfinite(self.amplitude) or self.amplitude < 0:
            raise ValueError(f"amplitude must be nonnegative, got {self.amplitude}")
        _positive("omega0", self.omega0)
        _positive("omegac", self.omegac)
        if not self.omega0 < self.omegac:
            raise ValueError("band edges need 0 < omega0 < omegac")

    def kernel(self, tau):
        # (A/pi)(Ci(wc t) - Ci(w0 t)) written through Cin to keep the
        # logarithmic limit at t = 0 exact
        x = np.abs(_check_tau(tau))
        log_ratio = np.log(self.omegac / self.omega0)
        return (self.amplitude / np.pi) * (
            log_ratio - cin(self.omegac * x) + cin(self.omega0 * x))

    def variance(self):
        return self.amplitude / np.pi * np.log(self.omegac / self.omega0)

    def density(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        inside = (w >= self.omega0) & (w <= self.omegac)
        return np.where(inside, self.amplitude / np.where(inside, w, 1.0), 0.0)

    def scaled(self, factor):
        return BandOneOverF(self.amplitude * factor, self.omega0, self.omegac)

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude,
                "omega0": self.omega0, "omegac": self.omegac}


@dataclass(frozen=True)
class OneOverFWithTail:
    """``A/|omega|`` on the band, then ``A omegac / omega^2`` above ``omegac``."""

    amplitude: float
    omega0: float
    omegac: float

    kind = "band_tail"

    def __post_init__(self):
        BandOneOverF(self.amplitude, self.omega0, self.omegac)

    @property
    def band(self):
        return BandOneOverF(self.amplitude, self.omega0, self.omegac)

    def tail_kernel(self, tau):
        x = self.omegac * np.abs(_check_tau(tau))
        return (self.amplitude / np.pi) * (np.cos(x) - x * (0.5 * np.pi - si(x)))

    def kernel(self, tau):
        return self.band.kernel(tau) + self.tail_kernel(tau)

    def variance(self):
        return self.band.variance() + self.amplitude / np.pi

    def density(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        tail = np.where(w > self.omegac,
                        self.amplitude * self.omegac / np.maximum(w, self.omegac) ** 2, 0.0)
        return self.band.density(w) + tail

    def scaled(self, factor):
        return OneOverFWithTail(self.amplitude * factor, self.omega0, self.omegac)

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude,
                "omega0": self.omega0, "omegac": self.omegac}


PSD_KINDS = {"delta": DeltaPSD, "band": BandOneOverF, "band_tail": OneOverFWithTail}


def psd_from_dict(spec: dict):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in PSD_KINDS:
        raise ValueError(f"unknown PSD kind {kind!r}; expected one of {sorted(PSD_KINDS)}")
    return PSD_KINDS[kind](**{k: float(v) for k, v in spec.items()})


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise ValueError("kernel lag must be finite")
    return tau


def kernel_g(psd, tau):
    """Time-domain noise kernel ``g(tau)`` of a PSD."""
    out = psd.kernel(tau)
    return float(out) if np.ndim(out) == 0 else out


def noise_variance(psd):
    """``<delta^2> = (1 / 2 pi) int S d omega``."""
    if not hasattr(psd, "variance"):
        raise DivergentVarianceError(f"{type(psd).__name__} has no finite variance")
    v = psd.variance()
    if not np.isfinite(v):
        raise DivergentVarianceError(f"{type(psd).__name__} variance diverges")
    return v


# ---------------------------------------------------------------------------
# sensitivities
#
# Each rule maps a pulse or a trajectory to samples chi(t) of shape (N, 3).
# The trajectory form expresses the drive through the invariant angles so
# that it stays differentiable and never touches the phase branch.

def _amp_from_traj(traj):
    sg = np.sin(traj.gamma)
    cb, sb = np.cos(traj.beta), np.sin(traj.beta)
    along = traj.zeta_dot * sg
    ox = -cb * along - sb * traj.gamma_dot
    oy = -sb * along + cb * traj.gamma_dot
    return ox, oy


@dataclass(frozen=True)
class Sensitivity:
    name: str
    from_pulse: Callable = field(repr=False, compare=False)
    from_trajectory: Callable = field(repr=False, compare=False)


def _stack(x, y, z):
    return 0.5 * np.stack(np.broadcast_arrays(x, y, z), axis=-1)


ADDITIVE_DETUNING = Sensitivity(
    "additive_detuning",
    lambda p: _stack(0.0, 0.0, np.ones_like(p.omega)),
    lambda tr: _stack(0.0, 0.0, np.ones_like(tr.gamma)),
)

MULTIPLICATIVE_AMPLITUDE = Sensitivity(
    "multiplicative_amplitude",
    lambda p: _stack(p.hx, p.hy, 0.0),
    lambda tr: _stack(*_amp_from_traj(tr), 0.0),
)

MULTIPLICATIVE_DETUNING = Sensitivity(
    "multiplicative_detuning",
    lambda p: _stack(0.0, 0.0, p.delta),
    lambda tr: _stack(0.0, 0.0, tr.beta_dot - tr.zeta_dot * np.cos(tr.gamma)),
)

SENSITIVITIES = {s.name: s for s in
                 (ADDITIVE_DETUNING, MULTIPLICATIVE_AMPLITUDE, MULTIPLICATIVE_DETUNING)}


@dataclass(frozen=True)
class NoiseChannel:
    """One stochastic variable: a PSD and how it couples to the qubit.

    ``gain`` rescales the sensitivity, so the Hamiltonian perturbation is
    ``gain * delta(t) * chi(t) . sigma``.
    """

    id: str
    psd: object
    sensitivity: Sensitivity = ADDITIVE_DETUNING
    gain: float = 1.0

    def chi_pulse(self, pulse):
        return self.gain * self.sensitivity.from_pulse(pulse)

    def chi_trajectory(self, traj):
        return self.gain * self.sensitivity.from_trajectory(traj)

    def scaled(self, factor):
        """Same channel with the PSD amplitude multiplied by ``factor``."""
        return NoiseChannel(self.id, self.psd.scaled(factor), self.sensitivity, self.gain)

    def to_dict(self):
        return {"id": self.id, "psd": self.psd.to_dict(),
                "sensitivity": self.sensitivity.name, "gain": self.gain}

    @classmethod
    def from_dict(cls, spec):
        sens = spec.get("sensitivity", ADDITIVE_DETUNING.name)
        if sens not in SENSITIVITIES:
            raise ValueError(f"unknown sensitivity {sens!r}; expected one of {sorted(SENSITIVITIES)}")
        return cls(str(spec["id"]), psd_from_dict(spec["psd"]), SENSITIVITIES[sens],
                   float(spec.get("gain", 1.0)))
