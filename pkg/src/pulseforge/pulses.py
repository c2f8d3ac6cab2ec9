"""Reference pulses: the naive square pulse and composite sequences.

Every segment is a square rotation at ``Omega = Omega_max = 1``, so a
segment's duration equals its rotation angle.  Sequences are listed in
time order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownPulseError
from .invariants import I2, SX, SY, SZ, ControlPulse, TimeGrid, forward_solve

PULSE_KINDS = ("naive", "short_corpse", "corpse", "bb1", "cinbb", "cinsk")
DEFAULT_RESOLUTION = 256


@dataclass(frozen=True)
class CompositeSpec:
    """Square segments ``(angle, phase)`` played at a common amplitude."""

    segments: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        segs = tuple((float(a), float(p)) for a, p in self.segments)
        if not segs:
            raise ValueError("a composite needs at least one segment")
        if self.amplitude <= 0 or not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be positive")
        if any(a <= 0 or not np.isfinite(a) for a, _ in segs):
            raise ValueError("segment angles must be positive and finite")
        object.__setattr__(self, "segments", segs)

    @property
    def durations(self):
        return np.array([a for a, _ in self.segments]) / self.amplitude

    @property
    def duration(self):
        return float(self.durations.sum())

    def sample(self, resolution: float = DEFAULT_RESOLUTION) -> ControlPulse:
        """Zero-order-hold samples on a uniform grid of about ``resolution`` steps per unit time.

        A step lying inside one segment holds that segment's field.  A step
        that straddles segment edges holds the constant field whose
        propagator over the step equals the exact product of the pieces, so
        the realized gate does not depend on where the edges fall.  Such a
        field can carry a small ``z`` component when the neighbouring drive
        axes differ.
        """
        T = self.duration
        grid = TimeGrid(T, int(np.ceil(T * resolution)) + 1)
        dt = grid.dt
        edges = np.concatenate([[0.0], np.cumsum(self.durations)])
        edges[-1] = T
        fields = np.array([[self.amplitude * np.cos(p), self.amplitude * np.sin(p), 0.0]
                           for _, p in self.segments])
        t = grid.times
        seg = np.clip(np.searchsorted(edges, t[:-1], side="right") - 1, 0, len(fields) - 1)
        h = fields[seg]
        # steps whose interior contains an edge
        straddle = np.unique(np.searchsorted(t, edges[1:-1], side="right") - 1)
        for i in straddle[(straddle >= 0) & (straddle < grid.N - 1)]:
            h[i] = _effective_field(fields, edges, t[i], t[i + 1])
        h = np.vstack([h, h[-1]])
        omega = np.hypot(h[:, 0], h[:, 1])
        phi = np.arctan2(h[:, 1], h[:, 0])
        return ControlPulse(grid, omega, phi, h[:, 2], hold=True)


def _effective_field(fields, edges, t0, t1):
    """Constant field whose step propagator equals the exact product."""
    u = I2
    for s in range(len(fields)):
        a, b = max(edges[s], t0), min(edges[s + 1], t1)
        if b > a:
            hx, hy, hz = fields[s]
            u = _rotation(hx, hy, hz, b - a) @ u
    u = u / np.sqrt(np.linalg.det(u))
    # u = cos(a) - i sin(a) n.sigma
    c = np.clip(u[0, 0].real + u[1, 1].real, -2, 2) / 2
    vec = np.array([-(u[0, 1] + u[1, 0]).imag / 2, (u[1, 0] - u[0, 1]).real / 2,
                    -(u[0, 0] - u[1, 1]).imag / 2])
    s = np.linalg.norm(vec)
    angle = np.arctan2(s, c)
    if s == 0:
        return np.zeros(3)
    return 2 * angle * vec / s / (t1 - t0)


def _rotation(hx, hy, hz, tau):
    """``exp(-i tau (h . sigma) / 2)``."""
    r = np.sqrt(hx * hx + hy * hy + hz * hz)
    if r == 0:
        return I2
    n = np.array([hx, hy, hz]) / r
    a = 0.5 * r * tau
    return np.cos(a) * I2 - 1j * np.sin(a) * (n[0] * SX + n[1] * SY + n[2] * SZ)


def corpse_k(theta):
    return float(np.arcsin(np.sin(theta / 2) / 2))


def wimperis_phase(theta):
    return float(np.arccos(-theta / (4 * np.pi)))


def composite_spec(kind: str, theta_target: float = np.pi / 2) -> CompositeSpec:
    """Segment list for a named sequence targeting ``X_theta``."""
    th = float(theta_target)
    if not 0 < th < 2 * np.pi:
        raise ValueError(f"target angle must lie in (0, 2 pi), got {th}")
    k = corpse_k(th)
    pw = wimperis_phase(th)
    short = [(th / 2 - k, 0.0), (2 * np.pi - 2 * k, np.pi), (th / 2 - k, 0.0)]
    regular = [(2 * np.pi + th / 2 - k, 0.0), (2 * np.pi - 2 * k, np.pi), (th / 2 - k, 0.0)]
    bb = [(np.pi, pw), (2 * np.pi, 3 * pw), (np.pi, pw)]
    sk = [(2 * np.pi, pw), (2 * np.pi, -pw)]
    table = {
        "naive": [(th, 0.0)],
        "short_corpse": short,
        "corpse": regular,
        "bb1": [(th, 0.0)] + bb,
        "cinbb": bb + regular,
        "cinsk": regular + sk,
    }
    if kind not in table:
        raise UnknownPulseError(f"unknown pulse kind {kind!r}; expected one of {PULSE_KINDS}")
    return CompositeSpec(tuple(table[kind]))


def build_pulse(kind: str, theta_target: float = np.pi / 2,
                resolution: float = DEFAULT_RESOLUTION) -> ControlPulse:
    return composite_spec(kind, theta_target).sample(resolution)


def naive_pulse(theta_target: float = np.pi / 2, n_points: int = 1024) -> ControlPulse:
    """Square ``X_theta`` at full amplitude on an ``n_points`` grid."""
    grid = TimeGrid(theta_target, n_points)
    return ControlPulse(grid, np.ones(grid.N), np.zeros(grid.N), np.zeros(grid.N))


def pulse_to_invariants(pulse: ControlPulse, gamma0: float, beta0: float):
    return forward_solve(pulse, gamma0, beta0)
