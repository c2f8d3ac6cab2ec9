"""Dynamical-invariant control representation.

A control is described by three angles sampled on a uniform grid:
``gamma`` and ``beta`` locate the invariant's eigenvector on the Bloch
sphere and ``zeta`` tracks its accumulated phase.  This module maps such
trajectories to physical fields (amplitude, phase, detuning) and back,
and extracts the gate they realize.

Conventions
-----------
The control Hamiltonian is ``H = (Delta sz + Omega cos(phi) sx +
Omega sin(phi) sy) / 2``, with ``Omega_max = 1`` fixing the frequency
unit.  ``Z_a = exp(-i a sz / 2)`` and ``X_a = exp(-i a sx / 2)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegeneratePhaseWarning, SingularityError, ThetaMismatchError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)
I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, T]`` with ``N`` samples, endpoints included."""

    T: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"grid needs N >= 2 samples, got {self.N}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise ValueError(f"grid needs a positive finite duration, got {self.T}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / (self.N - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.N, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.T, (self.N - 1) * factor + 1)


def derivative(samples, dt):
    """Central differences inside, second-order one-sided at the ends."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] < 3:
        return np.gradient(samples, dt, axis=-1)
    return np.gradient(samples, dt, axis=-1, edge_order=2)


def cumulative_trapezoid(values, dt, initial=0.0):
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[0] = initial
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), out=out[1:])
    out[1:] += initial
    return out


def _check_samples(grid, **arrays):
    for name, a in arrays.items():
        a = np.asarray(a)
        if a.shape != (grid.N,):
            raise ValueError(f"{name} has shape {a.shape}, grid expects ({grid.N},)")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name} contains non-finite samples")


@dataclass(frozen=True, eq=False)
class InvariantTrajectory:
    grid: TimeGrid
    gamma: np.ndarray
    beta: np.ndarray
    zeta: np.ndarray
    gamma_dot: np.ndarray
    beta_dot: np.ndarray
    zeta_dot: np.ndarray

    def __post_init__(self):
        for name in ("gamma", "beta", "zeta", "gamma_dot", "beta_dot", "zeta_dot"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        _check_samples(
            self.grid, gamma=self.gamma, beta=self.beta, zeta=self.zeta,
            gamma_dot=self.gamma_dot, beta_dot=self.beta_dot, zeta_dot=self.zeta_dot,
        )

    @classmethod
    def from_angles(cls, grid, gamma, beta, zeta):
        """Build a trajectory whose derivatives come from finite differences."""
        gamma, beta, zeta = (np.asarray(a, dtype=float) for a in (gamma, beta, zeta))
        dt = grid.dt
        return cls(grid, gamma, beta, zeta,
                   derivative(gamma, dt), derivative(beta, dt), derivative(zeta, dt))

    @property
    def times(self):
        return self.grid.times

    def with_beta(self, beta, beta_dot=None):
        if beta_dot is None:
            beta_dot = derivative(beta, self.grid.dt)
        return InvariantTrajectory(self.grid, self.gamma, beta, self.zeta,
                                   self.gamma_dot, beta_dot, self.zeta_dot)

    def subsample(self, step: int) -> "InvariantTrajectory":
        if (self.grid.N - 1) % step:
            raise ValueError("step must divide N - 1")
        sl = slice(None, None, step)
        grid = TimeGrid(self.grid.T, (self.grid.N - 1) // step + 1)
        return InvariantTrajectory(grid, self.gamma[sl], self.beta[sl], self.zeta[sl],
                                   self.gamma_dot[sl], self.beta_dot[sl], self.zeta_dot[sl])


@dataclass(frozen=True, eq=False)
class ControlPulse:
    """Sampled fields.

    With ``hold=False`` the fields are interpolated linearly between
    samples.  With ``hold=True`` sample ``i`` is held over
    ``[t_i, t_{i+1})``, which represents square segments exactly when
    their edges sit on grid points.
    """

    grid: TimeGrid
    omega: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    degenerate: np.ndarray | None = field(default=None, repr=False)
    hold: bool = False

    def __post_init__(self):
        for name in ("omega", "phi", "delta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        _check_samples(self.grid, omega=self.omega, phi=self.phi, delta=self.delta)

    @property
    def times(self):
        return self.grid.times

    @property
    def hx(self):
        return self.omega * np.cos(self.phi)

    @property
    def hy(self):
        return self.omega * np.sin(self.phi)

    @property
    def hz(self):
        return self.delta

    def fields(self):
        """Cartesian drive components ``(Omega cos phi, Omega sin phi, Delta)``."""
        return self.hx, self.hy, self.hz

    def at_nodes(self) -> "ControlPulse":
        """Node values consistent with trapezoid quadrature.

        For a held pulse each interior node gets the mean of the fields held
        on its two neighbouring steps, so trapezoid sums of anything linear
        in the fields integrate each step exactly to second order.  Other
        pulses are returned unchanged.
        """
        if not self.hold:
            return self
        h = np.stack(self.fields())
        node = h.copy()
        node[:, 1:-1] = 0.5 * (h[:, :-2] + h[:, 1:-1])
        node[:, -1] = h[:, -2]
        return ControlPulse(self.grid, np.hypot(node[0], node[1]),
                            np.arctan2(node[1], node[0]), node[2])

    def hamiltonians(self):
        hx, hy, hz = self.fields()
        return 0.5 * (hx[:, None, None] * SX + hy[:, None, None] * SY + hz[:, None, None] * SZ)


@dataclass(frozen=True, eq=False)
class Gate:
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.shape != (2, 2):
            raise ValueError(f"gate must be 2x2, got {u.shape}")
        defect = np.linalg.norm(u.conj().T @ u - I2)
        if defect > 1e-10:
            raise ValueError(f"matrix is not unitary (defect {defect:.2e})")
        object.__setattr__(self, "u", u)

    def fidelity(self, other) -> float:
        """Trace fidelity ``|tr(A^dag B)| / 2``, blind to global phase."""
        return trace_fidelity(self.u, _as_matrix(other))

    def distance(self, other) -> float:
        return gate_distance(self.u, _as_matrix(other))


def _as_matrix(g):
    return g.u if isinstance(g, Gate) else np.asarray(g, dtype=complex)


def trace_fidelity(a, b) -> float:
    a, b = _as_matrix(a), _as_matrix(b)
    return float(abs(np.trace(a.conj().T @ b)) / 2)


def gate_distance(a, b) -> float:
    """Frobenius distance after optimal global-phase alignment."""
    a, b = _as_matrix(a), _as_matrix(b)
    phase = np.angle(np.trace(a.conj().T @ b))
    return float(np.linalg.norm(a * np.exp(1j * phase) - b))


def rz(angle):
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def rx(angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class ZxzDecomposition:
    theta: float
    psi1: float
    psi2: float

    def matrix(self):
        return rz(self.psi1) @ rx(self.theta) @ rz(self.psi2)


def _wrap(angle):
    """Wrap to (-pi, pi]."""
    a = np.mod(angle + np.pi, 2 * np.pi) - np.pi
    return float(np.pi if a == -np.pi else a)


# ---------------------------------------------------------------------------
# trajectory <-> pulse

def reverse_engineer(traj: InvariantTrajectory) -> ControlPulse:
    """Physical fields that realize an invariant trajectory.

    ``Omega = sqrt(gamma'^2 + zeta'^2 sin^2 gamma)``, ``Delta = beta' -
    zeta' cos gamma``, and the drive phase solves ``gamma' = -Omega
    sin(beta - phi)``, ``zeta' sin(gamma) = -Omega cos(beta - phi)``.
    Where both right-hand sides vanish the phase is undefined; the previous
    sample is carried forward and the sample is marked in
    ``pulse.degenerate``.
    """
    sg = np.sin(traj.gamma)
    along = traj.zeta_dot * sg
    across = traj.gamma_dot
    omega = np.hypot(across, along)
    delta = traj.beta_dot - traj.zeta_dot * np.cos(traj.gamma)
    phi = traj.beta - np.arctan2(-across, -along)
    scale = max(float(np.max(omega)), 1.0)
    degenerate = omega <= 1e-12 * scale
    if np.any(degenerate):
        phi = phi.copy()
        idx = np.flatnonzero(~degenerate)
        if idx.size == 0:
            phi[:] = traj.beta
        else:
            # carry forward; leading degenerate samples take the first defined value
            fill = np.maximum.accumulate(np.where(~degenerate, np.arange(len(phi)), -1))
            fill[fill < 0] = idx[0]
            phi = phi[fill]
        warnings.warn(
            f"drive phase undefined at {int(degenerate.sum())} samples; carried forward",
            DegeneratePhaseWarning, stacklevel=2,
        )
    phi = np.mod(phi + np.pi, 2 * np.pi) - np.pi
    return ControlPulse(traj.grid, omega, phi, delta,
                        degenerate if np.any(degenerate) else None)


def solve_beta_zero_detuning(gamma, zeta, grid: TimeGrid, zeta_dot=None):
    """``beta`` that makes the detuning vanish, with ``beta(0) = -zeta(0)``.

    Integrates ``beta' = zeta' cos(gamma)`` by cumulative trapezoid.
    """
    gamma = np.asarray(gamma, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    _check_samples(grid, gamma=gamma, zeta=zeta)
    if zeta_dot is None:
        zeta_dot = derivative(zeta, grid.dt)
    return cumulative_trapezoid(zeta_dot * np.cos(gamma), grid.dt, initial=-zeta[0])


def zero_detuning_trajectory(grid, gamma, zeta, gamma_dot=None, zeta_dot=None,
                             detuning=0.0):
    """Trajectory from ``(gamma, zeta)`` with ``beta`` fixed by a constant detuning.

    ``beta' = detuning + zeta' cos(gamma)`` is stored exactly, so the
    reverse-engineered detuning equals ``detuning`` to rounding.
    """
    gamma = np.asarray(gamma, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    dt = grid.dt
    gamma_dot = derivative(gamma, dt) if gamma_dot is None else np.asarray(gamma_dot, float)
    zeta_dot = derivative(zeta, dt) if zeta_dot is None else np.asarray(zeta_dot, float)
    beta_dot = detuning + zeta_dot * np.cos(gamma)
    beta = cumulative_trapezoid(beta_dot, dt, initial=-zeta[0])
    return InvariantTrajectory(grid, gamma, beta, zeta, gamma_dot, beta_dot, zeta_dot)


def forward_solve(pulse: ControlPulse, gamma0: float, beta0: float,
                  sing_tol: float = 1e-9) -> InvariantTrajectory:
    """Integrate the auxiliary equations for a given pulse.

    Fixed-step RK4 on the pulse grid; midpoint fields follow the pulse's
    interpolation rule.  ``zeta(0) = -beta0``.  Derivative samples are the
    right-hand sides evaluated on the grid with the node fields of
    :meth:`ControlPulse.at_nodes`, not finite differences.
    """
    st = [kernels.stages(a, pulse.hold) for a in pulse.fields()]
    hx, hy, hz = pulse.at_nodes().fields()
    gamma, beta, zeta, bad = kernels.rk4_invariants(
        *st, pulse.grid.dt, gamma0, beta0, -beta0, sing_tol)
    if bad >= 0:
        raise SingularityError(
            f"|sin(gamma)| < {sing_tol:g} at t = {bad * pulse.grid.dt:.6g} with "
            "transverse drive; perturb gamma0"
        )
    sb, cb, sg = np.sin(beta), np.cos(beta), np.sin(gamma)
    par = cb * hx + sb * hy
    safe = np.abs(sg) >= sing_tol
    inv_sg = np.divide(1.0, sg, out=np.zeros_like(sg), where=safe)
    gamma_dot = -(sb * hx - cb * hy)
    zeta_dot = -par * inv_sg
    beta_dot = hz - par * np.cos(gamma) * inv_sg
    return InvariantTrajectory(pulse.grid, gamma, beta, zeta, gamma_dot, beta_dot, zeta_dot)


# ---------------------------------------------------------------------------
# gates

def gate_from_invariants(traj: InvariantTrajectory) -> Gate:
    g0, gT = traj.gamma[0], traj.gamma[-1]
    b0, bT = traj.beta[0], traj.beta[-1]
    z0, zT = traj.zeta[0], traj.zeta[-1]
    u = rz(bT) @ ry(gT) @ rz(z0 - zT) @ ry(-g0) @ rz(-b0)
    return Gate(u)


def cos_theta_from_endpoints(traj: InvariantTrajectory) -> float:
    g0, gT = traj.gamma[0], traj.gamma[-1]
    dz = traj.zeta[0] - traj.zeta[-1]
    return float(np.cos(dz) * np.sin(gT) * np.sin(g0) + np.cos(gT) * np.cos(g0))


def zxz_decompose(g, gauge_tol: float = 1e-12) -> ZxzDecomposition:
    """``g = Z_psi1 X_theta Z_psi2`` up to global phase.

    ``theta`` lies in ``[0, pi]`` and both ``psi`` in ``(-pi, pi]``.  At
    ``theta`` in ``{0, pi}`` only one combination of the ``psi`` is
    defined; ``psi2`` is then set to 0.
    """
    u = _as_matrix(g)
    u = u / np.sqrt(np.linalg.det(u))
    a, b = u[0, 0], u[0, 1]
    theta = 2.0 * np.arctan2(abs(b), abs(a))
    if abs(b) < gauge_tol:
        return ZxzDecomposition(0.0, _wrap(-2 * np.angle(a)), 0.0)
    if abs(a) < gauge_tol:
        return ZxzDecomposition(np.pi, _wrap(-2 * np.angle(1j * b)), 0.0)
    total = -2 * np.angle(a)
    diff = -2 * np.angle(1j * b)
    return ZxzDecomposition(float(theta), _wrap(0.5 * (total + diff)), _wrap(0.5 * (total - diff)))


def compose_target(g, target, tol: float = 1e-3):
    """Virtual-Z frames that build ``target`` from two uses of ``g``.

    ``g`` must be a ``theta = pi/2`` gate.  Returns the angles
    ``[a1, a2, a3]`` with ``target ~ Z_a1 g Z_a2 g Z_a3`` as a list of
    ``(angle, slot)`` pairs in matrix (left-to-right) order, where ``slot``
    is the index of the physical gate that follows the Z rotation, or
    ``None`` after the last one.
    """
    dec = zxz_decompose(g)
    if abs(dec.theta - np.pi / 2) > tol:
        raise ThetaMismatchError(
            f"physical gate has theta = {dec.theta:.6f}, needs pi/2 within {tol:g}"
        )
    tgt = zxz_decompose(target)
    # X_{pi/2} Z_m X_{pi/2} has theta = tgt.theta when m = pi - tgt.theta
    x90 = rx(np.pi / 2)
    middle = np.pi - tgt.theta
    mid = zxz_decompose(x90 @ rz(middle) @ x90)
    theta1 = tgt.psi1 - mid.psi1
    theta3 = tgt.psi2 - mid.psi2
    angles = [
        _wrap(theta1 - dec.psi1),
        _wrap(middle - dec.psi1 - dec.psi2),
        _wrap(theta3 - dec.psi2),
    ]
    return [(angles[0], 0), (angles[1], 1), (angles[2], None)]


def apply_frames(g, frames):
    """Matrix product described by :func:`compose_target` frames."""
    u = _as_matrix(g)
    out = I2.copy()
    for angle, slot in frames:
        out = out @ rz(angle)
        if slot is not None:
            out = out @ u
    return out
