"""Geometric and dynamical phases of an invariant eigenvector.

With ``zeta = 2 alpha - beta`` the Lewis-Riesenfeld phase of the ``+``
eigenvector is ``alpha = (zeta + beta) / 2``.  Its dynamical part is

    alpha_d(T) = 1/2 int (zeta' - beta' cos gamma) dt,

and the geometric part is the remainder.  Under a constant detuning the
integrand of ``alpha_d`` splits into two pieces, each the first component
of a static filter-function vector, which :func:`theorem_check` exploits.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import ConstraintError, SynthesisError
from .filters import (ROBUST_THRESHOLD, amplitude_integrand, detuning_integrand,
                      multiplicative_detuning_integrand)
from .invariants import InvariantTrajectory, TimeGrid, zero_detuning_trajectory

CYCLIC_TOL = 1e-6
CONSTANT_TOL = 1e-6
DETUNING_MODES = ("additive", "multiplicative")


@dataclass(frozen=True)
class PhaseReport:
    alpha_total: float
    alpha_geometric: float
    alpha_dynamical: float
    cyclic: bool

    def to_dict(self):
        return asdict(self)


def _wrapped(x):
    return float(np.mod(x + np.pi, 2 * np.pi) - np.pi)


def dynamical_phase(traj: InvariantTrajectory) -> float:
    integrand = 0.5 * (traj.zeta_dot - traj.beta_dot * np.cos(traj.gamma))
    return float(traj.grid.weights @ integrand)


def total_phase(traj: InvariantTrajectory) -> float:
    """``alpha(T) - alpha(0)`` read off the endpoint angles."""
    return 0.5 * float((traj.zeta[-1] + traj.beta[-1]) - (traj.zeta[0] + traj.beta[0]))


def is_cyclic(traj: InvariantTrajectory, tol: float = CYCLIC_TOL) -> bool:
    """Whether the eigenvector returns to itself: same ``gamma`` and ``beta`` mod 2 pi."""
    dg = traj.gamma[-1] - traj.gamma[0]
    db = _wrapped(traj.beta[-1] - traj.beta[0])
    return bool(np.hypot(dg, db) <= tol)


def phase_decompose(traj: InvariantTrajectory) -> PhaseReport:
    total = total_phase(traj)
    dyn = dynamical_phase(traj)
    return PhaseReport(total, total - dyn, dyn, is_cyclic(traj))


def detuning_of(traj: InvariantTrajectory):
    return traj.beta_dot - traj.zeta_dot * np.cos(traj.gamma)


@dataclass(frozen=True)
class TheoremReport:
    """Quantities entering the constant-detuning theorem.

    ``bound`` is the largest ``|alpha_d|`` compatible with the measured
    static filter values; ``applies`` says whether both are below
    ``ROBUST_THRESHOLD * T^2``.
    """

    mode: str
    detuning: float
    alpha_dynamical: float
    F_detuning_0: float
    F_amplitude_0: float
    bound: float
    applies: bool

    @property
    def margin(self):
        return self.bound - abs(self.alpha_dynamical)

    @property
    def holds(self):
        # rounding in the quadrature sums is far below this slack
        return abs(self.alpha_dynamical) <= self.bound + 1e-12 * (1 + abs(self.alpha_dynamical))

    def to_dict(self):
        out = asdict(self)
        out.update(margin=self.margin, holds=self.holds)
        return out


def theorem_check(traj: InvariantTrajectory, detuning_mode: str = "additive") -> TheoremReport:
    """Bound the dynamical phase by the static filter values.

    With constant ``Delta``,
    ``alpha_d = -(Delta/2) int cos(gamma) dt + (1/2) int zeta' sin^2(gamma) dt``.
    The two integrals are the first components of the static detuning and
    amplitude vectors, so ``|alpha_d| <= |Delta| sqrt(F_D(0)) + sqrt(F_O(0))``
    for additive detuning noise.  For multiplicative detuning the first term
    is already ``Delta``-weighted and the bound reads
    ``sqrt(F_x(0)) + sqrt(F_O(0))``.
    """
    if detuning_mode not in DETUNING_MODES:
        raise ValueError(f"detuning_mode must be one of {DETUNING_MODES}")
    delta = detuning_of(traj)
    spread = float(np.max(np.abs(delta - delta.mean())))
    if spread > CONSTANT_TOL:
        raise ConstraintError(f"detuning varies by {spread:.2e} > {CONSTANT_TOL:g}; "
                              "the theorem needs a constant detuning")
    d = float(delta.mean())
    w = traj.grid.weights
    if detuning_mode == "additive":
        fd = float(np.sum((w @ detuning_integrand(traj)) ** 2))
        scale = abs(d)
    else:
        fd = float(np.sum((w @ multiplicative_detuning_integrand(traj)) ** 2))
        scale = 1.0
    fo = float(np.sum((w @ amplitude_integrand(traj)) ** 2))
    eps = ROBUST_THRESHOLD * traj.grid.T ** 2
    return TheoremReport(detuning_mode, d, dynamical_phase(traj), fd, fo,
                         scale * np.sqrt(fd) + np.sqrt(fo), fd <= eps and fo <= eps)


# ---------------------------------------------------------------------------
# constant-detuning trajectory synthesis

def _basis(grid, n_modes):
    s = grid.times / grid.T
    k = np.arange(1, n_modes + 1)[:, None]
    arg = np.pi * k * s
    return np.sin(arg), np.pi * k / grid.T * np.cos(arg), s, grid.T


def _angles(x, basis, n_modes, gamma_span):
    sin_b, dsin_b, s, T = basis
    a, b = x[:n_modes], x[n_modes:2 * n_modes]
    slope, zeta0 = x[2 * n_modes], x[2 * n_modes + 1]
    u = a @ sin_b
    gamma = 0.5 * np.pi + gamma_span * np.tanh(u)
    gamma_dot = gamma_span * (a @ dsin_b) / np.cosh(u) ** 2
    zeta = zeta0 + b @ sin_b + slope * s
    zeta_dot = b @ dsin_b + slope / T
    return gamma, gamma_dot, zeta, zeta_dot


def synthesize_robust_trajectory(T: float, detuning: float = 0.0, seed: int = 0,
                                 n_points: int = 513, n_modes: int = 6,
                                 target: str = "robust",
                                 detuning_mode: str = "additive") -> InvariantTrajectory:
    """Random smooth trajectory with constant detuning, driven to a static target.

    ``target="robust"`` zeros both static filter vectors (detuning noise of
    kind ``detuning_mode`` and amplitude noise).  ``target="geometric"``
    only zeros the dynamical phase, which generally leaves the amplitude
    filter nonzero.  ``gamma`` stays within ``pi/2 +- 1.3`` so the drive is
    never singular.
    """
    if target not in ("robust", "geometric"):
        raise ValueError("target must be 'robust' or 'geometric'")
    grid = TimeGrid(T, n_points)
    w = grid.weights
    basis = _basis(grid, n_modes)
    span = 1.3

    def build(x):
        g, gd, z, zd = _angles(x, basis, n_modes, span)
        return zero_detuning_trajectory(grid, g, z, gd, zd, detuning=detuning)

    def residual(x):
        tr = build(x)
        if target == "geometric":
            return np.atleast_1d(dynamical_phase(tr)) / T
        det = (detuning_integrand(tr) if detuning_mode == "additive"
               else multiplicative_detuning_integrand(tr))
        return np.concatenate([w @ det, w @ amplitude_integrand(tr)]) / T

    rng = np.random.default_rng(seed)
    x0 = np.concatenate([rng.normal(0, 0.6, n_modes) / np.arange(1, n_modes + 1),
                         rng.normal(0, 2.0, n_modes) / np.arange(1, n_modes + 1),
                         [rng.normal(0, 1.0), rng.uniform(-np.pi, np.pi)]])
    sol = least_squares(residual, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    if np.max(np.abs(sol.fun)) > 1e-7:
        raise SynthesisError(f"static target not reached (residual {np.max(np.abs(sol.fun)):.2e})")
    return build(sol.x)
