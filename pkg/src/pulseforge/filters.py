"""Filter functions and first-order infidelity from invariant trajectories.

The rotation ``Lambda(gamma, beta, zeta)`` maps a sensitivity vector into
the interaction frame without propagating the Schrodinger equation.  With
``v(t) = Lambda(t) chi(t)`` the filter function is the squared norm of the
Fourier transform of ``v`` and the infidelity is the bilinear form

    I = sum_ij w_i w_j g(t_i - t_j) v_i . v_j

with trapezoid weights ``w`` and the PSD kernel ``g``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import matmul_toeplitz

from .errors import CalibrationError, MagnusWarning
from .invariants import InvariantTrajectory, TimeGrid
from .noise import (ADDITIVE_DETUNING, MULTIPLICATIVE_AMPLITUDE,
                    MULTIPLICATIVE_DETUNING, BandOneOverF, DeltaPSD,
                    OneOverFWithTail, noise_variance)

MAGNUS_LIMIT = 0.1
ROBUST_THRESHOLD = 1e-8
_DENSE_MAX = 2048


def default_omegas(n=400, lo=1e-4, hi=1e1):
    """Log-spaced export grid in units of ``Omega_max``."""
    return np.logspace(np.log10(lo), np.log10(hi), n)


def lambda_matrix(gamma, beta, zeta):
    """Frame rotation built from the invariant angles.

    Accepts scalars or equal-shape arrays; returns ``(..., 3, 3)``.
    """
    g, b, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (gamma, beta, zeta)))
    cg, sg = np.cos(g), np.sin(g)
    cb, sb = np.cos(b), np.sin(b)
    cz, sz = np.cos(z), np.sin(z)
    out = np.empty(g.shape + (3, 3))
    out[..., 0, 0] = cb * sg
    out[..., 0, 1] = sb * sg
    out[..., 0, 2] = cg
    out[..., 1, 0] = -cb * cg * cz - sb * sz
    out[..., 1, 1] = -sb * cg * cz + cb * sz
    out[..., 1, 2] = sg * cz
    out[..., 2, 0] = -cb * cg * sz + sb * cz
    out[..., 2, 1] = -sb * cg * sz - cb * cz
    out[..., 2, 2] = sg * sz
    return out


def frame_vectors(traj: InvariantTrajectory, chi):
    """``v(t) = Lambda(t) chi(t)``, shape ``(N, 3)``."""
    lam = lambda_matrix(traj.gamma, traj.beta, traj.zeta)
    return np.einsum("nij,nj->ni", lam, np.asarray(chi, dtype=float))


def detuning_integrand(traj):
    """Closed-form ``Lambda chi`` for the additive detuning channel."""
    sg = np.sin(traj.gamma)
    return 0.5 * np.stack([np.cos(traj.gamma), sg * np.cos(traj.zeta),
                           sg * np.sin(traj.zeta)], axis=-1)


def amplitude_integrand(traj):
    """Closed-form integrand for multiplicative amplitude noise.

    Equal to ``-Lambda chi`` for that channel; the sign drops out of every
    filter function.
    """
    g, z = traj.gamma, traj.zeta
    sg, cg = np.sin(g), np.cos(g)
    zd, gd = traj.zeta_dot, traj.gamma_dot
    return 0.5 * np.stack([zd * sg * sg,
                           zd * sg * cg * np.cos(z) + gd * np.sin(z),
                           zd * sg * cg * np.sin(z) - gd * np.cos(z)], axis=-1)


def multiplicative_detuning_integrand(traj):
    delta = traj.beta_dot - traj.zeta_dot * np.cos(traj.gamma)
    return delta[:, None] * detuning_integrand(traj)


# ---------------------------------------------------------------------------
# filter functions

@dataclass(frozen=True, eq=False)
class FilterFunctionTrace:
    omegas: np.ndarray
    values: np.ndarray
    channel: str = ""
    method: str = "analytic"

    def at_zero(self):
        idx = np.flatnonzero(self.omegas == 0)
        if idx.size == 0:
            raise ValueError("trace has no omega = 0 sample")
        return float(self.values[idx[0]])


def fourier_sum(v, grid: TimeGrid, omegas, chunk=256):
    """``sum_i w_i v_i exp(i omega t_i)`` for every ``omega``; shape ``(M, 3)``."""
    v = np.asarray(v, dtype=float)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    wv = grid.weights[:, None] * v
    t = grid.times
    out = np.empty((omegas.size, v.shape[1]), dtype=complex)
    for s in range(0, omegas.size, chunk):
        phase = np.exp(1j * np.outer(omegas[s:s + chunk], t))
        out[s:s + chunk] = phase @ wv
    return out


def filter_from_vectors(v, grid, omegas):
    return np.sum(np.abs(fourier_sum(v, grid, omegas)) ** 2, axis=1)


def filter_function(traj: InvariantTrajectory, chi, omegas, channel="",
                    method="analytic") -> FilterFunctionTrace:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    values = filter_from_vectors(frame_vectors(traj, chi), traj.grid, omegas)
    return FilterFunctionTrace(omegas, values, channel, method)


def ff_detuning(traj, omegas):
    chi = ADDITIVE_DETUNING.from_trajectory(traj)
    return filter_function(traj, chi, omegas, "detuning")


def ff_amplitude(traj, omegas):
    chi = MULTIPLICATIVE_AMPLITUDE.from_trajectory(traj)
    return filter_function(traj, chi, omegas, "amplitude")


def ff_multiplicative_detuning(traj, omegas):
    chi = MULTIPLICATIVE_DETUNING.from_trajectory(traj)
    return filter_function(traj, chi, omegas, "multiplicative_detuning")


def static_filter_values(traj):
    """``(F_Delta(0), F_Omega(0))`` from the closed-form integrands."""
    w = traj.grid.weights
    fd = np.sum((w @ detuning_integrand(traj)) ** 2)
    fo = np.sum((w @ amplitude_integrand(traj)) ** 2)
    return float(fd), float(fo)


def robustness_flags(traj, threshold=ROBUST_THRESHOLD):
    fd, fo = static_filter_values(traj)
    scale = traj.grid.T ** 2
    return {"detuning": fd / scale <= threshold, "amplitude": fo / scale <= threshold,
            "F_detuning_0": fd, "F_amplitude_0": fo}


# ---------------------------------------------------------------------------
# infidelity

@lru_cache(maxsize=64)
def _kernel_column(psd, T, N):
    grid = TimeGrid(T, N)
    col = np.asarray(psd.kernel(grid.times - grid.times[0]), dtype=float)
    col.setflags(write=False)
    return col


@lru_cache(maxsize=16)
def kernel_matrix(psd, T, N):
    """``L_ij = g(t_i - t_j) w_i w_j`` for a grid; cached and read-only."""
    grid = TimeGrid(T, N)
    col = _kernel_column(psd, T, N)
    idx = np.arange(N)
    w = grid.weights
    mat = col[np.abs(idx[:, None] - idx[None, :])] * np.outer(w, w)
    mat.setflags(write=False)
    return mat


def bilinear_infidelity(v, grid: TimeGrid, psd):
    """``sum_k v_k^T L v_k`` for one channel."""
    v = np.asarray(v, dtype=float)
    w = grid.weights
    if isinstance(psd, DeltaPSD):
        s = w @ v
        return float(psd.weight / (2 * np.pi) * np.dot(s, s))
    if grid.N <= _DENSE_MAX:
        lv = kernel_matrix(psd, grid.T, grid.N) @ v
    else:
        col = _kernel_column(psd, grid.T, grid.N)
        lv = w[:, None] * matmul_toeplitz((col, col), w[:, None] * v)
    return float(np.sum(v * lv))


@dataclass(frozen=True)
class InfidelityReport:
    contributions: dict
    xi2: float
    converged: bool = field(init=False)
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", float(sum(self.contributions.values())))
        object.__setattr__(self, "converged", bool(self.xi2 < MAGNUS_LIMIT))

    def to_records(self):
        return [{"channel": k, "infidelity": v, "xi2": self.xi2, "converged": self.converged}
                for k, v in self.contributions.items()]


def _chi(channel, traj):
    return channel.chi_trajectory(traj)


def infidelity(traj: InvariantTrajectory, channels, grid: TimeGrid | None = None,
               warn: bool = True) -> InfidelityReport:
    """First-order infidelity per channel via the bilinear form.

    ``grid`` must be ``traj.grid`` if given; it is accepted for symmetry
    with the frequency-domain route.
    """
    if grid is not None and grid != traj.grid:
        raise ValueError("grid does not match the trajectory's grid")
    contrib = {}
    for ch in channels:
        v = frame_vectors(traj, _chi(ch, traj))
        contrib[ch.id] = bilinear_infidelity(v, traj.grid, ch.psd)
    xi2 = magnus_smallness(traj, channels)
    if warn and xi2 >= MAGNUS_LIMIT:
        warnings.warn(f"smallness parameter xi^2 = {xi2:.3g} >= {MAGNUS_LIMIT}; "
                      "first-order estimate may be inaccurate", MagnusWarning, stacklevel=2)
    return InfidelityReport(contrib, xi2)


def magnus_smallness(traj, channels):
    """``xi^2 = sum_i sum_q <delta_q^2> chi_{q,i}(0)^2 T^2``."""
    total = 0.0
    for ch in channels:
        chi0 = _chi(ch, traj)[0]
        total += noise_variance(ch.psd) * float(np.dot(chi0, chi0))
    return total * traj.grid.T ** 2


def calibrate_amplitude(reference_traj, channels, target_infidelity: float):
    """Factor that scales every PSD so the reference hits ``target_infidelity``.

    The first-order infidelity is linear in the PSD amplitude, so the
    factor is ``target / I(reference)`` for PSDs given at unit amplitude.
    """
    base = infidelity(reference_traj, channels, warn=False).total
    if not base > 0:
        raise CalibrationError("reference infidelity is zero; nothing to calibrate against")
    return target_infidelity / base


# ---------------------------------------------------------------------------
# frequency-domain route, independent of the kernel closed forms

def _gauss_panels(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (x + 1)).ravel(), (half * w).ravel()


def _band_integral(v, grid, amp, w0, wc, panels=40, order=16):
    # (1/2pi) * 2 * int_{w0}^{wc} (A/w) F dw, integrated in log(w)
    nodes, weights = _gauss_panels(np.linspace(np.log(w0), np.log(wc), panels + 1), order)
    f = filter_from_vectors(v, grid, np.exp(nodes))
    return amp / np.pi * float(weights @ f)


def _tail_integral(v, grid, amp, wc, order=8, fine_limit=40.0):
    # (1/pi) int_{wc}^{inf} A wc / w^2 F dw.  Panels of width ~1/T resolve
    # the oscillations of F up to ``fine_limit``; the remainder up to the
    # Nyquist frequency is small and gets log-spaced panels; above Nyquist
    # F of the sampled integrand is replaced by its period average
    # sum_i w_i^2 |v_i|^2.
    nyq = np.pi / grid.dt
    top = min(nyq, fine_limit)
    n = max(int(np.ceil((top - wc) * grid.T / 0.5)), 1)
    nodes, weights = _gauss_panels(np.linspace(wc, top, n + 1), order)
    if nyq > top:
        n2, w2 = _gauss_panels(np.geomspace(top, nyq, 201), order)
        nodes, weights = np.concatenate([nodes, n2]), np.concatenate([weights, w2])
    f = filter_from_vectors(v, grid, nodes)
    inner = float(weights @ (f / nodes ** 2))
    mean = float(np.sum(grid.weights[:, None] ** 2 * v ** 2))
    return amp * wc / np.pi * (inner + mean / nyq)


def frequency_infidelity(traj: InvariantTrajectory, channels):
    """Per-channel ``(1/2pi) int S F d omega`` by direct frequency quadrature."""
    out = {}
    for ch in channels:
        v = frame_vectors(traj, _chi(ch, traj))
        psd = ch.psd
        if isinstance(psd, DeltaPSD):
            s = traj.grid.weights @ v
            out[ch.id] = psd.weight / (2 * np.pi) * float(np.dot(s, s))
        elif isinstance(psd, BandOneOverF):
            out[ch.id] = _band_integral(v, traj.grid, psd.amplitude, psd.omega0, psd.omegac)
        elif isinstance(psd, OneOverFWithTail):
            out[ch.id] = (_band_integral(v, traj.grid, psd.amplitude, psd.omega0, psd.omegac)
                          + _tail_integral(v, traj.grid, psd.amplitude, psd.omegac))
        else:
            raise TypeError(f"no frequency quadrature for {type(psd).__name__}")
    return out


# ---------------------------------------------------------------------------
# space-curve picture

def curve_geometry(traj: InvariantTrajectory):
    """Closure defect ``int r' dt`` and binormal integral ``int r' x r'' dt``.

    ``r' = [cos g, -sin g cos z, -sin g sin z]`` has unit speed; ``r''`` is
    its exact time derivative from the stored angle rates.
    """
    g, z = traj.gamma, traj.zeta
    gd, zd = traj.gamma_dot, traj.zeta_dot
    cg, sg, cz, sz = np.cos(g), np.sin(g), np.cos(z), np.sin(z)
    r1 = np.stack([cg, -sg * cz, -sg * sz], axis=-1)
    r2 = np.stack([-sg * gd,
                   -cg * cz * gd + sg * sz * zd,
                   -cg * sz * gd - sg * cz * zd], axis=-1)
    w = traj.grid.weights
    return w @ r1, w @ np.cross(r1, r2)
