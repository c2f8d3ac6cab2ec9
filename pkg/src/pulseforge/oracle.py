"""Independent reference computations.

Everything here propagates the Schrodinger equation directly and never
uses the invariant angles, so it can validate the analytic routes.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InstabilityError, SynthesisError
from .filters import FilterFunctionTrace, filter_from_vectors
from .invariants import PAULIS, ControlPulse
from .noise import BandOneOverF, DeltaPSD, OneOverFWithTail

UNITARITY_LIMIT = 1e-6
SYNTH_COMPONENTS = 200


def resolve_threads(threads=None):
    """Worker count: explicit value, else ``PULSEFORGE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("PULSEFORGE_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(int(threads), 1)


@dataclass(frozen=True, eq=False)
class PropagationResult:
    unitaries: np.ndarray
    adjoint: np.ndarray

    @property
    def final(self):
        return self.unitaries[-1]


def adjoint_matrices(unitaries):
    """``R_ik = tr(U^dag s_i U s_k) / 2`` for a stack of unitaries."""
    u = np.asarray(unitaries)
    ud = np.conj(np.swapaxes(u, -1, -2))
    rot = [ud @ s @ u for s in PAULIS]
    out = np.empty(u.shape[:-2] + (3, 3))
    for i in range(3):
        for k in range(3):
            out[..., i, k] = 0.5 * np.einsum("...ab,ba->...", rot[i], PAULIS[k]).real
    return out


def tdse_propagate(pulse: ControlPulse, refined: ControlPulse | None = None) -> PropagationResult:
    """RK4 propagation of ``i U' = H U`` from ``U(0) = 1`` on the pulse grid.

    ``refined`` optionally samples the same drive on ``grid.refined(2)``;
    its odd samples then supply exact midpoint fields instead of the
    pulse's interpolation rule.
    """
    if refined is None:
        st = [kernels.stages(a, pulse.hold) for a in pulse.fields()]
    else:
        if refined.grid != pulse.grid.refined(2):
            raise ValueError("refined pulse must live on pulse.grid.refined(2)")
        st = [kernels.stages_refined(a) for a in refined.fields()]
    us = kernels.rk4_unitaries(*st, pulse.grid.dt)
    defect = np.max(np.abs(np.einsum("nba,nbc->nac", us.conj(), us) - np.eye(2)))
    if defect > UNITARITY_LIMIT:
        raise InstabilityError(f"unitarity defect {defect:.2e} exceeds {UNITARITY_LIMIT:g}; "
                               "refine the grid")
    return PropagationResult(us, adjoint_matrices(us))


def ff_direct(pulse: ControlPulse, chi, omegas, prop: PropagationResult | None = None,
              channel="") -> FilterFunctionTrace:
    """Filter function from the adjoint representation of the propagator.

    ``chi`` is either an ``(N, 3)`` array or a :class:`NoiseChannel`, in
    which case it is sampled from the pulse's quadrature nodes.
    """
    if prop is None:
        prop = tdse_propagate(pulse)
    if hasattr(chi, "chi_pulse"):
        channel = channel or chi.id
        chi = chi.chi_pulse(pulse.at_nodes())
    v = np.einsum("ni,nik->nk", np.asarray(chi, dtype=float), prop.adjoint)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    return FilterFunctionTrace(omegas, filter_from_vectors(v, pulse.grid, omegas),
                               channel, "oracle")


# ---------------------------------------------------------------------------
# Monte Carlo

def _cosine_components(psd, lo, hi, n):
    # log-spaced midpoints; amplitude sqrt(4 S dw / 2pi) gives the two-sided variance
    edges = np.geomspace(lo, hi, n + 1)
    w = np.sqrt(edges[1:] * edges[:-1])
    dw = np.diff(edges)
    amp = np.sqrt(4.0 * psd.density(w) * dw / (2 * np.pi))
    return w, amp


def _synthesis_plan(psd, dt):
    if isinstance(psd, DeltaPSD):
        return None
    if isinstance(psd, BandOneOverF):
        return [_cosine_components(psd, psd.omega0, psd.omegac, SYNTH_COMPONENTS)]
    if isinstance(psd, OneOverFWithTail):
        top = np.pi / dt
        if top <= psd.omegac:
            raise SynthesisError("grid too coarse to sample the 1/f^2 tail")
        return [_cosine_components(psd, psd.omega0, psd.omegac, SYNTH_COMPONENTS),
                _cosine_components(psd, psd.omegac * (1 + 1e-12), top, SYNTH_COMPONENTS)]
    raise SynthesisError(f"cannot synthesize noise traces for {type(psd).__name__}")


def synthesize_trace(psd, times, rng, plan=None):
    """One realization of the noise process at ``times``."""
    if isinstance(psd, DeltaPSD):
        return np.full(times.shape, rng.normal(0.0, np.sqrt(psd.weight / (2 * np.pi))))
    if plan is None:
        plan = _synthesis_plan(psd, times[1] - times[0])
    out = np.zeros_like(times)
    for w, amp in plan:
        phases = rng.uniform(0.0, 2 * np.pi, w.size)
        out += np.cos(np.outer(times, w) + phases) @ amp
    return out


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    n_traces: int
    magnus_violation_fraction: float

    def within(self, value, n_sigma=3.0):
        return abs(self.mean - value) <= n_sigma * self.stderr


def monte_carlo_infidelity(pulse: ControlPulse, channels, n_traces: int, seed: int,
                           threads=None, batch: int = 64) -> MonteCarloResult:
    """Average ``1 - |tr(U_c^dag U)/2|^2`` over sampled noise realizations.

    Trace ``k`` of channel ``q`` draws from ``default_rng([seed, k, q])`` so the
    result does not depend on batching or thread count.  The per-trace
    convergence condition ``int |xi(t)| dt < pi`` is checked and the
    fraction of violating traces reported.
    """
    grid = pulse.grid
    dt = grid.dt
    # noise is sampled exactly at every RK4 stage time
    times = (grid.times[:-1, None] + np.array([0.0, 0.5, 1.0]) * dt).ravel()
    base = [kernels.stages(a, pulse.hold) for a in pulse.fields()]
    chis = [np.stack([kernels.stages(c, pulse.hold) for c in ch.chi_pulse(pulse).T])
            for ch in channels]
    plans = [_synthesis_plan(ch.psd, 0.5 * dt) for ch in channels]
    target = tdse_propagate(pulse).final
    quad_w = np.tile(np.array([1.0, 4.0, 1.0]) * dt / 6.0, grid.N - 1)

    def run(start):
        stop = min(start + batch, n_traces)
        m = stop - start
        fields = np.repeat(np.stack(base)[:, None, :], m, axis=1)
        xi = np.zeros((3, m, times.size))
        for q, (ch, chi, plan) in enumerate(zip(channels, chis, plans)):
            for j, k in enumerate(range(start, stop)):
                rng = np.random.default_rng([seed, k, q])
                d = synthesize_trace(ch.psd, times, rng, plan)
                xi[:, j] += d * chi
        fields += 2.0 * xi
        finals = kernels.rk4_final_batch(*fields, dt)
        overlap = np.einsum("ba,mba->m", target.conj(), finals) / 2
        inf = 1.0 - np.abs(overlap) ** 2
        bound = (np.linalg.norm(xi, axis=0) @ quad_w) >= np.pi
        return inf, bound

    if n_traces <= 0:
        return MonteCarloResult(0.0, 0.0, 0, 0.0)
    starts = range(0, n_traces, batch)
    workers = resolve_threads(threads)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    inf = np.concatenate([p[0] for p in parts])
    viol = np.concatenate([p[1] for p in parts])
    stderr = float(inf.std(ddof=1) / np.sqrt(inf.size)) if inf.size > 1 else 0.0
    return MonteCarloResult(float(inf.mean()), stderr, int(inf.size), float(viol.mean()))
