"""Gate reports: everything the command line prints about one gate."""
from __future__ import annotations

import warnings

import numpy as np

from .filters import filter_function, infidelity, robustness_flags
from .geometric import phase_decompose
from .invariants import InvariantTrajectory, forward_solve, gate_from_invariants, zxz_decompose

DEFAULT_GAUGE = (0.5 * np.pi + 0.3, 0.2)


def trajectory_for(pulse, gamma0=None, beta0=None) -> InvariantTrajectory:
    g0, b0 = DEFAULT_GAUGE
    return forward_solve(pulse, g0 if gamma0 is None else gamma0, b0 if beta0 is None else beta0)


def gate_report(traj: InvariantTrajectory, channels=(), omegas=None) -> dict:
    """JSON-ready report on the gate a trajectory realizes.

    Per-channel filter-function traces are included when ``omegas`` is
    given.  Phases refer to the ``+`` eigenvector of the invariant.
    """
    gate = gate_from_invariants(traj)
    dec = zxz_decompose(gate)
    u = gate.u
    flags = robustness_flags(traj)
    out = {
        "duration": traj.grid.T,
        "n_points": traj.grid.N,
        "unitary": {"real": u.real.tolist(), "imag": u.imag.tolist()},
        "zxz": {"theta": dec.theta, "psi1": dec.psi1, "psi2": dec.psi2},
        "robust": {"detuning": bool(flags["detuning"]), "amplitude": bool(flags["amplitude"])},
        "static_filter": {"detuning": flags["F_detuning_0"],
                          "amplitude": flags["F_amplitude_0"]},
        "phases": phase_decompose(traj).to_dict(),
    }
    if channels:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = infidelity(traj, channels)
        out["infidelity"] = {"total": rep.total, **rep.contributions}
        out["xi2"] = rep.xi2
        out["converged"] = rep.converged
        if omegas is not None:
            out["filter_functions"] = {
                ch.id: filter_function(traj, ch.chi_trajectory(traj), omegas, ch.id).values.tolist()
                for ch in channels}
            out["omegas"] = np.asarray(omegas).tolist()
    return out
