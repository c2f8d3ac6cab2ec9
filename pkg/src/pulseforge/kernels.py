"""Backend selection for the RK4 kernels.

The compiled extension ``pulseforge._core`` is used when it imports;
otherwise, or when the environment variable ``PULSEFORGE_PURE`` is set to
a non-empty value other than ``0``, the pure-Python module is used.
``BACKEND`` names the active choice.
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("PULSEFORGE_PURE", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

IMPLEMENTATIONS = {"python": _fallback}
if BACKEND == "compiled":
    IMPLEMENTATIONS["compiled"] = _impl


def stages(samples, hold=False):
    """RK4 stage samples along the last axis.

    ``(..., N)`` becomes ``(..., 3 (N - 1))`` holding, per step, the field
    at its start, middle and end.  By default the field is interpolated
    linearly between grid samples; with ``hold=True`` sample ``i`` is held
    constant over step ``i`` (zero-order hold).
    """
    a = np.asarray(samples, dtype=float)
    left, right = a[..., :-1], a[..., 1:]
    if hold:
        st = np.stack([left, left, left], axis=-1)
    else:
        st = np.stack([left, 0.5 * (left + right), right], axis=-1)
    return st.reshape(a.shape[:-1] + (3 * (a.shape[-1] - 1),))


def stages_refined(fine):
    """Stage samples from values on the twice-refined grid.

    ``(..., 2N - 1)`` samples give exact midpoint fields for ``N - 1``
    steps, so no interpolation error enters the RK4 step.
    """
    a = np.asarray(fine, dtype=float)
    if a.shape[-1] % 2 != 1:
        raise ValueError("refined samples need an odd count 2N - 1")
    st = np.stack([a[..., :-2:2], a[..., 1::2], a[..., 2::2]], axis=-1)
    return st.reshape(a.shape[:-1] + (-1,))


def rk4_invariants(hx, hy, hz, dt, gamma0, beta0, zeta0, sing_tol=1e-9, impl=None):
    mod = impl or _impl
    return mod.rk4_invariants(
        np.ascontiguousarray(hx, dtype=float),
        np.ascontiguousarray(hy, dtype=float),
        np.ascontiguousarray(hz, dtype=float),
        float(dt), float(gamma0), float(beta0), float(zeta0), float(sing_tol),
    )


def rk4_unitaries(hx, hy, hz, dt, impl=None):
    mod = impl or _impl
    return mod.rk4_unitaries(
        np.ascontiguousarray(hx, dtype=float),
        np.ascontiguousarray(hy, dtype=float),
        np.ascontiguousarray(hz, dtype=float),
        float(dt),
    )


def rk4_final_batch(hx, hy, hz, dt, impl=None):
    mod = impl or _impl
    return mod.rk4_final_batch(
        np.ascontiguousarray(np.atleast_2d(hx), dtype=float),
        np.ascontiguousarray(np.atleast_2d(hy), dtype=float),
        np.ascontiguousarray(np.atleast_2d(hz), dtype=float),
        float(dt),
    )
