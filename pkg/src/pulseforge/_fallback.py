"""Pure-Python versions of the kernels in ``_core.pyx``.

Same signatures and stage-sample field convention as the compiled module.
Used when the extension is not built or ``PULSEFORGE_PURE=1`` is set.
"""
import math

import numpy as np


def _aux_rhs(g, b, hx, hy, hz):
    sb, cb, sg = math.sin(b), math.cos(b), math.sin(g)
    par = cb * hx + sb * hy
    return (-(sb * hx - cb * hy), hz - par * math.cos(g) / sg, -par / sg)


def rk4_invariants(hx, hy, hz, dt, gamma0, beta0, zeta0, sing_tol):
    hx = np.asarray(hx, dtype=float).tolist()
    hy = np.asarray(hy, dtype=float).tolist()
    hz = np.asarray(hz, dtype=float).tolist()
    n = len(hx) // 3 + 1
    gam = np.empty(n)
    bet = np.empty(n)
    zet = np.empty(n)
    g, b, z = gamma0, beta0, zeta0
    gam[0], bet[0], zet[0] = g, b, z
    h2 = 0.5 * dt
    for i in range(n - 1):
        j = 3 * i
        if abs(math.sin(g)) < sing_tol:
            if abs(math.cos(b) * hx[j] + math.sin(b) * hy[j]) > 1e-12:
                return gam, bet, zet, i
        k1 = _aux_rhs(g, b, hx[j], hy[j], hz[j])
        k2 = _aux_rhs(g + h2 * k1[0], b + h2 * k1[1], hx[j + 1], hy[j + 1], hz[j + 1])
        k3 = _aux_rhs(g + h2 * k2[0], b + h2 * k2[1], hx[j + 1], hy[j + 1], hz[j + 1])
        k4 = _aux_rhs(g + dt * k3[0], b + dt * k3[1], hx[j + 2], hy[j + 2], hz[j + 2])
        g += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        b += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        z += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        gam[i + 1], bet[i + 1], zet[i + 1] = g, b, z
    return gam, bet, zet, -1


_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def _generators(hx, hy, hz):
    # -i H for every stage sample, broadcast over leading axes
    hx, hy, hz = (np.asarray(a, dtype=float)[..., None, None] for a in (hx, hy, hz))
    return -0.5j * (hx * _SX + hy * _SY + hz * _SZ)


def _step(u, dt, k0, k1, k2):
    a = k0 @ u
    b = k1 @ (u + 0.5 * dt * a)
    c = k1 @ (u + 0.5 * dt * b)
    d = k2 @ (u + dt * c)
    return u + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)


def rk4_unitaries(hx, hy, hz, dt):
    gen = _generators(hx, hy, hz)
    n = gen.shape[0] // 3 + 1
    out = np.empty((n, 2, 2), dtype=complex)
    u = np.eye(2, dtype=complex)
    out[0] = u
    for i in range(n - 1):
        j = 3 * i
        u = _step(u, dt, gen[j], gen[j + 1], gen[j + 2])
        out[i + 1] = u
    return out


def rk4_final_batch(hx, hy, hz, dt):
    gen = _generators(hx, hy, hz)
    nb, m = gen.shape[:2]
    n = m // 3 + 1
    u = np.broadcast_to(np.eye(2, dtype=complex), (nb, 2, 2)).copy()
    for i in range(n - 1):
        j = 3 * i
        u = _step(u, dt, gen[:, j], gen[:, j + 1], gen[:, j + 2])
    return u
