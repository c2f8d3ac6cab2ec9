# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernels.

Every kernel takes control fields as RK4 stage samples: entries
``3*i``, ``3*i + 1`` and ``3*i + 2`` are the field at the start, middle
and end of step ``i``.  Callers build the stage arrays (see
:func:`pulseforge.kernels.stages`), so the kernels never decide how to
interpolate.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs

cnp.import_array()


cdef inline void _aux_rhs(double g, double b, double hx, double hy,
                          double hz, double *out) nogil:
    cdef double sb = sin(b), cb = cos(b), sg = sin(g)
    cdef double par = cb * hx + sb * hy
    out[0] = -(sb * hx - cb * hy)
    out[1] = hz - par * cos(g) / sg
    out[2] = -par / sg


def rk4_invariants(double[::1] hx, double[::1] hy, double[::1] hz,
                   double dt, double gamma0, double beta0, double zeta0,
                   double sing_tol):
    """Integrate the (gamma, beta, zeta) auxiliary equations.

    Returns ``(gamma, beta, zeta, bad)`` where ``bad`` is the first grid
    index at which ``|sin gamma| < sing_tol`` while the transverse drive
    was nonzero, or -1.
    """
    cdef Py_ssize_t m = hx.shape[0]
    cdef Py_ssize_t n = m // 3 + 1
    cdef Py_ssize_t i, j
    cdef double g, b, z
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double h2 = 0.5 * dt
    gam = np.empty(n)
    bet = np.empty(n)
    zet = np.empty(n)
    cdef double[::1] G = gam, B = bet, Z = zet
    cdef Py_ssize_t bad = -1
    g = gamma0
    b = beta0
    z = zeta0
    G[0] = g
    B[0] = b
    Z[0] = z
    with nogil:
        for i in range(n - 1):
            j = 3 * i
            if fabs(sin(g)) < sing_tol:
                if fabs(cos(b) * hx[j] + sin(b) * hy[j]) > 1e-12:
                    bad = i
                    break
            _aux_rhs(g, b, hx[j], hy[j], hz[j], k1)
            _aux_rhs(g + h2 * k1[0], b + h2 * k1[1],
                     hx[j + 1], hy[j + 1], hz[j + 1], k2)
            _aux_rhs(g + h2 * k2[0], b + h2 * k2[1],
                     hx[j + 1], hy[j + 1], hz[j + 1], k3)
            _aux_rhs(g + dt * k3[0], b + dt * k3[1],
                     hx[j + 2], hy[j + 2], hz[j + 2], k4)
            g = g + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            b = b + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            z = z + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            G[i + 1] = g
            B[i + 1] = b
            Z[i + 1] = z
    return gam, bet, zet, bad


cdef inline void _mul_h(double hx, double hy, double hz,
                        double complex *u, double complex *out) nogil:
    # out = -i/2 (hx sx + hy sy + hz sz) u, u row-major 2x2
    cdef double complex a = 0.5 * hz
    cdef double complex c = 0.5 * (hx + 1j * hy)
    cdef double complex cc = 0.5 * (hx - 1j * hy)
    cdef int k
    for k in range(2):
        out[k] = -1j * (a * u[k] + cc * u[2 + k])
        out[2 + k] = -1j * (c * u[k] - a * u[2 + k])


cdef inline void _rk4_step(double complex *u, double dt,
                           double x0, double y0, double z0,
                           double x1, double y1, double z1,
                           double x2, double y2, double z2) nogil:
    cdef double complex k1[4]
    cdef double complex k2[4]
    cdef double complex k3[4]
    cdef double complex k4[4]
    cdef double complex tmp[4]
    cdef int k
    _mul_h(x0, y0, z0, u, k1)
    for k in range(4):
        tmp[k] = u[k] + 0.5 * dt * k1[k]
    _mul_h(x1, y1, z1, tmp, k2)
    for k in range(4):
        tmp[k] = u[k] + 0.5 * dt * k2[k]
    _mul_h(x1, y1, z1, tmp, k3)
    for k in range(4):
        tmp[k] = u[k] + dt * k3[k]
    _mul_h(x2, y2, z2, tmp, k4)
    for k in range(4):
        u[k] = u[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])


def rk4_unitaries(double[::1] hx, double[::1] hy, double[::1] hz, double dt):
    """Propagate ``U(0) = 1`` and return all grid unitaries, shape (N, 2, 2)."""
    cdef Py_ssize_t m = hx.shape[0]
    cdef Py_ssize_t n = m // 3 + 1
    cdef Py_ssize_t i, j
    cdef int k
    out = np.empty((n, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] O = out
    cdef double complex u[4]
    u[0] = 1.0
    u[1] = 0.0
    u[2] = 0.0
    u[3] = 1.0
    with nogil:
        for k in range(4):
            O[0, k // 2, k % 2] = u[k]
        for i in range(n - 1):
            j = 3 * i
            _rk4_step(u, dt, hx[j], hy[j], hz[j], hx[j + 1], hy[j + 1],
                      hz[j + 1], hx[j + 2], hy[j + 2], hz[j + 2])
            for k in range(4):
                O[i + 1, k // 2, k % 2] = u[k]
    return out


def rk4_final_batch(double[:, ::1] hx, double[:, ::1] hy, double[:, ::1] hz,
                    double dt):
    """Final unitaries for a batch of field sets, shape (M, 2, 2)."""
    cdef Py_ssize_t nb = hx.shape[0]
    cdef Py_ssize_t m = hx.shape[1]
    cdef Py_ssize_t n = m // 3 + 1
    cdef Py_ssize_t r, i, j
    cdef int k
    out = np.empty((nb, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] O = out
    cdef double complex u[4]
    with nogil:
        for r in range(nb):
            u[0] = 1.0
            u[1] = 0.0
            u[2] = 0.0
            u[3] = 1.0
            for i in range(n - 1):
                j = 3 * i
                _rk4_step(u, dt, hx[r, j], hy[r, j], hz[r, j],
                          hx[r, j + 1], hy[r, j + 1], hz[r, j + 1],
                          hx[r, j + 2], hy[r, j + 2], hz[r, j + 2])
            for k in range(4):
                O[r, k // 2, k % 2] = u[k]
    return out
