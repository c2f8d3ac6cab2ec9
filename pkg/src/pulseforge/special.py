"""Cosine and sine integrals.

``ci`` and ``si`` wrap :func:`scipy.special.sici`.  ``cin`` is the entire
function ``Cin(x) = int_0^x (1 - cos t) / t dt`` evaluated without the
cancellation that ``gamma + ln x - Ci(x)`` suffers for small ``x``.
"""
import numpy as np
from scipy.special import sici

EULER_GAMMA = 0.57721566490153286061

_CIN_SWITCH = 0.5


def si(x):
    return sici(x)[0]


def ci(x):
    return sici(x)[1]


def _cin_series(x):
    # sum_{k>=1} (-1)^(k+1) x^(2k) / (2k (2k)!)
    x2 = x * x
    term = x2 / 2.0
    total = term / 2.0
    for k in range(2, 12):
        term *= -x2 / ((2 * k) * (2 * k - 1))
        total = total + term / (2 * k)
    return total


def cin(x):
    x = np.abs(np.asarray(x, dtype=float))
    small = x < _CIN_SWITCH
    out = np.empty_like(x)
    out[small] = _cin_series(x[small])
    xl = x[~small]
    out[~small] = EULER_GAMMA + np.log(xl) - sici(xl)[1]
    return out if out.ndim else float(out)
