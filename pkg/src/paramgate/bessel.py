"""Integer-order Bessel functions of the first kind.

Miller's downward recurrence normalised with J_0 + 2 sum J_2k = 1, which is
stable for every order, with the ascending series below |x| = 0.5 where the
recurrence would overflow.
"""
from __future__ import annotations

import math

import numpy as np


def _start_order(n_max: int, x: float) -> int:
    m = max(n_max, int(x)) + 20 + int(math.sqrt(40.0 * max(n_max, x, 1.0)))
    return m + (m % 2)


def _series(n_max: int, x: float) -> np.ndarray:
    # ascending series; converges in a handful of terms for |x| < 0.5
    half = 0.5 * x
    out = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        term = half ** n / math.factorial(n)
        total, k = term, 0
        while abs(term) > 1e-17 * abs(total) and term != 0.0:
            k += 1
            term *= -half * half / (k * (n + k))
            total += term
        out[n] = total
    return out


def bessel_j_all(n_max: int, x: float) -> np.ndarray:
    """Return ``[J_0(x), ..., J_{n_max}(x)]`` for real ``x``."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    x = float(x)
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    if abs(x) < 0.5:
        return _series(n_max, x)
    sign = -1.0 if x < 0 else 1.0
    ax = abs(x)
    top = _start_order(n_max, ax)
    vals = np.zeros(top + 2)
    j_next, j_cur = 0.0, 1e-300
    vals[top] = j_cur
    for k in range(top, 0, -1):
        j_prev = (2.0 * k / ax) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        vals[k - 1] = j_cur
        if abs(j_cur) > 1e250:
            vals[k - 1:] *= 1e-250
            j_next *= 1e-250
            j_cur *= 1e-250
    norm = vals[0] + 2.0 * vals[2:top + 1:2].sum()
    out[:] = vals[:n_max + 1] / norm
    if sign < 0:
        out[1::2] *= -1.0
    return out


def bessel_jn(n: int, x: float) -> float:
    """J_n(x) for any integer ``n`` (negative orders via J_{-n} = (-1)^n J_n)."""
    m = abs(int(n))
    val = bessel_j_all(m, x)[m]
    if n < 0 and m % 2:
        val = -val
    return float(val)


def j1_maximum(tol: float = 1e-12) -> tuple[float, float]:
    """Location and value of the first maximum of J_1.

    Golden-section search on (0, 3.8), which brackets the first peak.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.5, 3.5
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = bessel_jn(1, c), bessel_jn(1, d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = bessel_jn(1, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = bessel_jn(1, d)
    x = 0.5 * (a + b)
    return x, bessel_jn(1, x)
