"""Adaptive Dormand-Prince 5(4) integrator for complex array-valued ODEs.

The state may be any complex array (a ket, a stack of kets, a density
matrix, a stack of operators).  Continuous output uses the standard
fourth-order interpolant of the pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
# 5th-order minus embedded 4th-order weights, last entry for the FSAL stage
E = [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_A = np.zeros((6, 6))
for _i, _row in enumerate(A):
    _A[_i, :len(_row)] = _row
_B = np.array(B[:6])
_E = np.array(E)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegrationError(RuntimeError):
    """Step size underflow or a violated conservation law."""


@dataclass
class _Step:
    t: float
    h: float
    y: np.ndarray
    k: list

    def __call__(self, t: float) -> np.ndarray:
        s = (t - self.t) / self.h
        powers = (s, s * s, s ** 3, s ** 4)
        out = self.y.copy()
        for i in range(7):
            coef = sum(P[i, j] * powers[j] for j in range(4))
            if coef != 0.0:
                out += (self.h * coef) * self.k[i]
        return out


@dataclass
class Solution:
    t: float
    y: np.ndarray
    n_steps: int
    n_rejected: int
    samples: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def dense(self, t: float) -> np.ndarray:
        """Interpolated state at ``t`` (needs ``dense=True`` when integrating)."""
        if not self.steps:
            raise ValueError("integrate with dense=True to get continuous output")
        lo, hi = 0, len(self.steps) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.steps[mid].t <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.steps[lo](t)


def _rms_norm(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(x.real ** 2 + x.imag ** 2)))


def _initial_step(f, t0, y0, f0, direction_span, rtol, atol) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = _rms_norm(y0 / scale)
    d1 = _rms_norm(f0 / scale)
    h0 = 1e-6 * direction_span if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    d2 = _rms_norm((f(t0 + h0, y1) - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6 * direction_span, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, direction_span)


def dopri5(f: Callable[[float, np.ndarray], np.ndarray], t0: float, t1: float,
           y0: np.ndarray, rtol: float = 1e-8, atol: float | None = None,
           t_eval: Sequence[float] | None = None, dense: bool = False,
           max_steps: int = 2_000_000, first_step: float | None = None,
           max_step: float | None = None) -> Solution:
    """Integrate y' = f(t, y) from ``t0`` to ``t1`` (``t1 > t0``).

    ``atol`` defaults to ``rtol``.  Values requested in ``t_eval`` (sorted,
    inside the interval) are returned in ``Solution.samples``.
    """
    if atol is None:
        atol = rtol
    y = np.array(y0, dtype=complex)
    span = t1 - t0
    if span < 0:
        raise ValueError("only forward integration is supported")
    sol = Solution(t0, y, 0, 0)
    if span == 0:
        if t_eval is not None:
            sol.samples = [y.copy() for _ in t_eval]
        return sol
    evals = list(t_eval) if t_eval is not None else []
    ei = 0
    while ei < len(evals) and evals[ei] <= t0:
        sol.samples.append(y.copy())
        ei += 1

    shape = y.shape
    n = y.size

    def rhs(t, flat):
        return f(t, flat.reshape(shape)).reshape(-1)

    t = t0
    yf = y.reshape(-1).copy()
    K = np.empty((7, n), dtype=complex)
    K[0] = rhs(t, yf)
    h = first_step if first_step is not None else _initial_step(f, t, y, K[0].reshape(shape), span,
                                                                rtol, atol)
    if max_step is not None:
        h = min(h, max_step)
    h_min = 1e-14 * max(abs(t0), abs(t1), span)
    steps = rejected = 0
    while t < t1:
        if steps >= max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={t:g}")
        last = t + h >= t1 - 1e-15 * span
        if last:
            h = t1 - t
        elif h < h_min:
            raise IntegrationError(f"step size underflow at t={t:g} (stiff segment?)")
        for i in range(1, 6):
            K[i] = rhs(t + C[i] * h, yf + (h * _A[i, :i]) @ K[:i])
        y_new = yf + (h * _B) @ K[:6]
        K[6] = rhs(t + h, y_new)
        err = (h * _E) @ K
        scale = atol + rtol * np.maximum(np.abs(yf), np.abs(y_new))
        q = err / scale
        err_norm = math.sqrt(np.vdot(q, q).real / n)
        if err_norm <= 1.0:
            t_new = t1 if last else t + h
            if (ei < len(evals) and evals[ei] <= t_new) or dense:
                step = _Step(t, h, yf.reshape(shape), [k.reshape(shape).copy() for k in K])
                while ei < len(evals) and evals[ei] <= t_new:
                    sol.samples.append(step(evals[ei]))
                    ei += 1
                if dense:
                    sol.steps.append(step)
            t, yf = t_new, y_new
            K[0] = K[6]
            steps += 1
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
            h *= factor
        else:
            rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
        if max_step is not None:
            h = min(h, max_step)
    y = yf.reshape(shape)
    while ei < len(evals):
        sol.samples.append(y.copy())
        ei += 1
    sol.t, sol.y, sol.n_steps, sol.n_rejected = t, y, steps, rejected
    return sol
