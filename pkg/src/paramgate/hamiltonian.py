"""Driven two-transmon Hamiltonians.

Two builders live here: the Duffing-oscillator model driven by the actual
flux waveform (used by the integrator), and the sideband-resolved
rotating-wave Hamiltonian whose couplings are Bessel-weighted copies of the
static exchange coupling.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .bessel import bessel_jn
from .device import (
    DeviceParams,
    FluxPulse,
    _band_frequency_scalar,
    anharmonicity_at,
    band_frequency,
    modulated_frequency,
)

Transition = Literal["iswap", "cz02", "cz20"]
TRANSITIONS: tuple[str, ...] = ("iswap", "cz02", "cz20")

# (upper state on F side, state on T side) of each exchange; the coupling
# a_F^dag a_T maps the second onto the first
TRANSITION_STATES = {
    "iswap": ("10", "01"),
    "cz02": ("11", "02"),
    "cz20": ("20", "11"),
}


def ladder(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)


@dataclass(frozen=True)
class HilbertSpace:
    """Product space |F, T> with the tunable index varying fastest."""

    levels_F: int = 3
    levels_T: int = 3

    def __post_init__(self):
        if self.levels_F < 3 or self.levels_T < 3:
            raise ValueError("need at least 3 levels per transmon")

    @property
    def dim(self) -> int:
        return self.levels_F * self.levels_T

    def index(self, label: str) -> int:
        f, t = int(label[0]), int(label[1])
        if not (0 <= f < self.levels_F and 0 <= t < self.levels_T):
            raise ValueError(f"state {label!r} outside the truncated space")
        return f * self.levels_T + t

    def ket(self, label: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(label)] = 1.0
        return v

    @property
    def a_F(self) -> np.ndarray:
        return np.kron(ladder(self.levels_F), np.eye(self.levels_T))

    @property
    def a_T(self) -> np.ndarray:
        return np.kron(np.eye(self.levels_F), ladder(self.levels_T))

    @property
    def n_F(self) -> np.ndarray:
        return np.kron(np.diag(np.arange(self.levels_F, dtype=float)), np.eye(self.levels_T)).astype(complex)

    @property
    def n_T(self) -> np.ndarray:
        return np.kron(np.eye(self.levels_F), np.diag(np.arange(self.levels_T, dtype=float))).astype(complex)

    @property
    def computational_indices(self) -> list[int]:
        return [self.index(s) for s in ("00", "01", "10", "11")]

    @classmethod
    def for_device(cls, device: DeviceParams) -> "HilbertSpace":
        n = device.levels_per_transmon
        return cls(n, n)


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


def _check_hermitian(m: np.ndarray, what: str):
    scale = max(np.linalg.norm(m), 1.0)
    if np.linalg.norm(m - m.conj().T) > 1e-12 * scale:
        raise ValueError(f"{what} is not Hermitian")


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = static + sum_k f_k(t) M_k, in units of rad/s.

    ``frame`` gives the angular frequencies (F, T) of the frame the operator
    is written in: (0, 0) is the lab frame.  ``frame_kind`` is descriptive.
    ``periodic`` optionally declares a window (t_a, t_b, period) on which
    H(t + period) = H(t); the integrator uses it to reuse one-period
    propagators.
    """

    space: HilbertSpace
    static_part: np.ndarray
    drive_terms: tuple[tuple[np.ndarray, Callable[[float], float]], ...] = ()
    frame: tuple[float, float] = (0.0, 0.0)
    frame_kind: str = "lab"
    periodic: tuple[float, float, float] | None = None
    diagonal_drive: bool = field(default=False)

    def __post_init__(self):
        static = _frozen(self.static_part)
        if static.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"static part has shape {static.shape}, expected dim {self.space.dim}")
        _check_hermitian(static, "static part")
        terms = []
        for m, f in self.drive_terms:
            m = _frozen(m)
            if m.shape != static.shape:
                raise ValueError("drive term dimension mismatch")
            _check_hermitian(m, "drive term")
            terms.append((m, f))
        object.__setattr__(self, "static_part", static)
        object.__setattr__(self, "drive_terms", tuple(terms))
        diag = all(np.count_nonzero(m - np.diag(np.diag(m))) == 0 for m, _ in terms)
        object.__setattr__(self, "diagonal_drive", diag)

    def __call__(self, t: float) -> np.ndarray:
        h = self.static_part.copy()
        for m, f in self.drive_terms:
            c = f(t)
            if c != 0.0:
                h += c * m
        return h

    @property
    def is_static(self) -> bool:
        return not self.drive_terms


def build_duffing_hamiltonian(device: DeviceParams, space: HilbertSpace, pulse: FluxPulse,
                              frame: Literal["lab", "common"] = "common",
                              counter_rotating: bool = False,
                              anharmonicity_mode: Literal["constant", "interpolated"] = "constant",
                              ) -> TimeDependentHamiltonian:
    """Two coupled Duffing oscillators with the tunable frequency following the flux pulse.

    H/hbar = sum_q [omega_q(t) n_q - eta_q/2 n_q(n_q - 1)] + g (a_F^dag a_T + h.c.)

    In the ``common`` frame both transmons rotate at omega_F.  The exchange
    coupling is then static and H(t) is periodic over the flat top of the
    pulse, which the integrator exploits.
    """
    n = device.levels_per_transmon
    if (space.levels_F, space.levels_T) != (n, n):
        raise ValueError(
            f"space {space.levels_F}x{space.levels_T} does not match device levels {n}")
    band = device.tunable
    wF, etaF = device.fixed.omega_F, device.fixed.eta_F
    wT0 = band_frequency(band, pulse.park)
    etaT = anharmonicity_at(band, pulse.park)
    nF, nT, aF, aT = space.n_F, space.n_T, space.a_F, space.a_T
    ident = np.eye(space.dim)
    if frame == "lab":
        frame_w = (0.0, 0.0)
    elif frame == "common":
        frame_w = (wF, wF)
    else:
        raise ValueError(f"unknown frame {frame!r}")

    exchange = aF.conj().T @ aT
    static = ((wF - frame_w[0]) * nF - 0.5 * etaF * nF @ (nF - ident)
              + (wT0 - frame_w[1]) * nT - 0.5 * etaT * nT @ (nT - ident)
              + device.g * (exchange + exchange.conj().T))

    def delta_omega(t: float) -> float:
        # shaped edges vanish at the ends by themselves; a square pulse keeps
        # its one-sided value there so Runge-Kutta stages see no jump
        if t < 0.0 or t > pulse.duration or pulse.amp == 0.0:
            return 0.0
        return _band_frequency_scalar(band, pulse.flux(t)) - wT0

    terms = []
    if pulse.amp > 0 and pulse.duration > 0:
        terms.append((nT, delta_omega))
        if anharmonicity_mode == "interpolated":
            def delta_eta(t: float) -> float:
                if t < 0.0 or t > pulse.duration:
                    return 0.0
                return anharmonicity_at(band, pulse.flux(t), "interpolated") - etaT
            terms.append((-0.5 * nT @ (nT - ident), delta_eta))
    if counter_rotating:
        pair = aF @ aT
        w_sum = frame_w[0] + frame_w[1]
        if w_sum == 0.0:
            static = static + device.g * (pair + pair.conj().T)
        else:
            terms.append((device.g * (pair + pair.conj().T), lambda t: math.cos(w_sum * t)))
            terms.append((1j * device.g * (pair.conj().T - pair), lambda t: math.sin(w_sum * t)))

    periodic = None
    if frame == "common" and not counter_rotating and pulse.amp > 0:
        r = pulse.risetime
        periodic = (r, pulse.duration - r, pulse.period)
    return TimeDependentHamiltonian(space, static, tuple(terms), frame_w,
                                    "lab" if frame == "lab" else "common", periodic)


@dataclass(frozen=True)
class EffectiveCoupling:
    transition: str
    harmonic_n: int
    g_eff: float
    beta_n: float
    detuning_residual: float
    bessel_argument: float


def _transition_element(space: HilbertSpace, transition: str) -> float:
    upper, lower = TRANSITION_STATES[transition]
    op = space.a_F.conj().T @ space.a_T
    return float(op[space.index(upper), space.index(lower)].real)


def resonance_offset(device: DeviceParams, transition: str, park: float = 0.0) -> float:
    """Amount added to the detuning in the resonance condition of ``transition``."""
    if transition == "iswap":
        return 0.0
    if transition == "cz02":
        return -anharmonicity_at(device.tunable, park)
    if transition == "cz20":
        return device.fixed.eta_F
    raise ValueError(f"unknown transition {transition!r}")


def coupling_phase(x: float, theta_p: float, n: int) -> float:
    """Interaction phase beta_n = x sin(2 theta_p) + (2 theta_p + pi) n."""
    return x * math.sin(2.0 * theta_p) + (2.0 * theta_p + math.pi) * n


def effective_coupling(device: DeviceParams, pulse: FluxPulse, transition: str,
                       harmonic_n: int = 1) -> EffectiveCoupling:
    """Bessel-weighted sideband coupling of one exchange transition."""
    if transition not in TRANSITION_STATES:
        raise ValueError(f"unknown transition {transition!r}")
    mf = modulated_frequency(device.tunable, pulse)
    x = mf.omega_tilde / (2.0 * pulse.omega_p) if pulse.omega_p > 0 else 0.0
    space = HilbertSpace.for_device(device)
    g_eff = device.g * _transition_element(space, transition) * bessel_jn(harmonic_n, x)
    delta = mf.omega_bar - device.fixed.omega_F
    rhs = delta + resonance_offset(device, transition, pulse.park)
    return EffectiveCoupling(transition, harmonic_n, g_eff,
                             coupling_phase(x, pulse.theta_p, harmonic_n),
                             2 * harmonic_n * pulse.omega_p - rhs, x)


def _phase_fns(rate: float, beta: float) -> tuple[Callable, Callable]:
    return (lambda t: math.cos(rate * t + beta)), (lambda t: math.sin(rate * t + beta))


def rwa_effective_hamiltonian(device: DeviceParams, pulse: FluxPulse, space: HilbertSpace,
                              n_max: int = 3,
                              transitions: Sequence[str] = TRANSITIONS) -> TimeDependentHamiltonian:
    """Sideband-resolved interaction Hamiltonian, truncated to |n| <= n_max.

    Each family couples its two states with strength g m J_n(x) and phase
    (2 n omega_p - D) t + beta_n, where D is the family's detuning.  The
    pulse envelope is ignored (square pulse).
    """
    band = device.tunable
    wmin = min(device.fixed.omega_F, band.omega_min)
    if 2 * pulse.omega_p > 0.25 * wmin or device.g > 0.05 * wmin:
        warnings.warn("rotating-wave validity condition violated", stacklevel=2)
    mf = modulated_frequency(band, pulse)
    x = mf.omega_tilde / (2.0 * pulse.omega_p) if pulse.omega_p > 0 else 0.0
    delta = mf.omega_bar - device.fixed.omega_F
    terms = []
    for tr in transitions:
        upper, lower = TRANSITION_STATES[tr]
        a, b = space.index(upper), space.index(lower)
        m = _transition_element(space, tr)
        D = delta + resonance_offset(device, tr, pulse.park)
        X = np.zeros((space.dim, space.dim), dtype=complex)
        Y = np.zeros_like(X)
        X[a, b] = X[b, a] = 1.0
        Y[a, b], Y[b, a] = 1j, -1j
        for n in range(-n_max, n_max + 1):
            c = device.g * m * bessel_jn(n, x)
            if abs(c) < 1e-15 * device.g:
                continue
            fc, fs = _phase_fns(2 * n * pulse.omega_p - D, coupling_phase(x, pulse.theta_p, n))
            terms.append((c * X, fc))
            terms.append((c * Y, fs))
    return TimeDependentHamiltonian(space, np.zeros((space.dim, space.dim)), tuple(terms),
                                    frame=(device.fixed.omega_F, mf.omega_bar),
                                    frame_kind="interaction")


def export_matrix(m: np.ndarray, path) -> None:
    """Write a complex matrix as row-major little-endian float64 (re, im) pairs."""
    np.ascontiguousarray(m, dtype="<c16").tofile(path)


def import_matrix(path, dim: int) -> np.ndarray:
    return np.fromfile(path, dtype="<c16").reshape(dim, dim)
