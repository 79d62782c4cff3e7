"""Two-transmon device description and the flux-tunable frequency band.

All frequencies are angular (rad/s) internally; configuration files and the
CLI speak MHz meaning omega/2pi.  Flux is always in units of the flux quantum.
"""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np

TWO_PI = 2.0 * math.pi


def mhz(f_mhz: float) -> float:
    """Convert a frequency in MHz (omega/2pi) to rad/s."""
    return TWO_PI * 1e6 * f_mhz


def to_mhz(omega: float) -> float:
    """Convert rad/s to MHz (omega/2pi)."""
    return omega / (TWO_PI * 1e6)


@dataclass(frozen=True)
class FixedTransmon:
    omega_F: float
    eta_F: float
    T1: float
    T2_star: float

    def __post_init__(self):
        if self.omega_F <= 0 or self.eta_F <= 0:
            raise ValueError("fixed transmon frequency and anharmonicity must be positive")
        if self.T1 <= 0 or self.T2_star <= 0 or self.T2_star > 2 * self.T1:
            raise ValueError(f"need 0 < T2* <= 2 T1, got T1={self.T1}, T2*={self.T2_star}")


@dataclass(frozen=True)
class TunableBand:
    """Asymmetric-SQUID transmon band between ``omega_min`` and ``omega_max``.

    ``asymmetry_d`` is derived from the two extrema when not given.
    """

    omega_max: float
    omega_min: float
    eta_max: float
    eta_min: float
    T1: float
    T2_star_parked: float
    T2_star_driven: float
    asymmetry_d: float | None = None

    def __post_init__(self):
        if not self.omega_max > self.omega_min > 0:
            raise ValueError("need omega_max > omega_min > 0")
        for t2 in (self.T2_star_parked, self.T2_star_driven):
            if self.T1 <= 0 or t2 <= 0 or t2 > 2 * self.T1:
                raise ValueError("need 0 < T2* <= 2 T1 for the tunable transmon")
        if self.asymmetry_d is None:
            object.__setattr__(self, "asymmetry_d", solve_asymmetry(
                self.omega_max, self.omega_min, self.eta_max))
        if not 0 <= self.asymmetry_d < 1:
            raise ValueError(f"asymmetry must lie in [0, 1), got {self.asymmetry_d}")


def solve_asymmetry(omega_max: float, omega_min: float, eta: float) -> float:
    """Junction asymmetry d that puts the band minimum at ``omega_min``.

    At half a flux quantum the band reduces to ``(omega_max + eta) sqrt(d) - eta``,
    which inverts in closed form.
    """
    return ((omega_min + eta) / (omega_max + eta)) ** 2


@dataclass(frozen=True)
class DeviceParams:
    fixed: FixedTransmon
    tunable: TunableBand
    g: float
    levels_per_transmon: int = 3

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("coupling g must be positive")
        if self.levels_per_transmon < 3:
            raise ValueError("need at least 3 levels per transmon to resolve |02> and |20>")
        if self.g > 0.05 * self.tunable.omega_min:
            warnings.warn("coupling g is not small compared with the qubit frequencies",
                          stacklevel=2)


@dataclass(frozen=True)
class FluxPulse:
    """Flux waveform park + env(t) * amp * cos(omega_p t + theta_p), 0 <= t <= duration."""

    park: float
    amp: float
    omega_p: float
    theta_p: float = 0.0
    duration: float = 0.0
    risetime: float = 0.0
    envelope: Literal["flat_top_cosine_edges"] = "flat_top_cosine_edges"

    def __post_init__(self):
        if self.amp < 0:
            raise ValueError("modulation amplitude must be non-negative")
        if self.duration < 0 or self.risetime < 0:
            raise ValueError("duration and risetime must be non-negative")
        if 2 * self.risetime > self.duration * (1 + 1e-12):
            raise ValueError(
                f"risetime {self.risetime:g} too long for duration {self.duration:g}")
        if self.envelope != "flat_top_cosine_edges":
            raise ValueError(f"unknown envelope {self.envelope!r}")

    def replace(self, **changes) -> "FluxPulse":
        return dataclasses.replace(self, **changes)

    @property
    def period(self) -> float:
        return TWO_PI / self.omega_p

    def envelope_at(self, t: float) -> float:
        # scalar fast path for the integrator; no range check.  Without edges
        # the drive is on over the closed interval, so Runge-Kutta stages at
        # the end points see the one-sided limit instead of a jump to zero.
        r = self.risetime
        if r == 0.0:
            return 1.0 if 0.0 <= t <= self.duration else 0.0
        if t <= 0.0 or t >= self.duration:
            return 0.0
        if r > 0.0:
            if t < r:
                return 0.5 * (1.0 - math.cos(math.pi * t / r))
            if t > self.duration - r:
                return 0.5 * (1.0 - math.cos(math.pi * (self.duration - t) / r))
        return 1.0

    def flux(self, t: float) -> float:
        return self.park + self.envelope_at(t) * self.amp * math.cos(
            self.omega_p * t + self.theta_p)


def envelope_value(pulse: FluxPulse, t: float) -> float:
    """Flat-top envelope with raised-cosine edges of length ``pulse.risetime``.

    Returns 0 at both ends, 1 on the flat top, and 0.5 halfway up an edge.
    """
    if t < 0 or t > pulse.duration:
        raise ValueError(f"t={t:g} outside pulse [0, {pulse.duration:g}]")
    if pulse.risetime == 0 and (t == 0 or t == pulse.duration):
        return 0.0
    return pulse.envelope_at(t)


def band_frequency(band: TunableBand, flux):
    """First transition frequency of the tunable transmon at ``flux`` (in flux quanta).

    Works on scalars and arrays.  Uses the band-maximum anharmonicity as the
    Duffing correction so that the band hits both measured extrema exactly.
    """
    d = band.asymmetry_d
    eta = band.eta_max
    c = np.cos(np.pi * np.asarray(flux, dtype=float))
    w = (band.omega_max + eta) * (d * d + (1.0 - d * d) * c * c) ** 0.25 - eta
    return float(w) if np.ndim(w) == 0 else w


def _band_frequency_scalar(band: TunableBand, flux: float) -> float:
    d = band.asymmetry_d
    c = math.cos(math.pi * flux)
    return (band.omega_max + band.eta_max) * (d * d + (1.0 - d * d) * c * c) ** 0.25 - band.eta_max


def anharmonicity_at(band: TunableBand, flux: float,
                     mode: Literal["constant", "interpolated"] = "constant") -> float:
    """Tunable-transmon anharmonicity at ``flux``.

    ``constant`` returns the value measured at the nearest sweet spot (band
    maximum or minimum); ``interpolated`` interpolates linearly in frequency
    between ``eta_max`` and ``eta_min``.
    """
    if mode == "constant":
        near_max = math.cos(math.pi * flux) ** 2 >= 0.5
        return band.eta_max if near_max else band.eta_min
    if mode == "interpolated":
        frac = (band.omega_max - band_frequency(band, flux)) / (band.omega_max - band.omega_min)
        return band.eta_max + (band.eta_min - band.eta_max) * frac
    raise ValueError(f"unknown anharmonicity mode {mode!r}")


@dataclass(frozen=True)
class ModulatedFrequency:
    """Fourier content of omega_T(t) under sinusoidal flux modulation.

    ``harmonics`` holds signed cosine coefficients ``(k, c_k)`` such that
    omega_T(t) = omega_bar + sum_k c_k cos(k (omega_p t + theta_p)).
    ``omega_tilde`` is ``|c_2|``.
    """

    omega_bar: float
    omega_tilde: float
    harmonics: tuple[tuple[int, float], ...] = field(default=())

    def reconstruct(self, phase):
        phase = np.asarray(phase, dtype=float)
        out = np.full(phase.shape, self.omega_bar)
        for k, c in self.harmonics:
            out = out + c * np.cos(k * phase)
        return out


def modulated_frequency(band: TunableBand, pulse: FluxPulse, n_harmonics: int = 8,
                        samples: int = 4096) -> ModulatedFrequency:
    """Average frequency and modulation amplitude of the tunable transmon.

    Evaluated numerically over one flux period, so it stays exact at large
    modulation amplitude where low-order expansions break down.
    """
    if pulse.amp == 0:
        return ModulatedFrequency(band_frequency(band, pulse.park), 0.0, ())
    alpha = TWO_PI * np.arange(samples) / samples
    w = band_frequency(band, pulse.park + pulse.amp * np.cos(alpha))
    spec = np.fft.rfft(w) / samples
    omega_bar = float(spec[0].real)
    kmax = min(n_harmonics, samples // 2 - 1)
    harmonics = tuple((k, float(2.0 * spec[k].real)) for k in range(1, kmax + 1))
    omega_tilde = abs(2.0 * spec[2].real)
    return ModulatedFrequency(omega_bar, float(omega_tilde), harmonics)


def _require(mapping: dict, key: str, where: str):
    try:
        return mapping[key]
    except KeyError:
        raise ValueError(f"device file: missing key {where}{key}") from None


def device_from_dict(cfg: dict) -> DeviceParams:
    fx = _require(cfg, "fixed", "")
    tn = _require(cfg, "tunable", "")
    fixed = FixedTransmon(
        omega_F=mhz(_require(fx, "f_MHz", "fixed.")),
        eta_F=mhz(_require(fx, "eta_MHz", "fixed.")),
        T1=_require(fx, "T1_us", "fixed.") * 1e-6,
        T2_star=_require(fx, "T2_us", "fixed.") * 1e-6,
    )
    tunable = TunableBand(
        omega_max=mhz(_require(tn, "f_max_MHz", "tunable.")),
        omega_min=mhz(_require(tn, "f_min_MHz", "tunable.")),
        eta_max=mhz(_require(tn, "eta_max_MHz", "tunable.")),
        eta_min=mhz(_require(tn, "eta_min_MHz", "tunable.")),
        T1=_require(tn, "T1_us", "tunable.") * 1e-6,
        T2_star_parked=_require(tn, "T2_parked_us", "tunable.") * 1e-6,
        T2_star_driven=_require(tn, "T2_driven_us", "tunable.") * 1e-6,
    )
    return DeviceParams(fixed, tunable, g=mhz(_require(cfg, "g_MHz", "")),
                        levels_per_transmon=int(cfg.get("levels", 3)))


def device_to_dict(device: DeviceParams) -> dict:
    fx, tn = device.fixed, device.tunable
    return {
        "fixed": {"f_MHz": to_mhz(fx.omega_F), "eta_MHz": to_mhz(fx.eta_F),
                  "T1_us": fx.T1 * 1e6, "T2_us": fx.T2_star * 1e6},
        "tunable": {"f_max_MHz": to_mhz(tn.omega_max), "f_min_MHz": to_mhz(tn.omega_min),
                    "eta_max_MHz": to_mhz(tn.eta_max), "eta_min_MHz": to_mhz(tn.eta_min),
                    "T1_us": tn.T1 * 1e6, "T2_parked_us": tn.T2_star_parked * 1e6,
                    "T2_driven_us": tn.T2_star_driven * 1e6},
        "g_MHz": to_mhz(device.g),
        "levels": device.levels_per_transmon,
    }


def load_device(path: str | Path) -> DeviceParams:
    with open(path) as fh:
        return device_from_dict(json.load(fh))


def _bundled(name: str) -> dict:
    return json.loads(resources.files("paramgate.data").joinpath(name).read_text())


def reference_device() -> DeviceParams:
    """The device of the bundled ``device_paper.json``."""
    return device_from_dict(_bundled("device_paper.json"))


def reference_gate_table() -> dict:
    """Per-gate operating points and reported figures from the bundled table."""
    return _bundled("reference_gates.json")
