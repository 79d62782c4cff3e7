"""Resonance prediction, chevron scans, gate calibration and phase bookkeeping."""
from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import curve_fit, minimize_scalar

from .bessel import bessel_jn
from .device import (
    TWO_PI,
    DeviceParams,
    FluxPulse,
    band_frequency,
    device_from_dict,
    device_to_dict,
    mhz,
    modulated_frequency,
    to_mhz,
)
from .dynamics import (
    IntegrationError,
    LocalGate,
    NoiseModel,
    PulseCache,
    PulseSchedule,
    _Generator,
    _segment,
    pulse_propagator,
    pulse_propagators,
)
from .hamiltonian import (
    TRANSITION_STATES,
    TRANSITIONS,
    HilbertSpace,
    build_duffing_hamiltonian,
    effective_coupling,
    resonance_offset,
)

GateKind = Literal["iswap", "cz02", "cz20"]

# prepared state and the state it is driven into, per transition
TRANSFER = {
    "iswap": ("10", "01"),
    "cz02": ("11", "02"),
    "cz20": ("11", "20"),
}


# flat-top edge length per gate; the iSWAP ramp passes the cz02 sideband and
# 60 ns edges let |11> return to itself far better than 30-40 ns ones
DEFAULT_RISETIME = {"iswap": 60e-9, "cz02": 40e-9, "cz20": 40e-9}


class NoResonanceError(ValueError):
    pass


class CalibrationError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class ResonancePrediction:
    transition: str
    harmonic_n: int
    omega_p_star: float
    g_eff: float
    amp: float
    residual: float = 0.0


def shifted_detuning(device: DeviceParams, amp: float, park: float = 0.0) -> float:
    """Detuning between the modulation-averaged tunable frequency and the fixed qubit."""
    mf = modulated_frequency(device.tunable, FluxPulse(park, amp, 1.0))
    return mf.omega_bar - device.fixed.omega_F


def predict_resonances(device: DeviceParams, amp: float, n_range: Iterable[int] = (1,),
                       transitions: Sequence[str] = TRANSITIONS, park: float = 0.0,
                       strict: bool = True) -> list[ResonancePrediction]:
    """Modulation frequencies where 2 n omega_p meets each transition's level spacing.

    The averaged detuning depends only on the amplitude, so each condition is
    solved directly.  With ``strict`` a (transition, n) pair without a
    positive solution raises :class:`NoResonanceError`; otherwise it is skipped.
    """
    if amp < 0:
        raise ValueError("amplitude must be non-negative")
    delta = shifted_detuning(device, amp, park)
    out = []
    for tr in transitions:
        rhs = delta + resonance_offset(device, tr, park)
        for n in n_range:
            if n == 0 or rhs / (2 * n) <= 0:
                if strict:
                    raise NoResonanceError(f"no positive modulation frequency for {tr}, n={n}")
                continue
            wp = rhs / (2 * n)
            ec = effective_coupling(device, FluxPulse(park, amp, wp), tr, n)
            if abs(ec.detuning_residual) >= TWO_PI:
                raise AssertionError("resonance solve left a residual above 1 Hz")
            out.append(ResonancePrediction(tr, n, wp, ec.g_eff, amp, ec.detuning_residual))
    return out


# ---------------------------------------------------------------------------
# chevrons

@dataclass(frozen=True)
class ChevronScan:
    transition: str
    amp: float
    prepared: str
    target: str
    freqs: np.ndarray          # rad/s
    durations: np.ndarray      # s
    values: np.ndarray         # shape (len(freqs), len(durations))
    risetime: float = 0.0
    failures: tuple = ()

    def __post_init__(self):
        for name in ("freqs", "durations"):
            grid = np.asarray(getattr(self, name), dtype=float)
            if grid.size == 0 or np.any(np.diff(grid) <= 0):
                raise ValueError(f"{name} grid must be non-empty and strictly increasing")
            object.__setattr__(self, name, grid)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("freq_MHz,duration_ns,population\n")
            for i, f in enumerate(self.freqs):
                for j, tau in enumerate(self.durations):
                    v = self.values[i, j]
                    fh.write(f"{to_mhz(f):.6f},{tau * 1e9:.6f},{'nan' if np.isnan(v) else f'{v:.10f}'}\n")

    def sidecar(self) -> dict:
        return {"transition": self.transition, "amp_phi0": self.amp,
                "prepared": self.prepared, "target": self.target,
                "risetime_ns": self.risetime * 1e9,
                "n_freqs": len(self.freqs), "n_durations": len(self.durations),
                "failures": [dict(f) for f in self.failures]}


def _column(args):
    device, noise, transition, amp, wp, durations, prepared, target, risetime, tol, park = args
    space = HilbertSpace.for_device(device)
    src, dst = space.index(prepared), space.index(target)
    try:
        pulse = FluxPulse(park, amp, wp, 0.0, float(max(durations)), risetime)
        props = pulse_propagators(device, pulse, durations, noise, tol, space)
    except (IntegrationError, ValueError) as exc:
        return np.full(len(durations), np.nan), str(exc)
    vals = np.empty(len(durations))
    for j, p in enumerate(props):
        if p.kind == "unitary":
            vals[j] = abs(p.matrix[dst, src]) ** 2
        else:
            d = space.dim
            vals[j] = p.matrix[dst * d + dst, src * d + src].real
    return np.clip(vals, 0.0, 1.0), None


def simulate_chevron(device: DeviceParams, noise: NoiseModel | None, transition: str, amp: float,
                     freqs: Sequence[float], durations: Sequence[float],
                     prepared: str | None = None, risetime: float = 0.0, tol: float = 1e-9,
                     workers: int = 1, park: float = 0.0) -> ChevronScan:
    """Target-state population over a (modulation frequency, duration) grid.

    Columns (one per frequency) are independent and run on ``workers``
    processes; a failing column is recorded and left as NaN.
    """
    if transition not in TRANSFER:
        raise ValueError(f"unknown transition {transition!r}")
    src, dst = TRANSFER[transition]
    prepared = prepared or src
    if prepared not in ("10", "11"):
        raise ValueError("prepared state must be |10> or |11>")
    if prepared != src:
        dst = {"10": "01", "11": "02"}[prepared]
    freqs = np.asarray(freqs, dtype=float)
    durations = np.asarray(durations, dtype=float)
    if freqs.size == 0 or durations.size == 0:
        raise ValueError("empty scan grid")
    jobs = [(device, noise, transition, amp, float(f), durations, prepared, dst, risetime, tol, park)
            for f in freqs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_column, jobs))
    else:
        results = [_column(j) for j in jobs]
    values = np.vstack([r[0] for r in results])
    failures = tuple(
        (("freq_MHz", to_mhz(f)), ("error", err)) for f, (_, err) in zip(freqs, results) if err)
    return ChevronScan(transition, amp, prepared, dst, freqs, durations, values, risetime, failures)


def fit_rabi(times: np.ndarray, populations: np.ndarray) -> tuple[float, float, float]:
    """Fit P(t) = c - a cos(w t + phi); returns (w in rad/s, contrast 2a, offset c)."""
    times = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float)
    dt = np.median(np.diff(times))
    spec = np.abs(np.fft.rfft(p - p.mean(), n=8 * len(p)))
    freqs = np.fft.rfftfreq(8 * len(p), d=dt)
    w0 = TWO_PI * freqs[1 + int(np.argmax(spec[1:]))]
    amp0 = 0.5 * (p.max() - p.min())

    def model(t, c, a, w, phi):
        return c - a * np.cos(w * t + phi)

    best = None
    for phi0 in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        try:
            popt, _ = curve_fit(model, times, p, p0=[p.mean(), amp0, w0, phi0], maxfev=20000)
        except RuntimeError:
            continue
        resid = np.sum((model(times, *popt) - p) ** 2)
        if best is None or resid < best[0]:
            best = (resid, popt)
    if best is None:
        raise RuntimeError("Rabi fit failed")
    c, a, w, _ = best[1]
    return abs(w), 2 * abs(a), c


# ---------------------------------------------------------------------------
# Floquet helpers for the frequency stage

def period_propagator(device: DeviceParams, amp: float, omega_p: float, park: float = 0.0,
                      tol: float = 1e-11) -> np.ndarray:
    """One-period propagator of a continuous square modulation (common frame)."""
    space = HilbertSpace.for_device(device)
    pulse = FluxPulse(park, amp, omega_p, 0.0, 1.0, 0.0)
    gen = _Generator(build_duffing_hamiltonian(device, space, pulse))
    return _segment(gen, 0.0, pulse.period, tol).y


def floquet_transfer(device: DeviceParams, transition: str, amp: float, omega_p: float,
                     park: float = 0.0) -> tuple[float, float]:
    """Stroboscopic Rabi contrast and angular rate of a continuous modulation.

    Uses the two Floquet modes that dominate the transfer amplitude.
    """
    space = HilbertSpace.for_device(device)
    src, dst = (space.index(s) for s in TRANSFER[transition])
    U = period_propagator(device, amp, omega_p, park)
    w, v = np.linalg.eig(U)
    c = np.linalg.solve(v, np.eye(space.dim)[:, src])
    a = v[dst, :] * c
    order = np.argsort(-np.abs(a))
    a1, a2 = a[order[0]], a[order[1]]
    contrast = (abs(a1) + abs(a2)) ** 2
    dphi = abs(np.angle(w[order[0]] / w[order[1]]))
    return float(min(contrast, 1.0)), float(dphi * omega_p / TWO_PI)


def find_resonance(device: DeviceParams, transition: str, amp: float, omega_guess: float,
                   width: float, park: float = 0.0, grid_points: int = 25) -> float:
    """Modulation frequency of maximal transfer contrast near ``omega_guess``.

    A coarse grid over +-3 ``width`` locates the chevron, a bounded Brent
    search finds the point where the chevron is symmetric (maximal contrast).
    """
    grid = omega_guess + np.linspace(-3, 3, grid_points) * width
    vals = [floquet_transfer(device, transition, amp, w, park)[0] for w in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda w: -floquet_transfer(device, transition, amp, w, park)[0],
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6 * width})
    return float(res.x)


# ---------------------------------------------------------------------------
# gate recipes

@dataclass(frozen=True)
class PhaseLedger:
    """Frame bookkeeping that turns the resonant exchange into the target gate.

    After the gate the qubits carry extra Z rotations Rz(phi) = exp(-i phi n)
    of total angle ``local_phase_F + interaction_phase`` on F and
    ``local_phase_T - interaction_phase`` on T; the ledger undoes them as
    virtual frame changes.
    """

    local_phase_F: float = 0.0
    local_phase_T: float = 0.0
    frame_tracking_rate: float = 0.0
    interaction_phase: float = 0.0
    swap_frame_exchange: bool = False

    @property
    def total_F(self) -> float:
        return self.local_phase_F + self.interaction_phase

    @property
    def total_T(self) -> float:
        return self.local_phase_T - self.interaction_phase

    def correction(self) -> np.ndarray:
        """Diagonal frame correction on |00>, |01>, |10>, |11>."""
        a, b = self.total_F, self.total_T
        return np.exp(1j * np.array([0.0, b, a, a + b]))


@dataclass(frozen=True)
class GateRecipe:
    gate_kind: str
    pulse: FluxPulse
    theta_target: float
    phase_ledger: PhaseLedger
    harmonic_n: int = 1
    g_eff: float = 0.0
    beta_n: float = 0.0
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.gate_kind not in TRANSFER:
            raise ValueError(f"unknown gate {self.gate_kind!r}")
        if not (math.isclose(self.theta_target, math.pi) or math.isclose(self.theta_target, 2 * math.pi)):
            raise ValueError("theta_target must be pi or 2 pi")
        if self.phase_ledger.swap_frame_exchange != (self.gate_kind == "iswap"):
            raise ValueError("frame exchange is required for, and only for, iSWAP")

    def to_dict(self) -> dict:
        p, led = self.pulse, self.phase_ledger
        return {
            "gate_kind": self.gate_kind,
            "harmonic_n": self.harmonic_n,
            "pulse": {"park_phi0": p.park, "amp_phi0": p.amp, "f_p_MHz": to_mhz(p.omega_p),
                      "theta_p": p.theta_p, "duration_ns": p.duration * 1e9,
                      "risetime_ns": p.risetime * 1e9},
            "theta_target": self.theta_target,
            "g_eff_MHz": to_mhz(self.g_eff),
            "beta_n": self.beta_n,
            "phase_ledger": {"local_phase_F": led.local_phase_F,
                             "local_phase_T": led.local_phase_T,
                             "frame_tracking_rate_MHz": to_mhz(led.frame_tracking_rate),
                             "interaction_phase": led.interaction_phase,
                             "swap_frame_exchange": led.swap_frame_exchange},
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GateRecipe":
        p, led = d["pulse"], d["phase_ledger"]
        pulse = FluxPulse(p["park_phi0"], p["amp_phi0"], mhz(p["f_p_MHz"]), p["theta_p"],
                          p["duration_ns"] * 1e-9, p["risetime_ns"] * 1e-9)
        ledger = PhaseLedger(led["local_phase_F"], led["local_phase_T"],
                             mhz(led["frame_tracking_rate_MHz"]), led["interaction_phase"],
                             bool(led["swap_frame_exchange"]))
        return cls(d["gate_kind"], pulse, d["theta_target"], ledger, d.get("harmonic_n", 1),
                   mhz(d.get("g_eff_MHz", 0.0)), d.get("beta_n", 0.0), d.get("diagnostics", {}))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "GateRecipe":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def ideal_gate(kind: str) -> np.ndarray:
    """Target unitary on |00>, |01>, |10>, |11>."""
    if kind == "iswap":
        return np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)
    if kind in ("cz02", "cz20", "cz"):
        return np.diag([1, 1, 1, -1]).astype(complex)
    raise ValueError(f"unknown gate {kind!r}")


def measure_ledger(U: np.ndarray, kind: str, beta: float = 0.0,
                   frame_tracking_rate: float = 0.0) -> PhaseLedger:
    """Ramsey-style local phases of a computational-subspace unitary.

    For CZ the phase of each single-excitation state relative to |00> is what
    a Ramsey experiment on that qubit reads; for iSWAP the coherence moves to
    the partner qubit and the phase is read there.  ``beta`` is booked as the
    interaction phase and removed from the local phases.
    """
    ref = U[0, 0] / abs(U[0, 0])
    if kind == "iswap":
        a = -np.angle(U[2, 1] / (1j * ref))
        b = -np.angle(U[1, 2] / (1j * ref))
        return PhaseLedger(_wrap(a - beta), _wrap(b + beta), frame_tracking_rate,
                           _wrap(beta), True)
    a = -np.angle(U[2, 2] / ref)
    b = -np.angle(U[1, 1] / ref)
    return PhaseLedger(float(a), float(b), frame_tracking_rate, 0.0, False)


def _wrap(x: float) -> float:
    return float((x + math.pi) % (2 * math.pi) - math.pi)


def corrected_unitary(U: np.ndarray, ledger: PhaseLedger) -> np.ndarray:
    """Computational-subspace unitary followed by the ledger's frame corrections."""
    return ledger.correction()[:, None] * U


def conditional_phase(U: np.ndarray) -> float:
    return float(np.angle(U[3, 3] * U[0, 0] / (U[1, 1] * U[2, 2])) % (2 * math.pi))


def gate_fidelity(U: np.ndarray, target: np.ndarray) -> float:
    """Average gate fidelity of a (possibly leaky) 4x4 block to ``target``."""
    d = target.shape[0]
    return float((abs(np.trace(target.conj().T @ U)) ** 2 + d) / (d * d + d))


def _theta_edges(device: DeviceParams, kind: str, amp: float, omega_p: float, risetime: float,
                 n: int, park: float, points: int = 33) -> float:
    # rotation angle picked up on both edges, 2 * integral g_eff(t) dt
    if risetime == 0:
        return 0.0
    s = np.linspace(0.0, 1.0, points)
    env = 0.5 * (1.0 - np.cos(math.pi * s))
    space = HilbertSpace.for_device(device)
    up, lo = TRANSITION_STATES[kind]
    m = abs((space.a_F.conj().T @ space.a_T)[space.index(up), space.index(lo)])
    vals = []
    for e in env:
        mf = modulated_frequency(device.tunable, FluxPulse(park, e * amp, omega_p))
        vals.append(device.g * m * abs(bessel_jn(n, mf.omega_tilde / (2 * omega_p))))
    per_edge = trapezoid(vals, s * risetime)
    return 2.0 * 2.0 * per_edge


class _Objective:
    """Evaluates calibration scores of shaped pulses at a fixed tolerance."""

    def __init__(self, device: DeviceParams, kind: str, tol: float):
        self.device, self.kind, self.tol = device, kind, tol
        self.space = HilbertSpace.for_device(device)
        src, dst = TRANSFER[kind]
        self.src, self.dst = self.space.index(src), self.space.index(dst)
        self.calls = 0
        self.cache = PulseCache()

    def score_matrix(self, U: np.ndarray) -> float:
        # transfer for iSWAP, return of |11> for CZ
        if self.kind == "iswap":
            return abs(U[self.dst, self.src]) ** 2
        return abs(U[self.src, self.src]) ** 2

    def unitaries(self, pulse: FluxPulse, durations) -> list[np.ndarray]:
        self.calls += 1
        props = pulse_propagators(self.device, pulse, durations, tol=self.tol, space=self.space,
                                  cache=self.cache)
        return [p.matrix for p in props]

    def score(self, pulse: FluxPulse) -> float:
        return self.score_matrix(self.unitaries(pulse, [pulse.duration])[0])

    def computational(self, pulse: FluxPulse, noise: NoiseModel | None = None) -> np.ndarray:
        cache = self.cache if noise is None else None
        return pulse_propagator(self.device, pulse, noise, self.tol, self.space, cache).computational()

    def best_duration(self, pulse: FluxPulse, tau0: float, span: float) -> tuple[float, float]:
        """Duration maximising the score within ``tau0 * (1 +- span)``.

        The coarse scan steps by whole modulation periods so every point
        shares one falling edge; a bounded search then refines it.
        """
        r, period = pulse.risetime, pulse.period
        lo = max(2 * r, tau0 * (1 - span))
        hi = tau0 * (1 + span)
        k_max = max(int((hi - lo) / period), 2)
        taus = lo + period * np.arange(k_max + 1)
        mats = self.unitaries(pulse.replace(duration=taus[-1]), taus)
        vals = [self.score_matrix(U) for U in mats]
        i = int(np.argmax(vals))
        a = max(taus[i] - period, 2 * r)
        b = taus[i] + period
        res = minimize_scalar(lambda t: -self.score(pulse.replace(duration=t)), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-13})
        if -res.fun < vals[i]:
            return float(taus[i]), float(vals[i])
        return float(res.x), float(-res.fun)

    def best_frequency(self, pulse: FluxPulse, width: float) -> float:
        """Modulation frequency maximising the score at fixed duration."""
        w0 = pulse.omega_p
        grid = w0 + np.linspace(-1.0, 1.0, 7) * width
        vals = [self.score(pulse.replace(omega_p=w)) for w in grid]
        i = int(np.argmax(vals))
        res = minimize_scalar(lambda w: -self.score(pulse.replace(omega_p=w)),
                              bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                              method="bounded", options={"xatol": 1e-6 * width})
        return float(res.x) if -res.fun >= vals[i] else float(grid[i])

    def fidelity(self, pulse: FluxPulse) -> float:
        """Average gate fidelity after the measured frame corrections."""
        return _corrected_fidelity(self.computational(pulse), self.kind)

    def polish_duration(self, pulse: FluxPulse, window: float, step: float) -> FluxPulse:
        taus = pulse.duration + np.arange(-window, window + step / 2, step)
        taus = taus[taus >= 2 * pulse.risetime]
        self.calls += 1
        props = pulse_propagators(self.device, pulse.replace(duration=taus[-1]), taus,
                                  tol=self.tol, space=self.space, cache=self.cache)
        vals = [_corrected_fidelity(p.computational(), self.kind) for p in props]
        i = int(np.argmax(vals))
        res = minimize_scalar(lambda t: -self.fidelity(pulse.replace(duration=t)),
                              bounds=(taus[i] - step, taus[i] + step), method="bounded",
                              options={"xatol": 1e-12})
        best = res.x if -res.fun > vals[i] else taus[i]
        return pulse.replace(duration=float(best))

    def polish_frequency(self, pulse: FluxPulse, width: float) -> FluxPulse:
        w0 = pulse.omega_p
        grid = w0 + np.linspace(-1.0, 1.0, 7) * width
        vals = [self.fidelity(pulse.replace(omega_p=w)) for w in grid]
        i = int(np.argmax(vals))
        res = minimize_scalar(lambda w: -self.fidelity(pulse.replace(omega_p=w)),
                              bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                              method="bounded", options={"xatol": 1e-6 * width})
        best = res.x if -res.fun > vals[i] else grid[i]
        return pulse.replace(omega_p=float(best))


def _corrected_fidelity(U: np.ndarray, kind: str) -> float:
    return gate_fidelity(corrected_unitary(U, measure_ledger(U, kind)), ideal_gate(kind))


def calibrate_gate(device: DeviceParams, noise: NoiseModel | None, gate_kind: str, amp: float,
                   prediction: ResonancePrediction | None = None, harmonic_n: int = 1,
                   risetime: float | None = None, theta_p: float = 0.0, park: float = 0.0,
                   max_iter: int = 3, tol: float = 1e-6, threshold: float = 1e-2) -> GateRecipe:
    """Calibrate the flux pulse of one parametric gate on noiseless dynamics.

    Frequency comes from the symmetric point of the chevron, duration from
    maximal transfer (iSWAP) or full return of |11> (CZ), alternated a few
    times with the shaped pulse.  A last duration and frequency polish
    maximises the fidelity of the frame-corrected gate, which also pulls the
    CZ conditional phase onto pi.  ``noise``, when given, is only used
    to report the fidelity of the finished recipe.  ``risetime`` defaults to
    the per-gate value of :data:`DEFAULT_RISETIME`.

    Raises
    ------
    CalibrationError
        If the transfer (or return) probability or the gate fidelity ends up
        further than ``threshold`` from one.
    """
    if gate_kind not in TRANSFER:
        raise ValueError(f"unknown gate {gate_kind!r}")
    if prediction is None:
        prediction = predict_resonances(device, amp, (harmonic_n,), (gate_kind,), park)[0]
    if prediction.transition != gate_kind:
        raise ValueError("prediction is for a different transition")
    n = prediction.harmonic_n
    if risetime is None:
        risetime = DEFAULT_RISETIME[gate_kind]
    theta = math.pi if gate_kind == "iswap" else 2 * math.pi
    g0 = abs(prediction.g_eff)
    if g0 == 0:
        raise CalibrationError("zero effective coupling at this amplitude")
    obj = _Objective(device, gate_kind, tol)

    wp = find_resonance(device, gate_kind, amp, prediction.omega_p_star, g0, park)
    theta_edges = _theta_edges(device, gate_kind, amp, wp, risetime, n, park)
    tau = max((theta - theta_edges) / (2 * g0), 0.0) + 2 * risetime
    pulse = FluxPulse(park, amp, wp, theta_p, tau, risetime)
    history = []
    span = 0.35
    for _ in range(max_iter):
        tau, score = obj.best_duration(pulse, pulse.duration, span)
        pulse = pulse.replace(duration=tau)
        wp_new = obj.best_frequency(pulse, 0.3 * g0)
        history.append([to_mhz(wp_new), tau * 1e9, score])
        moved = abs(wp_new - pulse.omega_p)
        pulse = pulse.replace(omega_p=wp_new)
        span = 0.08
        if moved < 1e-3 * g0:
            break
    # transfer alone ignores coherent leakage of |11> and phase errors; the
    # last stage maximises the fidelity of the frame-corrected gate itself
    pulse = pulse.replace(duration=obj.best_duration(pulse, pulse.duration, 0.05)[0])
    for window in (15e-9, 3e-9):
        pulse = obj.polish_duration(pulse, window, 0.5e-9 if window > 5e-9 else 0.25e-9)
        pulse = obj.polish_frequency(pulse, 0.1 * g0)
    score = obj.score(pulse)

    U = obj.computational(pulse)
    ec = effective_coupling(device, pulse, gate_kind, n)
    mf = modulated_frequency(device.tunable, pulse)
    shift = band_frequency(device.tunable, park) - mf.omega_bar
    ledger = measure_ledger(U, gate_kind, ec.beta_n if gate_kind == "iswap" else 0.0, shift)
    target = ideal_gate(gate_kind)
    fid = gate_fidelity(corrected_unitary(U, ledger), target)
    diag = {
        "predicted_f_p_MHz": to_mhz(prediction.omega_p_star),
        "history": history,
        "transfer_score": score,
        "noiseless_fidelity": fid,
        "conditional_phase": conditional_phase(U),
        "leakage": float(1 - np.mean(np.sum(np.abs(U) ** 2, axis=0))),
        "theta_edges_estimate": theta_edges,
        "evaluations": obj.calls,
    }
    if 1 - fid > threshold:
        raise CalibrationError(f"{gate_kind} calibration did not converge "
                               f"(score {score:.4f}, fidelity {fid:.4f})", diag)
    if noise is not None:
        from .characterization import Superoperator, average_gate_fidelity
        E = obj.computational(pulse, noise)
        c = ledger.correction()
        E = np.kron(c.conj(), c)[:, None] * E
        diag["noisy_fidelity"] = average_gate_fidelity(Superoperator(E), target)
    return GateRecipe(gate_kind, pulse, theta, ledger, n, ec.g_eff, ec.beta_n, diag)


# ---------------------------------------------------------------------------
# frame bookkeeping on schedules

def apply_phase_ledger(recipe: GateRecipe, schedule: PulseSchedule) -> PulseSchedule:
    """Rewrite a schedule that follows the calibrated gate.

    Frame phases are exchanged for iSWAP, then shifted by minus the gate's
    total local phases; local gates inherit them through
    :meth:`PulseSchedule.resolved`.  Downstream flux pulses get their
    modulation phase advanced for the mean-shift mismatch accumulated since
    the gate ended.
    """
    led = recipe.phase_ledger
    pF, pT = schedule.frame_phases
    if led.swap_frame_exchange:
        pF, pT = pT, pF
    pF -= led.total_F
    pT -= led.total_T
    entries = []
    n = recipe.harmonic_n
    for e, t in zip(schedule.entries, schedule.start_times()):
        if isinstance(e, FluxPulse) and led.frame_tracking_rate != 0.0:
            e = e.replace(theta_p=e.theta_p - led.frame_tracking_rate * t / (2 * n))
        entries.append(e)
    return dataclasses.replace(schedule, entries=tuple(entries), frame_phases=(pF, pT))


def recipe_summary(recipe: GateRecipe) -> str:
    p = recipe.pulse
    rows = [
        ("Gate", recipe.gate_kind),
        ("Phi~ [Phi0]", f"{p.amp:.3f}"),
        ("f_p [MHz]", f"{to_mhz(p.omega_p):.2f}"),
        ("duration [ns]", f"{p.duration * 1e9:.1f}"),
        ("g_eff/2pi [MHz]", f"{abs(to_mhz(recipe.g_eff)):.2f}"),
        ("harmonic n", str(recipe.harmonic_n)),
        ("noiseless fidelity", f"{recipe.diagnostics.get('noiseless_fidelity', float('nan')):.5f}"),
    ]
    if "noisy_fidelity" in recipe.diagnostics:
        rows.append(("simulated fidelity (noise)", f"{recipe.diagnostics['noisy_fidelity']:.4f}"))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)} | {v}" for k, v in rows) + "\n"


__all__ = [
    "ChevronScan", "GateRecipe", "PhaseLedger", "ResonancePrediction", "NoResonanceError",
    "CalibrationError", "predict_resonances", "simulate_chevron", "calibrate_gate",
    "apply_phase_ledger", "fit_rabi", "find_resonance", "floquet_transfer", "ideal_gate",
    "measure_ledger", "corrected_unitary", "gate_fidelity", "conditional_phase",
    "shifted_detuning", "device_from_dict", "device_to_dict", "LocalGate",
]
