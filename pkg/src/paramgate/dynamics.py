"""Closed and open (Lindblad) evolution of the driven two-transmon system."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence, Union

import numpy as np

from .device import DeviceParams, FluxPulse, band_frequency
from .hamiltonian import HilbertSpace, TimeDependentHamiltonian, build_duffing_hamiltonian
from .integrate import IntegrationError, dopri5

DEFAULT_TOL = 1e-8
_CHECK = 1e-6


@dataclass(frozen=True)
class QuantumState:
    kind: Literal["pure_vector", "density_matrix"]
    data: np.ndarray
    atol: float = 1e-9

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if self.kind == "pure_vector":
            if data.ndim != 1:
                raise ValueError("pure state must be a vector")
            if abs(np.linalg.norm(data) - 1) > self.atol:
                raise ValueError("pure state is not normalised")
        elif self.kind == "density_matrix":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ValueError("density matrix must be square")
            if np.abs(data - data.conj().T).max() > self.atol:
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(data).real - 1) > self.atol:
                raise ValueError("density matrix trace differs from 1")
            if np.linalg.eigvalsh(0.5 * (data + data.conj().T)).min() < -self.atol:
                raise ValueError("density matrix has negative eigenvalues")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def basis(cls, space: HilbertSpace, label: str, density: bool = False) -> "QuantumState":
        v = space.ket(label)
        if density:
            return cls("density_matrix", np.outer(v, v.conj()))
        return cls("pure_vector", v)

    def density(self) -> np.ndarray:
        if self.kind == "density_matrix":
            return self.data
        return np.outer(self.data, self.data.conj())

    def populations(self) -> np.ndarray:
        if self.kind == "pure_vector":
            return np.abs(self.data) ** 2
        return np.diag(self.data).real.copy()

    def fidelity(self, other: "QuantumState") -> float:
        """Overlap fidelity; exact for pure states, Uhlmann for mixed pairs."""
        if self.kind == other.kind == "pure_vector":
            return float(abs(np.vdot(self.data, other.data)) ** 2)
        a, b = self.density(), other.density()
        w, v = np.linalg.eigh(a)
        sa = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        m = sa @ b @ sa
        ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)


@dataclass(frozen=True)
class NoiseModel:
    """Effective relaxation and coherence times of both transmons (seconds).

    Pure dephasing follows from 1/T_phi = 1/T2 - 1/(2 T1).  ``T2_T_driven``
    replaces the tunable T2 while a flux pulse is applied.
    """

    T1_F: float
    T1_T: float
    T2_F: float
    T2_T: float
    T2_T_driven: float | None = None

    def __post_init__(self):
        pairs = [(self.T1_F, self.T2_F), (self.T1_T, self.T2_T)]
        if self.T2_T_driven is not None:
            pairs.append((self.T1_T, self.T2_T_driven))
        for t1, t2 in pairs:
            if t1 <= 0 or t2 <= 0:
                raise ValueError("coherence times must be positive")
            if t2 > 2 * t1 * (1 + 1e-12):
                raise ValueError(f"T2={t2:g} exceeds 2 T1={2 * t1:g}")

    @classmethod
    def from_device(cls, device: DeviceParams) -> "NoiseModel":
        return cls(device.fixed.T1, device.tunable.T1, device.fixed.T2_star,
                   device.tunable.T2_star_parked, device.tunable.T2_star_driven)

    @classmethod
    def for_gate(cls, device: DeviceParams, row: dict) -> "NoiseModel":
        """Noise under drive from a gate-table row: geometric-mean T1 range, driven T2*."""
        lo, hi = row["T1_us"]
        t1 = math.sqrt(lo * hi) * 1e-6
        t2 = min(row["T2_us"] * 1e-6, 2 * t1)
        return cls(device.fixed.T1, t1, device.fixed.T2_star, min(device.tunable.T2_star_parked, 2 * t1), t2)

    @staticmethod
    def _dephasing_rate(t1: float, t2: float) -> float:
        return max(1.0 / t2 - 0.5 / t1, 0.0)

    def collapse_ops(self, space: HilbertSpace, driven: bool = False) -> list[np.ndarray]:
        t2_T = self.T2_T_driven if (driven and self.T2_T_driven is not None) else self.T2_T
        ops = [space.a_F / math.sqrt(self.T1_F), space.a_T / math.sqrt(self.T1_T)]
        for n_op, t1, t2 in ((space.n_F, self.T1_F, self.T2_F), (space.n_T, self.T1_T, t2_T)):
            gphi = self._dephasing_rate(t1, t2)
            if gphi > 0:
                ops.append(n_op * math.sqrt(2.0 * gphi))
        return ops


@dataclass(frozen=True)
class LocalGate:
    """Ideal single-qubit rotation exp(-i angle/2 (cos(phase) X + sin(phase) Y))."""

    qubit: Literal["F", "T"]
    angle: float
    phase: float = 0.0

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
        return np.array([[c, -1j * s * np.exp(-1j * self.phase)],
                         [-1j * s * np.exp(1j * self.phase), c]])


@dataclass(frozen=True)
class Idle:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("idle duration must be non-negative")


ScheduleEntry = Union[FluxPulse, LocalGate, Idle]


@dataclass(frozen=True)
class PulseSchedule:
    """Sequential (hence non-overlapping) list of flux pulses, local gates and idles.

    ``frame_phases`` are virtual-Z frame offsets (F, T) added to the phase of
    every local gate on that qubit when the schedule is played.
    """

    entries: tuple[ScheduleEntry, ...] = ()
    frame_phases: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if not isinstance(e, (FluxPulse, LocalGate, Idle)):
                raise TypeError(f"unsupported schedule entry {e!r}")

    @staticmethod
    def entry_duration(e: ScheduleEntry) -> float:
        return e.duration if isinstance(e, (FluxPulse, Idle)) else 0.0

    @property
    def total_duration(self) -> float:
        return sum(self.entry_duration(e) for e in self.entries)

    def start_times(self) -> list[float]:
        out, t = [], 0.0
        for e in self.entries:
            out.append(t)
            t += self.entry_duration(e)
        return out

    def resolved(self) -> tuple[ScheduleEntry, ...]:
        """Entries with frame offsets folded into the local-gate phases."""
        offset = {"F": self.frame_phases[0], "T": self.frame_phases[1]}
        return tuple(
            LocalGate(e.qubit, e.angle, e.phase + offset[e.qubit]) if isinstance(e, LocalGate) else e
            for e in self.entries)


def _vec_indices(d: int, idx: Sequence[int]) -> list[int]:
    # column stacking: element (r, c) sits at c * d + r
    return [c * d + r for c in idx for r in idx]


@dataclass(frozen=True)
class Propagator:
    """Time-ordered evolution over [t0, t1].

    ``kind`` is ``unitary`` (dim x dim) or ``superoperator`` (column-stacked
    Liouville matrix, dim^2 x dim^2).  ``frame`` holds the rotating-frame
    angular frequencies (F, T) of the representation.
    """

    matrix: np.ndarray
    kind: Literal["unitary", "superoperator"]
    space: HilbertSpace
    t0: float = 0.0
    t1: float = 0.0
    frame: tuple[float, float] = (0.0, 0.0)

    def _frame_diag(self, new_frame, t) -> np.ndarray:
        dF = new_frame[0] - self.frame[0]
        dT = new_frame[1] - self.frame[1]
        return np.exp(1j * t * (dF * np.diag(self.space.n_F).real + dT * np.diag(self.space.n_T).real))

    def in_frame(self, frame: tuple[float, float]) -> "Propagator":
        """Re-express in a frame rotating at ``frame`` = (omega_F, omega_T)."""
        d1 = self._frame_diag(frame, self.t1)
        d0 = self._frame_diag(frame, self.t0)
        if self.kind == "unitary":
            m = d1[:, None] * self.matrix * d0.conj()[None, :]
        else:
            s1 = np.kron(d1.conj(), d1)
            s0 = np.kron(d0.conj(), d0)
            m = s1[:, None] * self.matrix * s0.conj()[None, :]
        return Propagator(m, self.kind, self.space, self.t0, self.t1, tuple(frame))

    def superoperator(self) -> np.ndarray:
        if self.kind == "superoperator":
            return self.matrix
        return np.kron(self.matrix.conj(), self.matrix)

    def computational(self) -> np.ndarray:
        """Restriction to span{|00>, |01>, |10>, |11>} (leakage shows up as loss)."""
        idx = self.space.computational_indices
        if self.kind == "unitary":
            return self.matrix[np.ix_(idx, idx)]
        v = _vec_indices(self.space.dim, idx)
        return self.matrix[np.ix_(v, v)]

    def apply(self, state: QuantumState) -> QuantumState:
        if self.kind == "unitary" and state.kind == "pure_vector":
            return QuantumState("pure_vector", self.matrix @ state.data, atol=1e-6)
        rho = self.superoperator() @ state.density().reshape(-1, order="F")
        rho = rho.reshape(self.space.dim, self.space.dim, order="F")
        return QuantumState("density_matrix", 0.5 * (rho + rho.conj().T), atol=1e-6)

    def compose(self, later: "Propagator") -> "Propagator":
        if later.frame != self.frame:
            later = later.in_frame(self.frame)
        if self.kind == later.kind == "unitary":
            return Propagator(later.matrix @ self.matrix, "unitary", self.space,
                              self.t0, later.t1, self.frame)
        return Propagator(later.superoperator() @ self.superoperator(), "superoperator",
                          self.space, self.t0, later.t1, self.frame)


class _Generator:
    """Right-hand sides for kets, operator stacks and density matrices."""

    def __init__(self, H: TimeDependentHamiltonian, collapse: Sequence[np.ndarray] = ()):
        self.H = H
        self.L = [np.asarray(c) for c in collapse]
        self.Ld = [c.conj().T for c in self.L]
        self.LL = sum((ld @ l for l, ld in zip(self.L, self.Ld)), np.zeros_like(H.static_part))
        self.open = bool(self.L)
        self._diag = None
        if H.diagonal_drive:
            self._diag = [np.diag(m).copy() for m, _ in H.drive_terms]
            self._fns = [f for _, f in H.drive_terms]

    def _apply_h(self, t: float, y: np.ndarray) -> np.ndarray:
        # H(t) @ y with y of shape (..., d, k) or (d,)
        out = self.H.static_part @ y
        if self._diag is not None:
            for dvec, fn in zip(self._diag, self._fns):
                c = fn(t)
                if c != 0.0:
                    if y.ndim == 1:
                        out += c * (dvec * y)
                    else:
                        out += c * (dvec[:, None] * y)
        else:
            for m, fn in self.H.drive_terms:
                c = fn(t)
                if c != 0.0:
                    out += c * (m @ y)
        return out

    def schrodinger(self, t: float, y: np.ndarray) -> np.ndarray:
        return -1j * self._apply_h(t, y)

    def lindblad(self, t: float, rho: np.ndarray) -> np.ndarray:
        hr = self._apply_h(t, rho)
        comm = hr - np.swapaxes(hr.conj(), -1, -2)  # H rho - rho H for Hermitian rho stacks
        out = -1j * comm
        for l, ld in zip(self.L, self.Ld):
            out += l @ rho @ ld
        out -= 0.5 * (self.LL @ rho + rho @ self.LL)
        return out

    def lindblad_general(self, t: float, rho: np.ndarray) -> np.ndarray:
        # basis operators |r><c| are not Hermitian, so form both products explicitly
        h = self.H(t)
        out = -1j * (h @ rho - rho @ h)
        for l, ld in zip(self.L, self.Ld):
            out += l @ rho @ ld
        out -= 0.5 * (self.LL @ rho + rho @ self.LL)
        return out


def _unvec_basis(d: int) -> np.ndarray:
    basis = np.zeros((d * d, d, d), dtype=complex)
    for c in range(d):
        for r in range(d):
            basis[c * d + r, r, c] = 1.0
    return basis


def _stack_to_liouville(stack: np.ndarray) -> np.ndarray:
    n = stack.shape[0]
    return np.stack([m.reshape(-1, order="F") for m in stack], axis=1).reshape(n, n)


def _resolve_driven(H: TimeDependentHamiltonian, driven: bool | None) -> bool:
    return (not H.is_static) if driven is None else driven


def _check_state(y: np.ndarray, kind: str, tol: float):
    limit = max(_CHECK, 100 * tol)
    if kind == "pure_vector":
        dev = abs(np.linalg.norm(y) - 1)
        if dev > limit:
            raise IntegrationError(f"norm drifted by {dev:.2e}")
    else:
        dev = abs(np.trace(y).real - 1)
        if dev > limit:
            raise IntegrationError(f"trace drifted by {dev:.2e}")
        if np.linalg.eigvalsh(0.5 * (y + y.conj().T)).min() < -limit:
            raise IntegrationError("density matrix lost positivity")


def _local_tol(tol: float) -> float:
    # ``tol`` is the accepted error of a whole evolution; steps must be much tighter
    return max(1e-13, 1e-3 * tol)


def _check_tol(tol: float):
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-12, 1e-4], got {tol:g}")


def evolve_state(H: TimeDependentHamiltonian, state: QuantumState, window: tuple[float, float],
                 noise: NoiseModel | None = None, tol: float = DEFAULT_TOL,
                 driven: bool | None = None) -> QuantumState:
    """Evolve ``state`` under ``H`` over ``window``; Lindblad if ``noise`` is given.

    A pure input with noise is promoted to a density matrix.
    """
    return evolve_trajectory(H, state, window, [window[1]], noise, tol, driven)[1][-1]


def evolve_trajectory(H: TimeDependentHamiltonian, state: QuantumState, window: tuple[float, float],
                      times: Sequence[float], noise: NoiseModel | None = None,
                      tol: float = DEFAULT_TOL, driven: bool | None = None,
                      ) -> tuple[np.ndarray, list[QuantumState]]:
    """Like :func:`evolve_state` but returns the state at each of ``times``."""
    _check_tol(tol)
    t0, t1 = window
    times = np.asarray(sorted(times), dtype=float)
    if times.size and (times[0] < t0 - 1e-18 or times[-1] > t1 + 1e-18):
        raise ValueError("sample times must lie inside the window")
    collapse = noise.collapse_ops(H.space, _resolve_driven(H, driven)) if noise else []
    gen = _Generator(H, collapse)
    if gen.open:
        kind = "density_matrix"
        y0, rhs = state.density(), gen.lindblad
    else:
        kind = state.kind
        if kind == "pure_vector":
            y0, rhs = state.data, gen.schrodinger
        else:
            y0, rhs = state.data, (lambda t, r: gen.lindblad(t, r))
    sol = dopri5(rhs, t0, t1, y0, rtol=_local_tol(tol), t_eval=times)
    out = []
    for y in sol.samples:
        _check_state(y, kind, tol)
        if kind == "density_matrix":
            y = 0.5 * (y + y.conj().T)
        out.append(QuantumState(kind, y, atol=max(_CHECK, 100 * tol)))
    return times, out


def _segment(gen: _Generator, t0: float, t1: float, tol: float, dense: bool = False):
    d = gen.H.space.dim
    if gen.open:
        y0 = _unvec_basis(d)
        rhs = gen.lindblad_general
    else:
        y0 = np.eye(d, dtype=complex)
        rhs = gen.schrodinger
    lt = _local_tol(tol)
    return dopri5(rhs, t0, t1, y0, rtol=lt, atol=lt, dense=dense)


def _as_matrix(gen: _Generator, y: np.ndarray) -> np.ndarray:
    return _stack_to_liouville(y) if gen.open else y


def _check_propagator(m: np.ndarray, open_: bool, tol: float):
    limit = max(_CHECK, 100 * tol)
    if open_:
        d = int(round(math.sqrt(m.shape[0])))
        # trace preservation: the row vec(I)^T S must equal vec(I)^T
        tr_row = np.eye(d).reshape(-1, order="F") @ m
        dev = np.abs(tr_row - np.eye(d).reshape(-1, order="F")).max()
        if dev > limit:
            raise IntegrationError(f"superoperator not trace preserving ({dev:.2e})")
    else:
        dev = np.abs(m.conj().T @ m - np.eye(m.shape[0])).max()
        if dev > limit:
            raise IntegrationError(f"propagator not unitary ({dev:.2e})")


def _period_tol(tol: float) -> float:
    # errors of the one-period map grow linearly with the number of periods
    return max(1e-13, 1e-3 * tol)


def _periodic_block(gen: _Generator, a: float, length: float, period: float, tol: float):
    k = int(length // period)
    s = length - k * period
    if s > period * (1 - 1e-12):
        k, s = k + 1, 0.0
    one = _as_matrix(gen, _segment(gen, a, a + period, _period_tol(tol)).y)
    part = _as_matrix(gen, _segment(gen, a, a + s, tol).y) if s > 0 else np.eye(one.shape[0], dtype=complex)
    return part @ np.linalg.matrix_power(one, k)


def propagator_over(H: TimeDependentHamiltonian, window: tuple[float, float],
                    noise: NoiseModel | None = None, tol: float = DEFAULT_TOL,
                    driven: bool | None = None) -> Propagator:
    """Time-ordered propagator of ``H`` over ``window``.

    Without noise this is the unitary; with noise the column-stacked
    Liouville superoperator obtained by evolving a complete operator basis.
    Spans declared periodic by ``H.periodic`` are covered by powers of the
    one-period propagator.
    """
    _check_tol(tol)
    t0, t1 = window
    collapse = noise.collapse_ops(H.space, _resolve_driven(H, driven)) if noise else []
    gen = _Generator(H, collapse)
    dim = H.space.dim ** 2 if gen.open else H.space.dim
    pieces: list[tuple[float, float, bool]] = []
    if H.periodic is not None:
        pa, pb, period = H.periodic
        a, b = max(t0, pa), min(t1, pb)
        if b - a >= 2 * period:
            pieces = [(t0, a, False), (a, b, True), (b, t1, False)]
    if not pieces:
        pieces = [(t0, t1, False)]
    total = np.eye(dim, dtype=complex)
    for lo, hi, periodic in pieces:
        if hi <= lo:
            continue
        if periodic:
            m = _periodic_block(gen, lo, hi - lo, H.periodic[2], tol)
        else:
            m = _as_matrix(gen, _segment(gen, lo, hi, tol).y)
        total = m @ total
    _check_propagator(total, gen.open, tol)
    return Propagator(total, "superoperator" if gen.open else "unitary", H.space, t0, t1, H.frame)


def qubit_frame(device: DeviceParams, park: float = 0.0) -> tuple[float, float]:
    """Frame rotating at the bare parked qubit frequencies."""
    return (device.fixed.omega_F, band_frequency(device.tunable, park))


class PulseCache:
    """Reusable edge and period propagators keyed by everything but the duration."""

    def __init__(self, max_entries: int = 16):
        self.max_entries = max_entries
        self._entries: dict = {}

    def entry(self, pulse: FluxPulse, noise: NoiseModel | None, tol: float) -> dict:
        key = (pulse.park, pulse.amp, pulse.omega_p, pulse.theta_p, pulse.risetime,
               pulse.envelope, repr(noise), tol)
        if key not in self._entries:
            if len(self._entries) >= self.max_entries:
                self._entries.pop(next(iter(self._entries)))
            self._entries[key] = {}
        return self._entries[key]


def pulse_propagators(device: DeviceParams, pulse: FluxPulse, durations: Iterable[float],
                      noise: NoiseModel | None = None, tol: float = 1e-9,
                      space: HilbertSpace | None = None,
                      frame: Literal["qubit", "common"] = "qubit",
                      cache: "PulseCache | None" = None) -> list[Propagator]:
    """Propagators of ``pulse`` for several total durations, sharing work.

    The rising edge and one flat-top period are integrated once; each
    duration then costs a matrix power and its own falling edge.  Passing a
    :class:`PulseCache` keeps these pieces across calls that differ only in
    duration.
    """
    _check_tol(tol)
    durations = [float(x) for x in durations]
    space = space or HilbertSpace.for_device(device)
    r = pulse.risetime
    if any(tau < 2 * r * (1 - 1e-12) for tau in durations):
        raise ValueError("every duration must cover both edges")
    longest = max(durations) if durations else 0.0
    H_long = build_duffing_hamiltonian(device, space, pulse.replace(duration=longest + pulse.period + 2 * r))
    driven = pulse.amp > 0
    collapse = noise.collapse_ops(space, driven) if noise else []
    gen = _Generator(H_long, collapse)
    dim = space.dim ** 2 if gen.open else space.dim
    eye = np.eye(dim, dtype=complex)
    period = pulse.period
    store = cache.entry(pulse, noise, tol) if cache is not None else {}
    if "rise" not in store:
        store["rise"] = _as_matrix(gen, _segment(gen, 0.0, r, tol).y) if r > 0 else eye
        store["one"] = (_as_matrix(gen, _segment(gen, r, r + period, _period_tol(tol)).y)
                        if pulse.amp > 0 else None)
        store["powers"], store["falls"] = {}, {}
    rise, one = store["rise"], store["one"]
    powers: dict[int, np.ndarray] = store["powers"]

    def flat(length: float) -> np.ndarray:
        if length <= 0:
            return eye
        if one is None:
            return _as_matrix(gen, _segment(gen, r, r + length, tol).y)
        k = int(length // period)
        s = length - k * period
        if s > period * (1 - 1e-12):
            k, s = k + 1, 0.0
        elif s < period * 1e-12:
            s = 0.0
        if k not in powers:
            powers[k] = np.linalg.matrix_power(one, k)
        part = _as_matrix(gen, _segment(gen, r, r + s, tol).y) if s > 0 else eye
        return part @ powers[k]

    # the falling edge only depends on the modulation phase where it starts,
    # so durations differing by whole periods share it
    falls: dict[int, np.ndarray] = store["falls"]

    def fall(tau: float) -> np.ndarray:
        key = int(round(((tau - r) % period) / period * 1e9)) % 10 ** 9 if pulse.amp > 0 else 0
        if key not in falls:
            H_tau = build_duffing_hamiltonian(device, space, pulse.replace(duration=tau))
            fall_gen = _Generator(H_tau, collapse)
            falls[key] = _as_matrix(fall_gen, _segment(fall_gen, tau - r, tau, tol).y)
        return falls[key]

    out = []
    for tau in durations:
        flat_len = max(tau - 2 * r, 0.0)
        m = flat(flat_len) @ rise
        if r > 0:
            m = fall(tau) @ m
        _check_propagator(m, gen.open, tol)
        prop = Propagator(m, "superoperator" if gen.open else "unitary", space, 0.0, tau,
                          H_long.frame)
        if frame == "qubit":
            prop = prop.in_frame(qubit_frame(device, pulse.park))
        out.append(prop)
    return out


def pulse_propagator(device: DeviceParams, pulse: FluxPulse, noise: NoiseModel | None = None,
                     tol: float = 1e-9, space: HilbertSpace | None = None,
                     cache: PulseCache | None = None) -> Propagator:
    """Propagator of a single flux pulse in the parked-qubit frame."""
    return pulse_propagators(device, pulse, [pulse.duration], noise, tol, space, cache=cache)[0]


def write_timeseries(path, times: Sequence[float], states: Sequence[QuantumState],
                     space: HilbertSpace, coherences: Sequence[tuple[str, str]] = ()) -> None:
    """CSV dump: time, one population column per basis state, chosen coherences."""
    labels = [f"{f}{t}" for f in range(space.levels_F) for t in range(space.levels_T)]
    header = ["t_ns"] + [f"P_{lab}" for lab in labels]
    for a, b in coherences:
        header += [f"re_rho_{a}_{b}", f"im_rho_{a}_{b}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, s in zip(times, states):
            row = [f"{t * 1e9:.6f}"] + [f"{p:.12g}" for p in s.populations()]
            rho = s.density() if coherences else None
            for a, b in coherences:
                z = rho[space.index(a), space.index(b)]
                row += [f"{z.real:.12g}", f"{z.imag:.12g}"]
            w.writerow(row)
