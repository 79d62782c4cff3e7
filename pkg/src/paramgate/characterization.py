"""Process tomography, fidelity bounds and interleaved randomized benchmarking.

Channels live on the two-qubit computational subspace (d = 4) as
column-stacked Liouville matrices; population leaking out of it shows up
as lost trace.  Choi matrices are ordered input (x) output.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import polar
from scipy.optimize import curve_fit

from .calibration import GateRecipe, ideal_gate
from .clifford import clifford_group, compile_clifford
from .device import DeviceParams
from .dynamics import NoiseModel, Propagator, pulse_propagator
from .hamiltonian import HilbertSpace

D = 4
TABLE_ROWS = {
    "irb_fidelity": "IRB fidelity",
    "clifford_fidelity": "- Clifford fidelity",
    "qpt_fidelity": "QPT fidelity",
    "unitarity_bound": "- unitarity bound",
    "interferometric_bound": "- interferometric bound",
}


def _choi_permute(m: np.ndarray, d: int) -> np.ndarray:
    # Liouville <-> Choi are the same index swap (an involution)
    return m.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


@dataclass(frozen=True)
class Superoperator:
    """Column-stacked Liouville matrix of a channel on ``dim``-level states."""

    liouville: np.ndarray
    tp: bool = False
    cp: bool = False

    def __post_init__(self):
        L = np.array(self.liouville, dtype=complex)
        d = int(round(math.sqrt(L.shape[0])))
        if L.shape != (d * d, d * d):
            raise ValueError("Liouville matrix must be dim^2 x dim^2")
        L.setflags(write=False)
        object.__setattr__(self, "liouville", L)
        if self.tp and self.trace_deviation() > 1e-6:
            raise ValueError("flagged trace preserving but is not")
        if self.cp and self.min_choi_eigenvalue() < -1e-7:
            raise ValueError("flagged completely positive but is not")

    @property
    def dim(self) -> int:
        return int(round(math.sqrt(self.liouville.shape[0])))

    @classmethod
    def from_unitary(cls, U: np.ndarray) -> "Superoperator":
        return cls(np.kron(U.conj(), U), tp=True, cp=True)

    @classmethod
    def from_choi(cls, J: np.ndarray, **flags) -> "Superoperator":
        d = int(round(math.sqrt(J.shape[0])))
        return cls(_choi_permute(np.asarray(J), d), **flags)

    @classmethod
    def from_propagator(cls, prop: Propagator) -> "Superoperator":
        m = prop.computational()
        if prop.kind == "unitary":
            return cls(np.kron(m.conj(), m))
        return cls(m)

    @classmethod
    def depolarizing(cls, p: float, d: int = D) -> "Superoperator":
        """rho -> (1 - p) rho + p I/d."""
        vec_i = np.eye(d).reshape(-1, order="F")
        L = (1 - p) * np.eye(d * d) + p * np.outer(vec_i, vec_i) / d
        return cls(L, tp=True, cp=0 <= p <= d * d / (d * d - 1))

    def choi(self) -> np.ndarray:
        return _choi_permute(self.liouville, self.dim)

    def min_choi_eigenvalue(self) -> float:
        J = self.choi()
        return float(np.linalg.eigvalsh(0.5 * (J + J.conj().T)).min())

    def trace_deviation(self) -> float:
        d = self.dim
        vec_i = np.eye(d).reshape(-1, order="F")
        return float(np.abs(vec_i @ self.liouville - vec_i).max())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.liouville @ rho.reshape(-1, order="F")).reshape(d, d, order="F")

    def then(self, later: "Superoperator") -> "Superoperator":
        return Superoperator(later.liouville @ self.liouville)

    def kraus(self) -> tuple[np.ndarray, np.ndarray]:
        """Canonical Kraus operators, largest norm first, and their squared norms."""
        J = self.choi()
        w, v = np.linalg.eigh(0.5 * (J + J.conj().T))
        order = np.argsort(-w, kind="stable")
        d = self.dim
        ops = [math.sqrt(max(w[i], 0.0)) * v[:, i].reshape(d, d).T for i in order]
        return np.array(ops), w[order]


# ---------------------------------------------------------------------------
# fidelities

def average_gate_fidelity(E: Superoperator, U_target: np.ndarray) -> float:
    """(tr[(U* x U)^dag E] + d) / (d^2 + d)."""
    d = U_target.shape[0]
    if E.dim != d:
        raise ValueError("dimension mismatch between channel and target")
    ideal = np.kron(U_target.conj(), U_target)
    return float((np.trace(ideal.conj().T @ E.liouville).real + d) / (d * d + d))


@dataclass(frozen=True)
class UnitarityBounds:
    interferometric: float
    procrustean: float
    closest_unitary: np.ndarray
    kraus_tie: bool = False


def unitarity_bounds(E: Superoperator, tie_tol: float = 1e-9) -> UnitarityBounds:
    """Interferometric and Procrustean upper bounds on the gate fidelity.

    The interferometric bound uses the unitary factor of the leading
    canonical Kraus operator.  When the two largest Kraus weights tie, the
    eigenvector that is lexicographically first (after fixing its phase) is
    taken and the tie is reported.
    """
    d = E.dim
    ops, weights = E.kraus()
    tie = len(weights) > 1 and weights[1] >= weights[0] * (1 - tie_tol) and weights[0] > 0
    lead = ops[0]
    if tie:
        top = [k for k, w in zip(ops, weights) if w >= weights[0] * (1 - tie_tol)]
        canon = []
        for K in top:
            flat = K.reshape(-1)
            pivot = flat[int(np.argmax(np.abs(flat) > 1e-9))]
            canon.append(K * (abs(pivot) / pivot))
        lead = min(canon, key=lambda K: tuple(np.round(np.concatenate(
            [K.real.reshape(-1), K.imag.reshape(-1)]), 9)))
    U0, _ = polar(lead)
    inter = average_gate_fidelity(E, U0)
    sv = np.linalg.svd(E.liouville, compute_uv=False)
    proc = float((sv.sum() + d) / (d * d + d))
    return UnitarityBounds(inter, proc, U0, bool(tie))


# ---------------------------------------------------------------------------
# readout

@dataclass(frozen=True)
class ConfusionMatrix:
    """Joint assignment probabilities; rows are reported outcomes, columns true ones,
    both ordered 00, 01, 10, 11 (F bit first)."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.shape == (2, 2):
            raise ValueError("give a joint 4x4 matrix or use from_qubits")
        if M.shape != (4, 4) or np.any(M < -1e-12) or np.any(M > 1 + 1e-12):
            raise ValueError("confusion matrix must be 4x4 with entries in [0, 1]")
        if not np.allclose(M.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("confusion matrix columns must sum to 1")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def from_qubits(cls, q_F: np.ndarray, q_T: np.ndarray) -> "ConfusionMatrix":
        return cls(np.kron(np.asarray(q_F, float), np.asarray(q_T, float)))

    @classmethod
    def from_fidelities(cls, f_F: float, f_T: float) -> "ConfusionMatrix":
        """Symmetric per-qubit assignment errors."""
        def one(f):
            return np.array([[f, 1 - f], [1 - f, f]])
        return cls.from_qubits(one(f_F), one(f_T))

    @classmethod
    def perfect(cls) -> "ConfusionMatrix":
        return cls(np.eye(4))


# ---------------------------------------------------------------------------
# tomography settings

PREP_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "i": np.array([1, 1j], dtype=complex) / math.sqrt(2),
}
# basis change taking the +1 eigenstate of the measured Pauli to |0>
MEAS_ROTATIONS = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / math.sqrt(2),
}
OUTCOMES = ("00", "01", "10", "11")


def default_preparations() -> list[str]:
    return ["".join(p) for p in itertools.product(PREP_KETS, repeat=2)]


def default_measurements() -> list[str]:
    return ["".join(m) for m in itertools.product("XYZ", repeat=2)]


def _prep_state(label: str) -> np.ndarray:
    ket = np.kron(PREP_KETS[label[0]], PREP_KETS[label[1]])
    return np.outer(ket, ket.conj())


def _meas_rotation(label: str) -> np.ndarray:
    return np.kron(MEAS_ROTATIONS[label[0]], MEAS_ROTATIONS[label[1]])


def _projectors(label: str) -> np.ndarray:
    R = _meas_rotation(label)
    return np.array([R.conj().T @ np.diag(np.eye(4)[k]) @ R for k in range(4)])


def _check_informationally_complete(preps: Sequence[str], meas: Sequence[str]):
    if len(preps) * len(meas) < 36:
        raise ValueError("need at least 36 preparation x measurement settings")
    states = np.array([_prep_state(p).reshape(-1) for p in preps])
    effects = np.array([P.reshape(-1) for m in meas for P in _projectors(m)])
    if np.linalg.matrix_rank(states, tol=1e-9) < 16 or np.linalg.matrix_rank(effects, tol=1e-9) < 16:
        raise ValueError("preparations and measurements are not informationally complete")


@dataclass(frozen=True)
class CountRecord:
    setting_id: int
    prep_label: str
    meas_label: str
    outcome: str
    count: int


def write_counts(path, records: Iterable[CountRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["setting_id", "prep_label", "meas_label", "outcome", "count"])
        for r in records:
            w.writerow([r.setting_id, r.prep_label, r.meas_label, r.outcome, r.count])


def read_counts(path) -> list[CountRecord]:
    with open(path, newline="") as fh:
        return [CountRecord(int(r["setting_id"]), r["prep_label"], r["meas_label"],
                            r["outcome"], int(r["count"])) for r in csv.DictReader(fh)]


def _embed_local(U2: np.ndarray, levels: int) -> np.ndarray:
    out = np.eye(levels, dtype=complex)
    out[:2, :2] = U2
    return out


def _outcome_probabilities_full(prop: Propagator, prep: str, meas: str) -> np.ndarray:
    """Readout of a full-space propagator; a transmon found in |2> reports 1."""
    space = prop.space
    kF = np.zeros(space.levels_F, complex)
    kF[:2] = PREP_KETS[prep[0]]
    kT = np.zeros(space.levels_T, complex)
    kT[:2] = PREP_KETS[prep[1]]
    psi = np.kron(kF, kT)
    if prop.kind == "unitary":
        out = prop.matrix @ psi
        rho = np.outer(out, out.conj())
    else:
        d = space.dim
        rho = (prop.matrix @ np.outer(psi, psi.conj()).reshape(-1, order="F")).reshape(d, d, order="F")
    R = np.kron(_embed_local(MEAS_ROTATIONS[meas[0]], space.levels_F),
                _embed_local(MEAS_ROTATIONS[meas[1]], space.levels_T))
    pops = np.real(np.diag(R @ rho @ R.conj().T))
    probs = np.zeros(4)
    for f in range(space.levels_F):
        for t in range(space.levels_T):
            probs[2 * min(f, 1) + min(t, 1)] += pops[f * space.levels_T + t]
    return probs


def ideal_probabilities(channel: Superoperator | Propagator, prep: str, meas: str) -> np.ndarray:
    """Outcome probabilities (00, 01, 10, 11) before readout errors."""
    if isinstance(channel, Propagator):
        p = _outcome_probabilities_full(channel, prep, meas)
    else:
        rho = channel.apply(_prep_state(prep))
        p = np.array([np.trace(P @ rho).real for P in _projectors(meas)])
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def synthesize_tomography_data(channel: Superoperator | Propagator,
                               preparations: Sequence[str] | None = None,
                               measurements: Sequence[str] | None = None,
                               shots: int = 10_000,
                               confusion: ConfusionMatrix | None = None,
                               seed: int = 0) -> list[CountRecord]:
    """Multinomial counts for every (preparation, Pauli setting) pair.

    Each setting draws from its own stream seeded by (seed, setting index),
    so the data do not depend on evaluation order.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    preps = list(preparations or default_preparations())
    meas = list(measurements or default_measurements())
    _check_informationally_complete(preps, meas)
    C = (confusion or ConfusionMatrix.perfect()).matrix
    records = []
    for sid, (p, m) in enumerate(itertools.product(preps, meas)):
        probs = C @ ideal_probabilities(channel, p, m)
        probs = np.clip(probs, 0.0, None)
        rng = np.random.default_rng(np.random.SeedSequence([seed, sid]))
        counts = rng.multinomial(shots, probs / probs.sum())
        records.extend(CountRecord(sid, p, m, o, int(c)) for o, c in zip(OUTCOMES, counts))
    return records


# ---------------------------------------------------------------------------
# maximum likelihood

@dataclass(frozen=True)
class TomographyResult:
    channel: Superoperator
    log_likelihood: float
    iterations: int
    converged: bool


def _measurement_operators(records: Sequence[CountRecord], confusion: ConfusionMatrix | None):
    C = (confusion or ConfusionMatrix.perfect()).matrix
    settings: dict[int, tuple[str, str]] = {}
    counts: dict[tuple[int, str], int] = {}
    for r in records:
        settings[r.setting_id] = (r.prep_label, r.meas_label)
        counts[(r.setting_id, r.outcome)] = counts.get((r.setting_id, r.outcome), 0) + r.count
    preps = sorted({p for p, _ in settings.values()})
    meas = sorted({m for _, m in settings.values()})
    _check_informationally_complete(preps, meas)
    ops, n, groups = [], [], []
    for sid in sorted(settings):
        p, m = settings[sid]
        rho_t = _prep_state(p).T
        proj = _projectors(m)
        for oi, o in enumerate(OUTCOMES):
            effect = np.tensordot(C[oi], proj, axes=1)
            ops.append(np.kron(rho_t, effect))
            n.append(counts.get((sid, o), 0))
            groups.append(sid)
    return np.array(ops), np.array(n, dtype=float), np.array(groups)


def _partial_trace_out(J: np.ndarray, d: int) -> np.ndarray:
    return np.trace(J.reshape(d, d, d, d), axis1=1, axis2=3)


def _inv_sqrt(A: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (A + A.conj().T))
    return (v / np.sqrt(np.clip(w, 1e-300, None))) @ v.conj().T


def mle_process_tomography(records: Sequence[CountRecord], confusion: ConfusionMatrix | None = None,
                           constraints: Sequence[str] = ("CP", "TP"), max_iter: int = 20_000,
                           tol: float = 1e-10) -> TomographyResult:
    """Maximum-likelihood channel on the computational subspace.

    Readout errors enter through effective POVM elements, so the counts are
    never inverted.  The diluted iteration
    ``J <- L^-1/2 R J R L^-1/2`` keeps the Choi matrix positive and, with
    ``L = Tr_out(R J R)``, trace preserving; with CP only it is rescaled to
    trace d.  The best iterate is returned (flagged) when ``max_iter`` is hit.
    """
    cons = {c.upper() for c in constraints}
    if "CP" not in cons:
        raise ValueError("the CP constraint is always applied")
    M, n, _ = _measurement_operators(records, confusion)
    d = D
    J = np.eye(d * d, dtype=complex) / d
    eps = 1.0
    total = n.sum()

    def loglik(J):
        p = np.einsum("kij,ji->k", M, J).real
        return float(np.sum(n * np.log(np.clip(p, 1e-300, None)))), p

    ll, p = loglik(J)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        R = np.einsum("k,kij->ij", n / np.clip(p, 1e-300, None), M) / total * d
        R_eps = (np.eye(d * d) + eps * R) / (1 + eps)
        K = R_eps @ J @ R_eps
        if "TP" in cons:
            S = np.kron(_inv_sqrt(_partial_trace_out(K, d)), np.eye(d))
            J_new = S @ K @ S
        else:
            J_new = K * (d / np.trace(K).real)
        J_new = 0.5 * (J_new + J_new.conj().T)
        ll_new, p_new = loglik(J_new)
        if ll_new < ll - 1e-12 * abs(ll):
            eps *= 0.5
            if eps < 1e-8:
                break
            continue
        gain = ll_new - ll
        J, ll, p = J_new, ll_new, p_new
        if gain < tol * abs(ll):
            converged = True
            break
        eps = min(eps * 1.2, 50.0)
    if not converged:
        warnings.warn("tomography MLE did not converge; returning the best iterate")
    J = 0.5 * (J + J.conj().T)
    w, v = np.linalg.eigh(J)
    J = (v * np.clip(w, 0.0, None)) @ v.conj().T
    E = Superoperator.from_choi(J, cp=True, tp="TP" in cons)
    return TomographyResult(E, ll, it, converged)


# ---------------------------------------------------------------------------
# randomized benchmarking

class RBFitError(RuntimeError):
    def __init__(self, message: str, survivals: dict):
        super().__init__(message)
        self.survivals = survivals


@dataclass
class RBExperiment:
    lengths: list[int]
    sequences_per_length: int
    interleaved_gate: str | None
    survivals_ref: np.ndarray           # (len(lengths), sequences)
    survivals_int: np.ndarray
    p_ref: float = float("nan")
    p_int: float = float("nan")
    fit_ref: tuple = ()
    fit_int: tuple = ()
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if any(m <= 0 for m in self.lengths) or any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError("sequence lengths must be positive and increasing")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "length", "sequence_index", "survival"])
            for kind, data in (("reference", self.survivals_ref), ("interleaved", self.survivals_int)):
                for i, m in enumerate(self.lengths):
                    for j, s in enumerate(data[i]):
                        w.writerow([kind, m, j, f"{s:.10f}"])


@dataclass
class FidelityReport:
    qpt_fidelity: float | None = None
    irb_fidelity: float | None = None
    clifford_fidelity: float | None = None
    unitarity_bound: float | None = None
    interferometric_bound: float | None = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        for k in TABLE_ROWS:
            v = getattr(self, k)
            if v is not None and not (-1e-9 <= v <= 1 + 1e-9):
                raise ValueError(f"{k} must lie in [0, 1]")

    def table_rows(self) -> dict:
        return {label: getattr(self, key) for key, label in TABLE_ROWS.items()}

    def to_json(self, path, extra: dict | None = None) -> None:
        payload = {"table": self.table_rows(), "notes": self.notes}
        if extra:
            payload.update(extra)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def decay(m, A, p, B):
    return A * p ** m + B


def fit_decay(lengths: Sequence[int], survivals: np.ndarray) -> tuple[float, float, float]:
    """Fit mean survival to A p^m + B with 0 <= p <= 1."""
    m = np.asarray(lengths, float)
    y = np.asarray(survivals, float).mean(axis=1)
    if np.ptp(y) < 1e-12:
        if y.mean() > 0.5:
            return float(y.mean() - 0.25), 1.0, 0.25
        raise RBFitError("survival does not decay", {"mean": y.tolist()})
    guess_p = max(min((y[-1] - 0.25) / max(y[0] - 0.25, 1e-9), 1.0), 1e-3) ** (1 / (m[-1] - m[0]))
    try:
        popt, _ = curve_fit(decay, m, y, p0=[max(y[0] - 0.25, 1e-3), guess_p, 0.25],
                            bounds=([0, 0, 0], [1, 1, 1]), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise RBFitError(f"decay fit failed: {exc}", {"mean": y.tolist()}) from exc
    return tuple(float(x) for x in popt)


def gate_superoperator(device: DeviceParams, noise: NoiseModel | None, recipe: GateRecipe,
                       tol: float = 1e-6) -> Superoperator:
    """Frame-corrected computational-subspace channel of a calibrated gate."""
    space = HilbertSpace.for_device(device)
    prop = pulse_propagator(device, recipe.pulse, noise, tol, space)
    E = Superoperator.from_propagator(prop)
    c = recipe.phase_ledger.correction()
    return Superoperator(np.kron(c.conj(), c)[:, None] * E.liouville)


class _SequenceSimulator:
    def __init__(self, native: str, gate: np.ndarray, interleaved: np.ndarray):
        self.native = native
        self.gate = gate
        self.interleaved = interleaved
        self.cache: dict[int, np.ndarray] = {}

    def clifford(self, idx: int) -> np.ndarray:
        if idx not in self.cache:
            seq = compile_clifford(idx, self.native)
            layer = seq.layers[0]
            superop = np.kron(layer.conj(), layer)
            for layer in seq.layers[1:]:
                superop = np.kron(layer.conj(), layer) @ self.gate @ superop
            self.cache[idx] = superop
        return self.cache[idx]


def _run_sequence(args):
    native, gate, interleaved, target, length, seed, task, shots = args
    sim = _SIM.get((native, gate.tobytes(), interleaved.tobytes()))
    if sim is None:
        sim = _SequenceSimulator(native, gate, interleaved)
        _SIM.clear()
        _SIM[(native, gate.tobytes(), interleaved.tobytes())] = sim
    group = clifford_group()
    rng = np.random.default_rng(np.random.SeedSequence([seed, task]))
    idx = group.sample(rng, length)
    out = []
    for with_gate in (False, True):
        S = np.eye(16, dtype=complex)
        U = np.eye(4, dtype=complex)
        for i in idx:
            S = sim.clifford(int(i)) @ S
            U = group.elements[int(i)].unitary @ U
            if with_gate:
                S = interleaved @ S
                U = target @ U
        rec = group.inverse_index(U)
        S = sim.clifford(rec) @ S
        p = float(np.clip(S[0, 0].real, 0.0, 1.0))
        if shots:
            p = rng.binomial(shots, p) / shots
        out.append(p)
    return out


_SIM: dict = {}


def run_irb(device: DeviceParams | None, noise: NoiseModel | None, recipe: GateRecipe | None,
            lengths: Sequence[int] = (2, 4, 6, 8, 16, 24, 32, 48), sequences_per_length: int = 30,
            shots: int | None = 1000, seed: int = 0, workers: int = 1,
            gate: Superoperator | None = None, native: str | None = None,
            inject_depolarizing: float = 0.0) -> tuple[RBExperiment, FidelityReport]:
    """Reference and interleaved randomized benchmarking of a calibrated gate.

    Cliffords are compiled into ideal local layers and the native gate,
    whose channel is simulated from ``recipe`` unless ``gate`` is given.
    ``inject_depolarizing`` adds a depolarizing channel with that average
    gate infidelity after each interleaved gate only.  Each sequence draws
    from a stream seeded by (seed, sequence index); reference and
    interleaved sequences share their random Cliffords.
    """
    if recipe is None and (gate is None or native is None):
        raise ValueError("give a recipe or both gate and native")
    native = native or ("iswap" if recipe.gate_kind == "iswap" else "cz")
    target = ideal_gate(native)
    if gate is None:
        gate = gate_superoperator(device, noise, recipe)
    int_gate = gate.liouville
    if inject_depolarizing:
        lam = inject_depolarizing * D / (D - 1)
        int_gate = Superoperator.depolarizing(lam).liouville @ int_gate
    lengths = list(lengths)
    tasks = [(native, gate.liouville, int_gate, target, m, seed, i * sequences_per_length + j, shots)
             for i, m in enumerate(lengths) for j in range(sequences_per_length)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_sequence, tasks, chunksize=8))
    else:
        results = [_run_sequence(t) for t in tasks]
    res = np.array(results).reshape(len(lengths), sequences_per_length, 2)
    exp = RBExperiment(lengths, sequences_per_length, native, res[..., 0], res[..., 1])
    exp.fit_ref = fit_decay(lengths, exp.survivals_ref)
    exp.fit_int = fit_decay(lengths, exp.survivals_int)
    exp.p_ref, exp.p_int = exp.fit_ref[1], exp.fit_int[1]
    leak = 1 - gate.liouville[0, 0].real - gate.liouville[5, 0].real - gate.liouville[10, 0].real \
        - gate.liouville[15, 0].real
    if leak > 1e-6:
        exp.notes.append(f"leakage out of the computational subspace treated as loss ({leak:.2e} from |00>)")
    r_int = (D - 1) * (1 - exp.p_int / exp.p_ref) / D if exp.p_ref > 0 else 1.0
    r_ref = (D - 1) * (1 - exp.p_ref) / D
    report = FidelityReport(irb_fidelity=float(np.clip(1 - r_int, 0, 1)),
                            clifford_fidelity=float(np.clip(1 - r_ref, 0, 1)), notes=list(exp.notes))
    return exp, report


def characterize_channel(E_true: Superoperator | Propagator, target: np.ndarray, shots: int,
                         confusion: ConfusionMatrix | None, seed: int,
                         compensate: bool = True) -> tuple[TomographyResult, FidelityReport]:
    """Tomography data, MLE reconstruction and the QPT rows of the report."""
    records = synthesize_tomography_data(E_true, shots=shots, confusion=confusion, seed=seed)
    result = mle_process_tomography(records, confusion if compensate else None)
    bounds = unitarity_bounds(result.channel)
    report = FidelityReport(qpt_fidelity=average_gate_fidelity(result.channel, target),
                            unitarity_bound=bounds.procrustean,
                            interferometric_bound=bounds.interferometric)
    if bounds.kraus_tie:
        report.notes.append("leading Kraus weight degenerate; lexicographic tie-break used")
    if not result.converged:
        report.notes.append("MLE hit the iteration limit")
    return result, report
