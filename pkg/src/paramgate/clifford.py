"""Two-qubit Clifford group and its compilation into a native entangling gate.

The 11520 elements are enumerated once through the usual class structure:
a layer of single-qubit Cliffords followed by an identity, CNOT-like,
iSWAP-like or SWAP-like core.  Every element is therefore listed exactly
once, so drawing a uniform table index samples the group uniformly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

I2 = np.eye(2, dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j])
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])

CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

CLASS_NAMES = ("single_qubit", "cnot_like", "iswap_like", "swap_like")


def phase_key(U: np.ndarray, decimals: int = 6) -> bytes:
    """Hashable key of ``U`` that ignores its global phase."""
    flat = np.asarray(U, dtype=complex).reshape(-1)
    pivot = flat[int(np.argmax(np.abs(flat) > 1e-6))]
    V = flat * (abs(pivot) / pivot)
    V = np.round(V, decimals) + 0.0  # drop negative zeros
    return V.tobytes()


@lru_cache(maxsize=None)
def single_qubit_cliffords() -> tuple[np.ndarray, ...]:
    """The 24 single-qubit Cliffords, found by breadth-first search over H and S."""
    found = {phase_key(I2): I2}
    frontier = [I2]
    while frontier:
        nxt = []
        for U in frontier:
            for g in (H, S):
                V = g @ U
                k = phase_key(V)
                if k not in found:
                    found[k] = V
                    nxt.append(V)
        frontier = nxt
    if len(found) != 24:
        raise AssertionError("single-qubit Clifford enumeration failed")
    return tuple(found.values())


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    n = axis / np.linalg.norm(axis)
    gen = n[0] * X + n[1] * Y + n[2] * Z
    return math.cos(angle / 2) * I2 - 1j * math.sin(angle / 2) * gen


def _s1_layer() -> tuple[np.ndarray, ...]:
    # identity and the two 120-degree rotations about (1,1,1): they cycle X->Y->Z
    axis = np.array([1.0, 1.0, 1.0])
    return (I2, _rot(axis, 2 * math.pi / 3), _rot(axis, 4 * math.pi / 3))


@dataclass(frozen=True)
class CliffordElement:
    index: int
    class_name: str
    left: tuple[int, int]       # single-qubit Clifford indices applied last (F, T)
    right: tuple[int, int]      # S1 layer indices applied first (F, T)
    unitary: np.ndarray


class CliffordGroup:
    """Table of the two-qubit Clifford group with a phase-insensitive lookup."""

    def __init__(self):
        c1 = single_qubit_cliffords()
        s1 = _s1_layer()
        locals_ = [np.kron(a, b) for a, b in itertools.product(c1, c1)]
        self.c1 = c1
        self.local_layers = locals_
        right_layers = [np.kron(a, b) for a, b in itertools.product(s1, s1)]
        cores = {"single_qubit": (np.eye(4, dtype=complex), [np.eye(4, dtype=complex)]),
                 "cnot_like": (CNOT, right_layers),
                 "iswap_like": (ISWAP, right_layers),
                 "swap_like": (SWAP, [np.eye(4, dtype=complex)])}
        self.elements: list[CliffordElement] = []
        self._lookup: dict[bytes, int] = {}
        for name in CLASS_NAMES:
            core, rights = cores[name]
            for ri, R in enumerate(rights):
                base = core @ R
                for li, L in enumerate(locals_):
                    U = L @ base
                    k = phase_key(U)
                    if k in self._lookup:
                        raise AssertionError("duplicate Clifford in class enumeration")
                    idx = len(self.elements)
                    self._lookup[k] = idx
                    self.elements.append(CliffordElement(
                        idx, name, divmod(li, 24), divmod(ri, 3), U))
        self._local_lookup = {phase_key(L): i for i, L in enumerate(locals_)}

    def __len__(self) -> int:
        return len(self.elements)

    def index_of(self, U: np.ndarray) -> int:
        """Table index of a Clifford unitary; raises KeyError if ``U`` is not one."""
        return self._lookup[phase_key(U)]

    def contains(self, U: np.ndarray) -> bool:
        return phase_key(U) in self._lookup

    def local_index(self, U: np.ndarray) -> int | None:
        return self._local_lookup.get(phase_key(U))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, len(self.elements), size=size)

    def inverse_index(self, U: np.ndarray) -> int:
        return self.index_of(U.conj().T)


@lru_cache(maxsize=None)
def clifford_group() -> CliffordGroup:
    return CliffordGroup()


# ---------------------------------------------------------------------------
# native compilation

@dataclass(frozen=True)
class NativeSequence:
    """``layers[0] G layers[1] G ... G layers[k]`` in time order; ``layers`` are
    ideal two-qubit local unitaries and G the native entangling gate."""

    layers: tuple[np.ndarray, ...]

    @property
    def n_native(self) -> int:
        return len(self.layers) - 1

    def unitary(self, gate: np.ndarray) -> np.ndarray:
        U = self.layers[0]
        for L in self.layers[1:]:
            U = L @ gate @ U
        return U


def _same_up_to_phase(A: np.ndarray, B: np.ndarray) -> bool:
    return phase_key(A) == phase_key(B)


def _compile_core(target: np.ndarray, gate: np.ndarray, group: CliffordGroup,
                  max_gates: int = 2) -> NativeSequence:
    """Search the local layers of ``target = A G B`` or ``A G B G C``."""
    locals_ = group.local_layers
    eye = np.eye(4, dtype=complex)
    if _same_up_to_phase(target, gate):
        return NativeSequence((eye, eye))
    for B in locals_:
        M = gate @ B
        A = target @ M.conj().T
        if group.local_index(A) is not None:
            return NativeSequence((B, A))
    if max_gates >= 2:
        for C in locals_:
            GC = gate @ C
            for B in locals_:
                M = gate @ B @ GC
                A = target @ M.conj().T
                if group.local_index(A) is not None:
                    return NativeSequence((C, B, A))
    raise ValueError("no compilation found with the allowed number of native gates")


def _concat(first: NativeSequence, second: NativeSequence, between: np.ndarray) -> NativeSequence:
    layers = list(first.layers[:-1]) + [second.layers[0] @ between @ first.layers[-1]]
    return NativeSequence(tuple(layers + list(second.layers[1:])))


@lru_cache(maxsize=None)
def native_cores(native: str) -> dict[str, NativeSequence]:
    """Compilations of the CNOT, iSWAP and SWAP cores for a native ``iswap`` or ``cz``."""
    gate = {"iswap": ISWAP, "cz": CZ}[native]
    group = clifford_group()
    cnot = _compile_core(CNOT, gate, group)
    iswap = _compile_core(ISWAP, gate, group)
    cz = _compile_core(CZ, gate, group)
    # SWAP = iSWAP (S^dag x S^dag) CZ: the CZ acts first
    sdag = np.kron(S.conj().T, S.conj().T)
    swap = _concat(cz, iswap, sdag)
    if not _same_up_to_phase(swap.unitary(gate), SWAP):
        raise AssertionError("SWAP assembly failed")
    return {"single_qubit": NativeSequence((np.eye(4, dtype=complex),)),
            "cnot_like": cnot, "iswap_like": iswap, "swap_like": swap}


def compile_clifford(index: int, native: str) -> NativeSequence:
    """Native-gate sequence of group element ``index``."""
    group = clifford_group()
    el = group.elements[index]
    core = native_cores(native)[el.class_name]
    if el.class_name in ("cnot_like", "iswap_like"):
        s1 = _s1_layer()
        right = np.kron(s1[el.right[0]], s1[el.right[1]])
    else:
        right = np.eye(4, dtype=complex)
    left = group.local_layers[24 * el.left[0] + el.left[1]]
    layers = list(core.layers)
    layers[0] = layers[0] @ right
    layers[-1] = left @ layers[-1]
    return NativeSequence(tuple(layers))
