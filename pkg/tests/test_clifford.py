import numpy as np
import pytest

from paramgate.clifford import (
    CNOT,
    CZ,
    ISWAP,
    SWAP,
    clifford_group,
    compile_clifford,
    native_cores,
    phase_key,
    single_qubit_cliffords,
)


@pytest.fixture(scope="module")
def group():
    return clifford_group()


def test_single_qubit_group_size():
    assert len(single_qubit_cliffords()) == 24


def test_two_qubit_group_size(group):
    assert len(group) == 11520
    keys = {phase_key(el.unitary) for el in group.elements}
    assert len(keys) == 11520


def test_elements_are_unitary(group):
    rng = np.random.default_rng(3)
    for i in rng.integers(0, len(group), 200):
        U = group.elements[i].unitary
        assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-12)


def test_phase_key_ignores_global_phase():
    assert phase_key(ISWAP) == phase_key(np.exp(0.7j) * ISWAP)


def test_closure_random_walk(group):
    # Clifford group closure: 1000 products never leave the table
    rng = np.random.default_rng(11)
    U = np.eye(4, dtype=complex)
    for i in group.sample(rng, 1000):
        U = group.elements[int(i)].unitary @ U
        assert group.contains(U)


def test_entangling_gates_are_members(group):
    for U in (CNOT, CZ, ISWAP, SWAP):
        assert group.contains(U)


def test_non_clifford_rejected(group):
    T = np.diag([1, 1, 1, np.exp(1j * np.pi / 4)])
    assert not group.contains(T)
    with pytest.raises(KeyError):
        group.index_of(T)


def test_inverse(group):
    rng = np.random.default_rng(5)
    for i in rng.integers(0, len(group), 50):
        U = group.elements[int(i)].unitary
        V = group.elements[group.inverse_index(U)].unitary
        assert group.index_of(V @ U) == group.index_of(np.eye(4))


@pytest.mark.parametrize("native, gate", [("iswap", ISWAP), ("cz", CZ)])
def test_compilation_reproduces_elements(group, native, gate):
    rng = np.random.default_rng(7)
    for i in rng.integers(0, len(group), 150):
        seq = compile_clifford(int(i), native)
        assert phase_key(seq.unitary(gate)) == phase_key(group.elements[int(i)].unitary)


@pytest.mark.parametrize("native, counts", [
    ("iswap", {"single_qubit": 0, "cnot_like": 2, "iswap_like": 1, "swap_like": 3}),
    ("cz", {"single_qubit": 0, "cnot_like": 1, "iswap_like": 2, "swap_like": 3}),
])
def test_native_gate_counts(native, counts):
    cores = native_cores(native)
    assert {k: v.n_native for k, v in cores.items()} == counts


def test_uniform_sampling_covers_classes(group):
    rng = np.random.default_rng(0)
    names = [group.elements[int(i)].class_name for i in group.sample(rng, 20000)]
    frac = {k: names.count(k) / len(names) for k in set(names)}
    # class sizes 576, 5184, 5184, 576 out of 11520
    assert frac["single_qubit"] == pytest.approx(0.05, abs=0.01)
    assert frac["cnot_like"] == pytest.approx(0.45, abs=0.02)
