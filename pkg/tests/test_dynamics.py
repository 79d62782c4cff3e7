import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from paramgate.calibration import find_resonance, predict_resonances
from paramgate.device import FluxPulse, mhz
from paramgate.dynamics import (
    Idle,
    LocalGate,
    NoiseModel,
    Propagator,
    PulseCache,
    PulseSchedule,
    QuantumState,
    evolve_state,
    evolve_trajectory,
    propagator_over,
    pulse_propagator,
    pulse_propagators,
    write_timeseries,
)
from paramgate.hamiltonian import HilbertSpace, TimeDependentHamiltonian, build_duffing_hamiltonian
from paramgate.integrate import IntegrationError, dopri5


@pytest.fixture(scope="module")
def space(device):
    return HilbertSpace.for_device(device)


@pytest.fixture(scope="module")
def noise(device):
    return NoiseModel.from_device(device)


class TestQuantumState:
    def test_rejects_unnormalised(self):
        with pytest.raises(ValueError):
            QuantumState("pure_vector", np.array([1.0, 1.0]))

    def test_rejects_negative_density(self):
        with pytest.raises(ValueError):
            QuantumState("density_matrix", np.diag([1.5, -0.5]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            QuantumState("density_matrix", np.array([[0.5, 0.5], [0.0, 0.5]]))

    def test_basis_populations(self, space):
        s = QuantumState.basis(space, "10", density=True)
        assert s.populations()[space.index("10")] == 1.0

    def test_fidelity_pure_and_mixed(self, space):
        a = QuantumState.basis(space, "01")
        b = QuantumState.basis(space, "01", density=True)
        assert a.fidelity(b) == pytest.approx(1.0)
        assert a.fidelity(QuantumState.basis(space, "10")) == 0.0


class TestNoiseModel:
    def test_t2_limit(self):
        with pytest.raises(ValueError):
            NoiseModel(10e-6, 10e-6, 25e-6, 10e-6)

    def test_positive_times(self):
        with pytest.raises(ValueError):
            NoiseModel(0.0, 10e-6, 5e-6, 5e-6)

    def test_dephasing_rate(self, space):
        nm = NoiseModel(10e-6, 10e-6, 10e-6, 10e-6)
        ops = nm.collapse_ops(space)
        # 1/T_phi = 1/T2 - 1/(2 T1) = 0.5e5, collapse amplitude sqrt(2/T_phi)
        n_op = ops[2]
        assert n_op[space.index("10"), space.index("10")].real == pytest.approx(math.sqrt(2 * 0.5e5))

    def test_driven_override(self, space):
        nm = NoiseModel(10e-6, 10e-6, 10e-6, 10e-6, T2_T_driven=4e-6)
        idle = nm.collapse_ops(space, driven=False)[-1]
        driven = nm.collapse_ops(space, driven=True)[-1]
        assert np.abs(driven).max() > np.abs(idle).max()

    def test_gate_row_uses_geometric_mean(self, device, gate_table):
        nm = NoiseModel.for_gate(device, gate_table["iswap"])
        assert nm.T1_T == pytest.approx(math.sqrt(5 * 25) * 1e-6)
        assert nm.T2_T_driven == pytest.approx(4.6e-6)


class TestClosedEvolution:
    def test_stationary_state(self, device, space):
        H = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.0, mhz(100)))
        w, v = np.linalg.eigh(H.static_part)
        psi = QuantumState("pure_vector", v[:, 4])
        tol = 1e-8
        out = evolve_state(H, psi, (0.0, 500e-9), tol=tol)
        norm = np.linalg.norm(out.data)
        assert abs(norm - 1) < 10 * tol
        assert out.fidelity(psi) / norm ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_matches_matrix_exponential(self, device, space):
        H = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.0, mhz(100)))
        U = propagator_over(H, (0.0, 80e-9), tol=1e-10).matrix
        assert np.abs(U - expm(-1j * H.static_part * 80e-9)).max() < 1e-8

    def test_zero_hamiltonian_gives_identity(self, space):
        H = TimeDependentHamiltonian(space, np.zeros((9, 9)))
        U = propagator_over(H, (0.0, 1e-6)).matrix
        assert np.allclose(U, np.eye(9), atol=1e-12)

    def test_resonant_iswap_transfer(self, device, space):
        # oracle: two-level Rabi formula, full transfer at tau = pi / (2 g_eff)
        pred = predict_resonances(device, 0.317, (1,), ("iswap",))[0]
        g = abs(pred.g_eff)
        wp = find_resonance(device, "iswap", 0.317, pred.omega_p_star, g)
        tau = math.pi / (2 * g)
        H = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.317, wp, 0.0, tau, 0.0))
        out = evolve_state(H, QuantumState.basis(space, "10"), (0.0, tau), tol=1e-8)
        assert out.populations()[space.index("01")] >= 0.99

    def test_tolerance_range(self, space):
        H = TimeDependentHamiltonian(space, np.zeros((9, 9)))
        with pytest.raises(ValueError):
            evolve_state(H, QuantumState.basis(space, "00"), (0.0, 1e-9), tol=1e-2)

    def test_trajectory_samples(self, device, space, tmp_path):
        pulse = FluxPulse(0.0, 0.3, mhz(120), 0.0, 100e-9, 20e-9)
        H = build_duffing_hamiltonian(device, space, pulse)
        times, states = evolve_trajectory(H, QuantumState.basis(space, "10"), (0.0, 100e-9),
                                          np.linspace(0, 100e-9, 11))
        assert len(states) == 11
        path = tmp_path / "trace.csv"
        write_timeseries(path, times, states, space, coherences=[("10", "01")])
        lines = path.read_text().splitlines()
        assert lines[0].startswith("t_ns,P_00")
        assert len(lines) == 12


class TestOpenEvolution:
    def test_t1_decay(self, space):
        nm = NoiseModel(10e-6, 10e-6, 20e-6, 20e-6)
        H = TimeDependentHamiltonian(space, np.zeros((9, 9)))
        out = evolve_state(H, QuantumState.basis(space, "10"), (0.0, nm.T1_F), noise=nm)
        excited = out.populations()[space.index("10")]
        assert excited == pytest.approx(math.exp(-1), rel=0.01)

    def test_superoperator_is_trace_preserving(self, device, space, noise):
        pulse = FluxPulse(0.0, 0.3, mhz(120), 0.0, 100e-9, 20e-9)
        prop = propagator_over(build_duffing_hamiltonian(device, space, pulse), (0.0, 100e-9),
                               noise=noise, tol=1e-7)
        vec_i = np.eye(9).reshape(-1, order="F")
        assert np.abs(vec_i @ prop.matrix - vec_i).max() < 1e-8

    def test_choi_positive(self, device, space, noise):
        pulse = FluxPulse(0.0, 0.3, mhz(120), 0.0, 100e-9, 20e-9)
        prop = propagator_over(build_duffing_hamiltonian(device, space, pulse), (0.0, 100e-9),
                               noise=noise, tol=1e-7)
        J = prop.matrix.reshape(9, 9, 9, 9).transpose(3, 1, 2, 0).reshape(81, 81)
        assert np.linalg.eigvalsh(0.5 * (J + J.conj().T)).min() > -1e-7

    def test_matches_state_evolution(self, device, space, noise):
        pulse = FluxPulse(0.0, 0.3, mhz(120), 0.0, 60e-9, 20e-9)
        H = build_duffing_hamiltonian(device, space, pulse)
        rho0 = QuantumState.basis(space, "10", density=True)
        direct = evolve_state(H, rho0, (0.0, 60e-9), noise=noise, tol=1e-9)
        via_prop = propagator_over(H, (0.0, 60e-9), noise=noise, tol=1e-9).apply(rho0)
        assert np.abs(direct.data - via_prop.data).max() < 1e-7


class TestPulsePropagators:
    def test_periodic_reuse_matches_direct(self, device, space):
        pulse = FluxPulse(0.0, 0.317, mhz(122), 0.3, 150e-9, 40e-9)
        direct = propagator_over(build_duffing_hamiltonian(device, space, pulse),
                                 (0.0, pulse.duration), tol=1e-9)
        fast = pulse_propagator(device, pulse, tol=1e-9, space=space)
        slow = direct.in_frame(fast.frame)
        assert np.abs(fast.matrix - slow.matrix).max() < 1e-6

    def test_cache_reuse_is_exact(self, device, space):
        pulse = FluxPulse(0.0, 0.317, mhz(122), 0.0, 150e-9, 40e-9)
        cache = PulseCache()
        first = pulse_propagators(device, pulse, [120e-9, 150e-9], tol=1e-8, cache=cache)
        second = pulse_propagators(device, pulse, [150e-9, 120e-9], tol=1e-8, cache=cache)
        assert np.array_equal(first[1].matrix, second[0].matrix)

    def test_duration_must_cover_edges(self, device):
        pulse = FluxPulse(0.0, 0.3, mhz(122), 0.0, 150e-9, 40e-9)
        with pytest.raises(ValueError):
            pulse_propagators(device, pulse, [60e-9])

    def test_frame_conversion_round_trip(self, device, space):
        pulse = FluxPulse(0.0, 0.3, mhz(122), 0.0, 90e-9, 20e-9)
        prop = pulse_propagator(device, pulse, tol=1e-8, space=space)
        back = prop.in_frame((0.0, 0.0)).in_frame(prop.frame)
        assert np.allclose(back.matrix, prop.matrix, atol=1e-12)

    def test_compose_sums_durations(self, device, space):
        pulse = FluxPulse(0.0, 0.3, mhz(122), 0.0, 90e-9, 20e-9)
        prop = pulse_propagator(device, pulse, tol=1e-8, space=space)
        twice = prop.compose(Propagator(prop.matrix, "unitary", space, 90e-9, 180e-9, prop.frame))
        assert twice.t1 == pytest.approx(180e-9)
        assert np.allclose(twice.matrix, prop.matrix @ prop.matrix)


class TestSchedule:
    def test_durations(self):
        sched = PulseSchedule((Idle(10e-9), LocalGate("F", math.pi), FluxPulse(0.0, 0.3, 1e9, duration=50e-9)))
        assert sched.total_duration == pytest.approx(60e-9)
        assert sched.start_times() == [0.0, 10e-9, 10e-9]

    def test_negative_idle(self):
        with pytest.raises(ValueError):
            Idle(-1e-9)

    def test_frame_phases_fold_into_gates(self):
        sched = PulseSchedule((LocalGate("T", math.pi / 2, 0.1),), frame_phases=(0.0, 0.5))
        assert sched.resolved()[0].phase == pytest.approx(0.6)

    def test_rejects_unknown_entries(self):
        with pytest.raises(TypeError):
            PulseSchedule(("X",))


class TestIntegrator:
    def test_harmonic_oscillator(self):
        sol = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, 10.0, np.array([1.0, 0.0]),
                     rtol=1e-10, atol=1e-12)
        assert sol.y[0] == pytest.approx(math.cos(10.0), abs=1e-8)

    def test_dense_output(self):
        sol = dopri5(lambda t, y: -y, 0.0, 2.0, np.array([1.0]), rtol=1e-10, atol=1e-12,
                     t_eval=[0.5, 1.0, 1.5])
        assert np.allclose([s[0] for s in sol.samples], np.exp(-np.array([0.5, 1.0, 1.5])), atol=1e-8)

    def test_underflow_reported(self):
        with pytest.raises(IntegrationError):
            dopri5(lambda t, y: np.array([1.0 / (1.0 - t) ** 3]), 0.0, 1.0, np.array([0.0]),
                   rtol=1e-10, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.4), st.floats(60.0, 400.0), st.floats(0.0, 6.28),
       st.floats(20e-9, 80e-9), st.sampled_from(["10", "11", "01"]))
def test_norm_conserved(device, space, amp, f_p, theta, duration, label):
    pulse = FluxPulse(0.0, amp, mhz(f_p), theta, duration, 0.25 * duration)
    H = build_duffing_hamiltonian(device, space, pulse)
    tol = 1e-8
    out = evolve_state(H, QuantumState.basis(space, label), (0.0, duration), tol=tol)
    assert abs(np.linalg.norm(out.data) - 1) < 10 * tol


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 0.4), st.floats(60.0, 400.0), st.floats(20e-9, 60e-9))
def test_trace_and_positivity_conserved(device, space, noise, amp, f_p, duration):
    pulse = FluxPulse(0.0, amp, mhz(f_p), 0.0, duration, 0.25 * duration)
    H = build_duffing_hamiltonian(device, space, pulse)
    tol = 1e-8
    out = evolve_state(H, QuantumState.basis(space, "11", density=True), (0.0, duration),
                       noise=noise, tol=tol)
    assert abs(np.trace(out.data).real - 1) < 10 * tol
    assert np.linalg.eigvalsh(out.data).min() > -1e-7
