import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from paramgate.bessel import bessel_j_all, bessel_jn, j1_maximum
from paramgate.calibration import floquet_transfer, predict_resonances
from paramgate.device import FluxPulse, band_frequency, mhz, modulated_frequency
from paramgate.dynamics import QuantumState, evolve_trajectory, pulse_propagators
from paramgate.hamiltonian import (
    HilbertSpace,
    build_duffing_hamiltonian,
    coupling_phase,
    effective_coupling,
    export_matrix,
    import_matrix,
    rwa_effective_hamiltonian,
)

TRANSFER = {"iswap": ("10", "01"), "cz02": ("11", "02"), "cz20": ("11", "20")}
OPERATING = {"iswap": 0.317, "cz02": 0.245, "cz20": 0.280}


@pytest.fixture(scope="module")
def space(device):
    return HilbertSpace.for_device(device)


def hermitian_error(m):
    return np.linalg.norm(m - m.conj().T) / max(np.linalg.norm(m), 1.0)


class TestBessel:
    @given(st.integers(0, 6), st.floats(-30.0, 30.0))
    def test_matches_scipy(self, n, x):
        assert bessel_jn(n, x) == pytest.approx(jv(n, x), abs=1e-12)

    @given(st.integers(-5, -1), st.floats(0.0, 10.0))
    def test_negative_orders(self, n, x):
        assert bessel_jn(n, x) == pytest.approx(jv(n, x), abs=1e-12)

    @given(st.floats(0.0, 20.0))
    def test_sum_rule(self, x):
        values = bessel_j_all(60, x)
        total = values[0] ** 2 + 2 * np.sum(values[1:] ** 2)
        assert abs(total - 1.0) < 1e-9

    def test_first_maximum_of_j1(self):
        x, value = j1_maximum()
        assert x == pytest.approx(1.8412, abs=1e-3)
        assert value == pytest.approx(0.582, abs=1e-3)

    def test_zero_argument(self):
        assert bessel_jn(0, 0.0) == 1.0
        assert bessel_jn(1, 0.0) == 0.0


class TestHilbertSpace:
    def test_ordering_tunable_fastest(self, space):
        assert space.index("01") == 1
        assert space.index("10") == 3
        assert space.dim == 9

    def test_needs_three_levels(self):
        with pytest.raises(ValueError):
            HilbertSpace(2, 3)

    def test_label_outside_space(self, space):
        with pytest.raises(ValueError):
            space.index("30")


class TestDuffing:
    def test_static_at_zero_amplitude(self, device, space):
        H = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.0, mhz(100), duration=1e-7))
        assert H.is_static

    def test_bare_energies_add(self, device, space):
        H = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.0, mhz(100)), frame="lab")
        h = H.static_part
        gap = h[space.index("11"), space.index("11")] - h[space.index("00"), space.index("00")]
        expected = device.fixed.omega_F + band_frequency(device.tunable, 0.0)
        assert gap.real == pytest.approx(expected, rel=1e-12)

    def test_single_excitation_gap_near_detuning(self, device, space):
        H = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.0, mhz(100)), frame="lab")
        w = np.linalg.eigvalsh(H.static_part)
        # the 1-excitation manifold is the pair of eigenvalues 2 and 3 (0-based 1 and 2)
        gap = w[2] - w[1]
        detuning = band_frequency(device.tunable, 0.0) - device.fixed.omega_F
        assert gap == pytest.approx(detuning, rel=1e-3)

    def test_level_mismatch(self, device):
        with pytest.raises(ValueError):
            build_duffing_hamiltonian(device, HilbertSpace(4, 4), FluxPulse(0.0, 0.1, mhz(100)))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.0, 0.45), st.floats(50.0, 400.0), st.floats(0.0, 2 * math.pi),
           st.floats(0.0, 300e-9), st.booleans())
    def test_hermitian(self, device, space, amp, f_p, theta, t, counter_rotating):
        pulse = FluxPulse(0.0, amp, mhz(f_p), theta, 300e-9, 30e-9)
        H = build_duffing_hamiltonian(device, space, pulse, counter_rotating=counter_rotating,
                                      anharmonicity_mode="interpolated")
        assert hermitian_error(H(t)) < 1e-12

    def test_waveform_matches_fourier_reconstruction(self, device, space):
        pulse = FluxPulse(0.0, 0.317, mhz(122), 0.0, 100e-9, 0.0)
        H = build_duffing_hamiltonian(device, space, pulse)
        t = np.linspace(1e-12, pulse.duration - 1e-12, 2000)
        base = band_frequency(device.tunable, 0.0)
        wave = base + np.array([H.drive_terms[0][1](x) for x in t])
        direct = band_frequency(device.tunable, pulse.amp * np.cos(pulse.omega_p * t))
        rebuilt = modulated_frequency(device.tunable, pulse).reconstruct(pulse.omega_p * t)
        assert np.max(np.abs(wave - direct)) < 1e-3
        assert np.sqrt(np.mean((wave - rebuilt) ** 2)) < 2 * math.pi * 1e3


class TestEffectiveCoupling:
    def test_zero_amplitude(self, device):
        for tr in TRANSFER:
            assert effective_coupling(device, FluxPulse(0.0, 0.0, mhz(100)), tr).g_eff == 0.0

    def test_bessel_optimum_coupling(self, device):
        amp = 0.317
        mf = modulated_frequency(device.tunable, FluxPulse(0.0, amp, 1.0))
        omega_p = mf.omega_tilde / (2 * 1.84)
        ec = effective_coupling(device, FluxPulse(0.0, amp, omega_p), "iswap")
        assert ec.bessel_argument == pytest.approx(1.84)
        assert ec.g_eff / device.g == pytest.approx(0.582, abs=1e-3)

    def test_beta_at_zero_phase(self, device):
        ec = effective_coupling(device, FluxPulse(0.0, 0.3, mhz(120), 0.0), "iswap", 1)
        assert ec.beta_n == pytest.approx(math.pi)

    @given(st.floats(0.0, 3.0), st.floats(-math.pi, math.pi), st.integers(-3, 3))
    def test_beta_phase_law(self, x, theta, n):
        diff = coupling_phase(x, theta + math.pi, n) - coupling_phase(x, theta, n)
        assert (diff - 2 * math.pi * n) == pytest.approx(0.0, abs=1e-9)

    @given(st.floats(0.05, 0.45), st.floats(60.0, 400.0), st.integers(1, 3))
    def test_cz_over_iswap_is_sqrt2(self, device, amp, f_p, n):
        pulse = FluxPulse(0.0, amp, mhz(f_p))
        g_iswap = effective_coupling(device, pulse, "iswap", n).g_eff
        for tr in ("cz02", "cz20"):
            g_cz = effective_coupling(device, pulse, tr, n).g_eff
            if g_iswap != 0.0:
                assert g_cz / g_iswap == pytest.approx(math.sqrt(2), rel=1e-12)

    @given(st.floats(0.0, 0.5), st.floats(20.0, 600.0), st.integers(1, 4))
    def test_coupling_bounded(self, device, amp, f_p, n):
        pulse = FluxPulse(0.0, amp, mhz(f_p))
        assert abs(effective_coupling(device, pulse, "iswap", n).g_eff) <= device.g
        for tr in ("cz02", "cz20"):
            assert abs(effective_coupling(device, pulse, tr, n).g_eff) <= math.sqrt(2) * device.g

    def test_unknown_transition(self, device):
        with pytest.raises(ValueError):
            effective_coupling(device, FluxPulse(0.0, 0.3, mhz(100)), "cnot")


class TestRotatingWave:
    def test_unmodulated_limit(self, device, space):
        H = rwa_effective_hamiltonian(device, FluxPulse(0.0, 0.0, mhz(100)), space)
        # only the n = 0 sideband survives, with full strength J0(0) = 1
        assert len(H.drive_terms) == 2 * 3
        for m, _ in H.drive_terms:
            assert np.max(np.abs(m)) in (pytest.approx(device.g), pytest.approx(math.sqrt(2) * device.g))

    def test_hermitian(self, device, space):
        H = rwa_effective_hamiltonian(device, FluxPulse(0.0, 0.3, mhz(120)), space)
        for t in np.linspace(0, 1e-6, 7):
            assert hermitian_error(H(t)) < 1e-12

    def test_cz02_term_stationary_at_resonance(self, device, space):
        pred = predict_resonances(device, 0.245, (1,), ("cz02",))[0]
        assert pred.omega_p_star == pytest.approx(mhz(112), abs=mhz(10))
        pulse = FluxPulse(0.0, 0.245, pred.omega_p_star)
        H = rwa_effective_hamiltonian(device, pulse, space, n_max=1, transitions=("cz02",))
        # terms come in (cos, sin) pairs ordered n = -1, 0, +1; keep the resonant n = +1 pair
        resonant = H.drive_terms[-2:]
        a, b = space.index("11"), space.index("02")
        samples = [sum(f(t) * m[a, b] for m, f in resonant) for t in np.linspace(0.0, 2e-6, 9)]
        assert np.ptp(np.angle(samples)) < 1e-3

    def test_warns_outside_validity(self, device, space):
        with pytest.warns(UserWarning):
            rwa_effective_hamiltonian(device, FluxPulse(0.0, 0.3, mhz(900)), space)

    @pytest.mark.parametrize("transition", list(TRANSFER))
    def test_agrees_with_full_dynamics(self, device, space, transition):
        # oracle: the Duffing-model dynamics of the same square pulse
        amp = OPERATING[transition]
        pred = predict_resonances(device, amp, (1,), (transition,))[0]
        period = math.pi / abs(pred.g_eff)
        pulse = FluxPulse(0.0, amp, pred.omega_p_star, 0.0, period, 0.0)
        src, dst = TRANSFER[transition]
        times = np.linspace(0.0, period, 201)[1:]
        _, states = evolve_trajectory(rwa_effective_hamiltonian(device, pulse, space),
                                      QuantumState.basis(space, src), (0.0, period), times, tol=1e-8)
        rwa = np.array([s.populations()[space.index(dst)] for s in states])
        props = pulse_propagators(device, pulse, times, tol=1e-8, space=space)
        full = np.array([abs(p.matrix[space.index(dst), space.index(src)]) ** 2 for p in props])
        assert abs(rwa.max() - full.max()) < 0.02
        assert abs(rwa[-1] - full[-1]) < 0.02

    @pytest.mark.parametrize("transition", list(TRANSFER))
    def test_sideband_linewidth(self, device, transition):
        amp = OPERATING[transition]
        pred = predict_resonances(device, amp, (1,), (transition,))[0]
        g = abs(pred.g_eff)
        grid = pred.omega_p_star + np.linspace(-3, 3, 41) * g
        contrast = np.array([floquet_transfer(device, transition, amp, w)[0] for w in grid])
        peak = int(np.argmax(contrast))
        assert abs(grid[peak] - pred.omega_p_star) < g
        above = grid[contrast >= contrast[peak] / 2]
        fwhm_detuning = 2 * (above.max() - above.min())   # in units of 2 omega_p
        assert fwhm_detuning == pytest.approx(4 * g, rel=0.5)


def test_matrix_export_round_trip(tmp_path, device, space):
    m = build_duffing_hamiltonian(device, space, FluxPulse(0.0, 0.3, mhz(120), duration=1e-7))(3e-8)
    path = tmp_path / "h.bin"
    export_matrix(m, path)
    assert path.stat().st_size == 81 * 16
    assert np.array_equal(import_matrix(path, 9), m)
