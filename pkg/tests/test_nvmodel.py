import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvphase.nvmodel import (
    NoiseParams,
    SelectivityError,
    SystemParams,
    Transition,
    drive_generator,
    electron_zero_population,
    evolve_free,
    evolve_pulse,
    free_evolution_channels,
    initial_state,
)
from nvphase.qcore import DensityMatrix, random_density

IDEAL = NoiseParams.ideal()


def basis(i):
    v = np.zeros(4, dtype=complex)
    v[i] = 1
    return DensityMatrix.from_pure(v)


def pi_time(rabi):
    return 0.5 / rabi


class TestInitialState:
    def test_fully_polarized(self):
        assert np.allclose(initial_state(IDEAL).matrix, basis(0).matrix)

    def test_device_polarization(self):
        rho = initial_state(NoiseParams())
        assert np.allclose(rho.matrix, np.diag([0.85, 0.15, 0, 0]))

    def test_unpolarized(self):
        noise = NoiseParams(nuclear_init_polarization=0.5, electron_init_polarization=0.5)
        assert np.allclose(initial_state(noise).matrix, np.eye(4) / 4)


class TestDrives:
    def test_rf_pi_pulse(self):
        d = drive_generator(Transition.RF0, 0.0, 50e3)
        out = evolve_pulse(basis(0), d, pi_time(50e3), IDEAL)
        assert np.allclose(out.matrix, basis(1).matrix, atol=1e-12)

    def test_rf_half_pi_convention(self):
        d = drive_generator(Transition.RF0, 0.0, 50e3)
        out = evolve_pulse(basis(0), d, pi_time(50e3) / 2, IDEAL)
        want = DensityMatrix.from_pure(np.array([1, -1j, 0, 0]) / math.sqrt(2))
        assert np.allclose(out.matrix, want.matrix, atol=1e-12)

    @pytest.mark.parametrize("t", list(Transition))
    def test_generator_block_structure(self, t):
        d = drive_generator(t, 0.7, 20e3)
        h = d.matrix
        assert np.allclose(h, h.conj().T)
        a, b = t.levels
        mask = np.ones((4, 4), bool)
        mask[a, b] = mask[b, a] = False
        assert np.all(h[mask] == 0)

    def test_mw_up_leaves_down_branch(self):
        u = drive_generator(Transition.MW_UP, 1.1, 1e6).rotation(0.37e-6)
        for i in (1, 3):
            e = np.zeros(4)
            e[i] = 1
            assert np.array_equal(u @ e, e)

    def test_selectivity_guard(self):
        with pytest.raises(SelectivityError):
            drive_generator(Transition.RF0, 0.0, 200e3)
        relaxed = SystemParams(enforce_selectivity=False)
        assert drive_generator(Transition.RF0, 0.0, 200e3, relaxed).rabi_freq == 200e3

    def test_rabi_freq_positive(self):
        with pytest.raises(ValueError):
            drive_generator(Transition.RF0, 0.0, 0.0)

    def test_zero_duration(self):
        rho = initial_state(NoiseParams())
        d = drive_generator(Transition.MW_UP, 0.0, 1e6)
        assert evolve_pulse(rho, d, 0.0, NoiseParams()) is rho

    def test_negative_duration(self):
        d = drive_generator(Transition.MW_UP, 0.0, 1e6)
        with pytest.raises(ValueError):
            evolve_pulse(basis(0), d, -1e-9)

    def test_nominal_49us_pulse(self):
        # 10 kHz Rabi: exact pi needs 50 us; 49 us leaves a small residue
        params = SystemParams(rf_rabi=10e3)
        d = drive_generator(Transition.RF0, 0.0, params.rf_rabi, params)
        exact = evolve_pulse(basis(0), d, 50e-6, IDEAL).populations()
        short = evolve_pulse(basis(0), d, 49e-6, IDEAL).populations()
        assert exact[1] == pytest.approx(1.0, abs=1e-12)
        assert short[1] == pytest.approx(math.sin(0.49 * math.pi) ** 2, abs=1e-12)

    def test_full_mw_cycle_keeps_down_levels(self):
        rho = random_density(4, np.random.default_rng(1))
        d = drive_generator(Transition.MW_UP, 0.3, 1e6)
        out = evolve_pulse(rho, d, 1e-6, IDEAL)
        p0, p1 = rho.populations(), out.populations()
        assert p1[1] == pytest.approx(p0[1], abs=1e-12)
        assert p1[3] == pytest.approx(p0[3], abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(list(Transition)),
           st.floats(0, 2 * math.pi), st.floats(0, 1e-4))
    def test_noiseless_pulse_preserves_spectrum(self, seed, t, phase, duration):
        rho = random_density(4, np.random.default_rng(seed))
        out = evolve_pulse(rho, drive_generator(t, phase, 20e3), duration)
        assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(rho.matrix), atol=1e-10)

    def test_driven_decay_damps_rabi_envelope(self):
        noise = NoiseParams.ideal()
        noise = NoiseParams(**{**noise.__dict__, "t1rho_nuclear": 1e-3})
        d = drive_generator(Transition.RF0, 0.0, 50e3)
        out = evolve_pulse(basis(0), d, 1e-3, noise)  # 50 full cycles
        p = out.populations()
        assert p[0] - p[1] == pytest.approx(math.exp(-1), rel=1e-9)


class TestFreeEvolution:
    def test_zero_duration_identity(self):
        rho = random_density(4, np.random.default_rng(0))
        assert evolve_free(rho, 0.0, NoiseParams()) is rho

    def test_electron_fid_at_t2star(self):
        noise = NoiseParams(t1_electron=math.inf)
        plus = DensityMatrix.from_pure(np.array([1, 0, 1, 0]) / math.sqrt(2))
        out = evolve_free(plus, noise.t2_star_electron, noise)
        assert abs(out.matrix[0, 2]) == pytest.approx(0.5 * math.exp(-1), rel=1e-12)

    def test_nuclear_dephasing_branch_resolved(self):
        noise = NoiseParams(t1_electron=math.inf)
        plus = DensityMatrix.from_pure(np.array([1, 1, 0, 0]) / math.sqrt(2))
        out = evolve_free(plus, noise.t2_star_nuclear_ms0, noise)
        assert abs(out.matrix[0, 1]) == pytest.approx(0.5 * math.exp(-1), rel=1e-12)

    def test_diagonal_state_only_relaxes(self):
        noise = NoiseParams()
        rho = DensityMatrix(np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex))
        t = 1e-3
        out = evolve_free(rho, t, noise)
        p = 1 - math.exp(-t / noise.t1_electron)
        want = np.diag([0.1 + 0.3 * p, 0.2 + 0.4 * p, 0.3 * (1 - p), 0.4 * (1 - p)])
        assert np.allclose(out.matrix, want, atol=1e-12)

    def test_channels_are_complete(self):
        for ch in free_evolution_channels(3e-6, NoiseParams()):
            s = sum(k.conj().T @ k for k in ch.operators)
            assert np.allclose(s, np.eye(4), atol=1e-10)

    def test_negative_duration(self):
        with pytest.raises(ValueError):
            evolve_free(basis(0), -1.0, NoiseParams())

    def test_electron_zero_population(self):
        assert electron_zero_population(DensityMatrix.maximally_mixed(4)) == pytest.approx(0.5)


class TestParams:
    def test_defaults(self):
        p, n = SystemParams(), NoiseParams()
        assert p.hyperfine_coupling == 12.8e6
        assert p.nuclear_resonance_ms0 == 495e3
        assert n.t2_star_electron == 0.72e-6
        assert n.mapping_gate_efficiency == 0.92

    def test_presets(self):
        assert NoiseParams.preset("paper") == NoiseParams()
        assert NoiseParams.preset("ideal") == IDEAL
        with pytest.raises(ValueError):
            NoiseParams.preset("noisy")

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseParams(mapping_gate_efficiency=1.2)
        with pytest.raises(ValueError):
            NoiseParams(t1_electron=0.0)
        with pytest.raises(ValueError):
            SystemParams(hyperfine_coupling=1e6)

    def test_load_from_file(self, tmp_path):
        f = tmp_path / "noise.cfg"
        f.write_text("# device values\nt2_star_electron = 1e-6\nmapping_gate_efficiency = 0.95\n")
        n = NoiseParams.from_file(f)
        assert n.t2_star_electron == 1e-6
        assert n.mapping_gate_efficiency == 0.95
        assert n.t1_electron == NoiseParams().t1_electron
        g = tmp_path / "sys.cfg"
        g.write_text("rf_rabi = 20e3\nenforce_selectivity = false\n")
        s = SystemParams.from_file(g)
        assert s.rf_rabi == 20e3 and s.enforce_selectivity is False

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("t2 = 1\n")
        with pytest.raises(ValueError):
            NoiseParams.from_file(f)
