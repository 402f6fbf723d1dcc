import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvphase.nvmodel import NoiseParams, Transition
from nvphase.pulses import get_probe, prepare_single_nuclear, rabi_block, rabi_durations
from nvphase.qcore import DensityMatrix, random_density
from nvphase.readout import (
    RabiTrace,
    ReadoutError,
    ReadoutModel,
    ShotRecord,
    expected_ratio,
    expected_trace,
    measure_trace,
    ratio_variance,
    sample_shots,
    sample_trace,
)

MODEL = ReadoutModel()
RF = 50e3


def level(i):
    v = np.zeros(4, dtype=complex)
    v[i] = 1
    return DensityMatrix.from_pure(v)


def nuclear_family(phi=math.radians(30)):
    probe = get_probe("nuclear")
    noise = NoiseParams.ideal()
    from nvphase.nvmodel import SystemParams
    params = SystemParams()
    return lambda t: probe.sequence(phi, 0.0, t, params, noise)


class TestExpectedRatio:
    def test_anchors(self):
        assert expected_ratio(level(0), MODEL) == pytest.approx(1.0)
        assert expected_ratio(level(2), MODEL) == pytest.approx(0.70)
        half = DensityMatrix(np.diag([0.25, 0.25, 0.25, 0.25]).astype(complex))
        assert expected_ratio(half, MODEL) == pytest.approx(0.85)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 1))
    def test_affine_in_population(self, seed, w):
        rng = np.random.default_rng(seed)
        a, b = random_density(4, rng), random_density(4, rng)
        mix = DensityMatrix(w * a.matrix + (1 - w) * b.matrix)
        want = w * expected_ratio(a, MODEL) + (1 - w) * expected_ratio(b, MODEL)
        assert expected_ratio(mix, MODEL) == pytest.approx(want, abs=1e-12)

    def test_population_inverse(self):
        assert MODEL.population_from_ratio(MODEL.ratio_from_population(0.37)) == pytest.approx(0.37)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            ReadoutModel(contrast=1.0)
        with pytest.raises(ValueError):
            ReadoutModel(window=0.0)


class TestShots:
    def test_photons_per_shot(self):
        assert MODEL.photons_per_shot == pytest.approx(0.075)

    def test_large_nu_converges(self):
        nu = 1_000_000
        rec = sample_shots(level(0), MODEL, nu, seed=5)
        sigma = math.sqrt(ratio_variance(1.0, nu, MODEL))
        assert abs(rec.ratio - 1.0) < 3 * sigma
        mixed = DensityMatrix.maximally_mixed(4)
        rec = sample_shots(mixed, MODEL, nu, seed=6)
        assert abs(rec.ratio - 0.85) < 3 * math.sqrt(ratio_variance(0.85, nu, MODEL))

    def test_deterministic(self):
        assert sample_shots(level(0), MODEL, 1000, 9) == sample_shots(level(0), MODEL, 1000, 9)

    def test_errors(self):
        with pytest.raises(ValueError):
            sample_shots(level(0), MODEL, 0, 1)
        with pytest.raises(ValueError):
            ShotRecord(-1, 3, 10)
        with pytest.raises(ReadoutError):
            ShotRecord(1, 0, 10).ratio


class TestTrace:
    durations = rabi_durations(RF)

    def test_noiseless_on_cosine(self):
        tr = measure_trace(nuclear_family(), self.durations, MODEL, 100_000, shot_noise=False)
        exact = expected_trace(nuclear_family(), self.durations, MODEL)
        assert np.array_equal(tr.means, exact)
        assert np.all(tr.sds == 0)
        # population swing is a cosine at the Rabi frequency: check against a 3-term fit
        x = np.column_stack([np.ones_like(self.durations),
                             np.cos(2 * np.pi * RF * self.durations),
                             np.sin(2 * np.pi * RF * self.durations)])
        coef, *_ = np.linalg.lstsq(x, exact, rcond=None)
        assert np.allclose(x @ coef, exact, atol=1e-12)

    def test_flat_trace_on_drive_axis(self):
        prep = prepare_single_nuclear(0.0)
        family = lambda t: prep + rabi_block(Transition.RF0, 0.0, t, RF)  # noqa: E731
        exact = expected_trace(family, self.durations, MODEL)
        assert np.allclose(exact, exact[0], atol=1e-12)

    def test_sd_shrinks_as_inverse_root(self):
        ratios = expected_trace(nuclear_family(), self.durations, MODEL)
        sd = {}
        for nu in (100_000, 400_000, 2_000_000):
            traces = [sample_trace(ratios, self.durations, MODEL, nu, 10, seed=s) for s in range(40)]
            sd[nu] = np.mean([t.sds.mean() for t in traces])
        for nu in (400_000, 2_000_000):
            assert sd[nu] / sd[100_000] == pytest.approx(math.sqrt(100_000 / nu), rel=0.2)

    def test_sd_slope_over_decades(self):
        ratios = np.full(8, 0.85)
        nus = [10**k for k in range(4, 8)]
        sds = []
        for nu in nus:
            means = [sample_trace(ratios, np.arange(8.0), MODEL, nu, 10, seed=s).means
                     for s in range(200)]
            sds.append(np.std(np.concatenate(means), ddof=1))
        slope = np.polyfit(np.log(nus), np.log(sds), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.05)

    def test_means_in_band(self):
        ratios = expected_trace(nuclear_family(), self.durations, MODEL)
        nu = 1000
        sigma = math.sqrt(ratio_variance(1.0, nu, MODEL))
        for s in range(20):
            tr = sample_trace(ratios, self.durations, MODEL, nu * 10, 10, seed=s)
            assert np.all(tr.means >= 1 - MODEL.contrast - 5 * sigma)
            assert np.all(tr.means <= 1 + 5 * sigma)
            assert np.all(tr.means > 0)

    def test_block_order_independence(self):
        ratios = np.full(8, 0.9)
        a = sample_trace(ratios, np.arange(8.0), MODEL, 10_000, 10, seed=3, stream=(1, 2))
        b = sample_trace(ratios, np.arange(8.0), MODEL, 10_000, 10, seed=3, stream=(1, 2))
        c = sample_trace(ratios, np.arange(8.0), MODEL, 10_000, 10, seed=3, stream=(1, 3))
        assert np.array_equal(a.means, b.means)
        assert not np.array_equal(a.means, c.means)

    def test_errors(self):
        ratios = np.full(8, 0.9)
        with pytest.raises(ReadoutError):
            sample_trace(ratios, np.arange(8.0), MODEL, 1000, 1, seed=0)
        with pytest.raises(ReadoutError):
            sample_trace(ratios, np.arange(8.0), MODEL, 5, 10, seed=0)
        with pytest.raises(ReadoutError):
            measure_trace(nuclear_family(), self.durations[:4], MODEL, 1000)
        with pytest.raises(ValueError):
            RabiTrace([0, 1], [1.0], [0.0], 10)

    def test_table_round_trip(self):
        ratios = expected_trace(nuclear_family(), self.durations, MODEL)
        tr = sample_trace(ratios, self.durations, MODEL, 50_000, 10, seed=1)
        back = RabiTrace.from_table(tr.to_table())
        assert back.nu == tr.nu and back.blocks == tr.blocks
        for name in ("durations", "means", "sds"):
            assert np.array_equal(getattr(back, name), getattr(tr, name))
        assert tr.to_table().splitlines()[1] == "duration[s]\tmean[ratio]\tsd[ratio]"

    def test_standard_errors(self):
        tr = RabiTrace([0.0], [1.0], [0.1], 100, blocks=4)
        assert tr.standard_errors[0] == pytest.approx(0.05)
