import math

import numpy as np
import pytest

import jpdkit as j

from conftest import make_trace

TWO_PI = 2.0 * math.pi


class TestComplexTrace:
    def test_validation(self):
        with pytest.raises(ValueError):
            j.ComplexTrace([1.0, 2.0], [1 + 0j, 1 + 0j])           # too short
        with pytest.raises(ValueError):
            j.ComplexTrace([1.0, 2.0, 2.0], np.ones(3, complex))   # not increasing
        with pytest.raises(ValueError):
            j.ComplexTrace([1.0, 2.0, 3.0], np.ones(4, complex))   # length mismatch
        with pytest.raises(ValueError):
            j.ComplexTrace([1.0, 2.0, 3.0], [1 + 0j, np.nan + 0j, 1 + 0j])


class TestSynthGrid:
    def test_uniform_limit(self):
        f = j.synth_grid(j.SweepGrid(center=10.0, span=4.0, count=5, concentration=0.0))
        assert np.allclose(f, [8.0, 9.0, 10.0, 11.0, 12.0], atol=1e-12)

    def test_endpoint_contract(self):
        for conc in (0.0, 0.7, 2.0, 5.0):
            g = j.SweepGrid(center=5e9, span=2e6, count=301, concentration=conc)
            f = j.synth_grid(g)
            assert f[0] == pytest.approx(5e9 - 1e6, abs=1e-3)
            assert f[-1] == pytest.approx(5e9 + 1e6, abs=1e-3)
            assert np.all(np.diff(f) > 0)

    def test_symmetry_about_center(self):
        g = j.SweepGrid(center=0.0, span=2.0, count=101, concentration=2.0)
        f = j.synth_grid(g)
        assert np.allclose(f, -f[::-1], atol=1e-15)

    def test_center_to_edge_spacing_ratio(self):
        # warp u -> tan(cu)/tan(c), c = arctan(concentration): the
        # derivative ratio w'(0)/w'(1) = cos^2(c) = 1/(1+concentration^2)
        conc = 2.0
        g = j.SweepGrid(center=0.0, span=2.0, count=1001, concentration=conc)
        f = j.synth_grid(g)
        d = np.diff(f)
        expected = 1.0 / (1.0 + conc**2)
        assert d[len(d) // 2] / d[-1] == pytest.approx(expected, rel=0.02)
        assert d[len(d) // 2] < d[-1]

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            j.SweepGrid(center=5e9, span=-1.0, count=5)
        with pytest.raises(ValueError):
            j.SweepGrid(center=5e9, span=1.0, count=2)


class TestApplyDistortion:
    def test_identity(self, jpc_resonator):
        tr = make_trace(jpc_resonator)
        out = j.apply_distortion(tr, j.DistortionParams())
        assert np.array_equal(out.samples, tr.samples)

    def test_pure_delay_is_unimodular(self, jpc_resonator):
        tr = make_trace(jpc_resonator)
        tau = 40e-9
        out = j.apply_distortion(tr, j.DistortionParams(delay=tau))
        assert np.allclose(np.abs(out.samples), np.abs(tr.samples), rtol=1e-12)
        dphi = np.angle(out.samples / tr.samples)
        expected = np.angle(np.exp(-2j * np.pi * tr.frequencies * tau))
        assert np.allclose(dphi, expected, atol=1e-9)

    def test_invertible_without_fano(self, jpc_resonator):
        tr = make_trace(jpc_resonator)
        d = j.DistortionParams(amplitude=0.7, phase_offset=1.1, delay=40e-9, tilt=0.1)
        out = j.apply_distortion(tr, d)
        undone = out.samples / (d.amplitude * np.exp(
            1j * (d.phase_offset - 2 * np.pi * out.frequencies * d.delay)))
        undone = 1.0 + (undone - 1.0) * np.exp(-1j * d.tilt)
        assert np.max(np.abs(undone - tr.samples)) < 1e-12

    def test_delay_opens_the_circle(self, jpc_resonator):
        gaps = []
        for tau in (10e-9, 40e-9, 100e-9):
            tr = make_trace(jpc_resonator, span_linewidths=15.0,
                            distortion=j.DistortionParams(delay=tau))
            gaps.append(abs(tr.samples[0] - tr.samples[-1]))
        clean = make_trace(jpc_resonator, span_linewidths=15.0)
        base_gap = abs(clean.samples[0] - clean.samples[-1])
        assert all(g > base_gap for g in gaps)
        assert gaps[0] < gaps[1] < gaps[2]


class TestAndNoise:
    def test_zero_sigma_identity(self, jpc_resonator):
        tr = make_trace(jpc_resonator)
        out = j.add_noise(tr, 0.0, seed=1)
        assert np.array_equal(out.samples, tr.samples)

    def test_deterministic_for_fixed_seed(self, jpc_resonator):
        tr = make_trace(jpc_resonator)
        a = j.add_noise(tr, 0.01, seed=42)
        b = j.add_noise(tr, 0.01, seed=42)
        assert np.array_equal(a.samples, b.samples)
        c = j.add_noise(tr, 0.01, seed=43)
        assert not np.array_equal(a.samples, c.samples)

    def test_noise_statistics(self):
        n = 100_000
        f = np.linspace(1e9, 2e9, n)
        tr = j.ComplexTrace(f, np.ones(n, complex))
        out = j.add_noise(tr, 0.01, seed=7)
        noise = out.samples - tr.samples
        assert np.std(noise.real) == pytest.approx(0.01, rel=0.02)
        assert np.std(noise.imag) == pytest.approx(0.01, rel=0.02)
        # isotropy: off-diagonal covariance below 3 sigma^2 / sqrt(N)
        cov = np.mean(noise.real * noise.imag)
        assert abs(cov) < 3.0 * 0.01**2 / math.sqrt(n)


class TestSynthBackground:
    def test_identity_distortion_gives_ones(self):
        f = np.linspace(5e9, 5.1e9, 11)
        bg = j.synth_background(f, j.DistortionParams())
        assert np.allclose(bg.samples, 1.0, atol=1e-15)

    def test_delay_only_unit_magnitude(self):
        f = np.linspace(5e9, 5.1e9, 101)
        bg = j.synth_background(f, j.DistortionParams(delay=30e-9))
        assert np.allclose(np.abs(bg.samples), 1.0, rtol=1e-12)
        slope = np.polyfit(f, np.unwrap(np.angle(bg.samples)), 1)[0]
        assert slope == pytest.approx(-2 * np.pi * 30e-9, rel=1e-9)

    def test_division_cancels_matched_distortion(self, jpc_resonator):
        d = j.DistortionParams(amplitude=0.6, phase_offset=-0.9, delay=55e-9)
        tr = make_trace(jpc_resonator, distortion=d)
        bg = j.synth_background(tr.frequencies, d)
        ideal = make_trace(jpc_resonator)
        assert np.max(np.abs(tr.samples / bg.samples - ideal.samples)) < 1e-12
