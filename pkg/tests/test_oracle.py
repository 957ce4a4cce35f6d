import numpy as np
import pytest

from qimaging.coincidence import and_accumulate, classical_accumulate
from qimaging.model import AnalysisError, DetectorModel, Roi, SceneConfig
from qimaging.oracle import (expected_rates, matched_pixel_prob,
                             predicted_contrasts)
from qimaging.simulate import generate_stack


class TestMatchedPixelProb:
    def test_zero_jitter(self):
        assert matched_pixel_prob(0.0) == 1.0

    def test_diffuse_limit(self):
        assert matched_pixel_prob(10.0) < 0.01

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            matched_pixel_prob(-0.1)

    def test_against_monte_carlo(self):
        # 1e7 independent 2-D jitter draws, counting exact-pixel matches
        sigma = 4.0 / 13.0
        rng = np.random.default_rng(1234)
        matched = 0
        n = 10_000_000
        for _ in range(10):
            j = rng.normal(scale=sigma, size=(n // 10, 2))
            matched += int(np.all(np.abs(j) < 0.5, axis=1).sum())
        mc = matched / n
        assert matched_pixel_prob(sigma) == pytest.approx(mc, abs=0.005)
        assert matched_pixel_prob(sigma) == pytest.approx(0.80, abs=0.01)

    def test_monotone_in_sigma(self):
        sigmas = np.linspace(0.05, 3.0, 30)
        vals = [matched_pixel_prob(s) for s in sigmas]
        assert np.all(np.diff(vals) < 0)


class TestExpectedRates:
    def test_dark_only(self):
        scene = SceneConfig(pair_rate=0.0,
                            detector=DetectorModel(dark_event_prob=0.0016))
        rates = expected_rates(scene)
        assert np.allclose(rates.p_probe, 0.0016)
        assert np.allclose(rates.p_ref, 0.0016)
        assert np.allclose(rates.p_true, 0.0)

    def test_opaque_pixel_has_floor_rate_only(self):
        obj = np.ones((49, 49))
        obj[10, 10] = 0.0
        scene = SceneConfig(object_map=obj,
                            thermal_map=np.full((49, 49), 0.001))
        rates = expected_rates(scene)
        assert rates.p_true[10, 10] == 0.0
        floor = 1 - (1 - 0.001 / 1.001) * (1 - 0.0016)
        assert rates.p_probe[10, 10] == pytest.approx(floor)

    def test_and_rate_below_marginals(self):
        scene = SceneConfig(thermal_map=np.full((49, 49), 0.002))
        rates = expected_rates(scene)
        bound = np.minimum(rates.p_probe, rates.p_ref[::-1, ::-1])
        assert np.all(rates.p_and <= bound + 1e-12)

    def test_envelope_off_sensor_rejected(self):
        from qimaging.oracle import _axis_ref_pmf
        with pytest.raises(AnalysisError, match="pump envelope"):
            _axis_ref_pmf(center=-500.0, sigma=1.0, n=9)

    def test_simulation_agrees_per_pixel(self):
        scene = SceneConfig(width=21, height=21, pair_rate=1.2,
                            pump_sigma_px=7.0,
                            thermal_map=np.full((21, 21), 0.002), seed=42)
        n = 40_000
        probe, ref = generate_stack(scene, n)
        rates = expected_rates(scene)
        for counts, p in ((classical_accumulate(probe).counts, rates.p_probe),
                          (classical_accumulate(ref).counts, rates.p_ref),
                          (and_accumulate(probe, ref, scene.geometry).counts,
                           rates.p_and)):
            sigma = np.sqrt(n * p * (1 - p))
            z = np.abs(counts - n * p) / np.maximum(sigma, 1e-9)
            frac_ok = np.mean(z <= 4.0)
            assert frac_ok >= 0.99, f"only {frac_ok:.3f} of pixels within 4 sigma"


class TestPredictedContrasts:
    bright = Roi(label="bright", rect=(8, 18, 11, 13))
    dark = Roi(label="dark", rect=(30, 18, 11, 13))

    def _scene(self, eta=1.0, thermal=0.0016, dark_prob=0.0016):
        obj = np.zeros((49, 49))
        obj[:, :24] = 1.0
        return SceneConfig(object_map=obj,
                           thermal_map=np.full((49, 49), thermal),
                           probe_loss_eta=eta,
                           detector=DetectorModel(dark_event_prob=dark_prob))

    def test_noiseless_limit(self):
        scene = self._scene(thermal=0.0, dark_prob=0.0)
        vc, vq, a = predicted_contrasts(scene, self.bright, self.dark)
        assert vc == pytest.approx(1.0)
        assert vq == pytest.approx(1.0)
        assert a == pytest.approx(1.0)

    def test_advantage_increases_as_loss_grows(self):
        advantages = [predicted_contrasts(self._scene(eta=eta),
                                          self.bright, self.dark)[2]
                      for eta in (1.0, 0.7, 0.4, 0.1)]
        assert all(a > 1 for a in advantages)
        assert np.all(np.diff(advantages) > 0)

    def test_advantage_increases_with_background(self):
        advantages = [predicted_contrasts(self._scene(thermal=b),
                                          self.bright, self.dark)[2]
                      for b in (0.0016, 0.0032, 0.0064, 0.0128)]
        assert all(a > 1 for a in advantages)
        assert np.all(np.diff(advantages) > 0)
