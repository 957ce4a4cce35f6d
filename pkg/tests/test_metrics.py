import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qimaging.metrics import (cut_profiles, michelson_contrast,
                              noise_rejection_ratio, presence_ber,
                              qi_advantage)
from qimaging.model import (AnalysisError, CountImage, DetectorModel, Roi,
                            SceneConfig, ValidationError)


def _image(counts, kind="classical"):
    counts = np.asarray(counts, dtype=np.float64)
    return CountImage(counts.shape[1], counts.shape[0], counts, 1, kind=kind)


LEFT = Roi(label="bright", rect=(0, 0, 2, 4))
RIGHT = Roi(label="dark", rect=(2, 0, 2, 4))


class TestMichelsonContrast:
    def test_full_contrast(self):
        img = _image(np.hstack([np.full((4, 2), 5.0), np.zeros((4, 2))]))
        assert michelson_contrast(img, LEFT, RIGHT) == 1.0

    def test_zero_contrast(self):
        img = _image(np.full((4, 4), 3.0))
        assert michelson_contrast(img, LEFT, RIGHT) == 0.0

    def test_half_contrast(self):
        img = _image(np.hstack([np.full((4, 2), 3.0), np.full((4, 2), 1.0)]))
        assert michelson_contrast(img, LEFT, RIGHT) == 0.5

    def test_overlapping_rois_rejected(self):
        img = _image(np.ones((4, 4)))
        with pytest.raises(ValidationError, match="overlap"):
            michelson_contrast(img, LEFT, Roi(label="d", rect=(1, 0, 2, 4)))

    def test_both_zero_undefined(self):
        img = _image(np.zeros((4, 4)))
        with pytest.raises(AnalysisError, match="undefined contrast"):
            michelson_contrast(img, LEFT, RIGHT)

    @given(hi=st.floats(0, 1e6), lo=st.floats(0, 1e6),
           scale=st.floats(1e-3, 1e3))
    @settings(max_examples=100, deadline=None)
    def test_bounded_and_scale_invariant(self, hi, lo, scale):
        counts = np.hstack([np.full((4, 2), hi), np.full((4, 2), lo)])
        if hi + lo <= 1e-6:
            return
        v = michelson_contrast(_image(counts), LEFT, RIGHT)
        assert -1.0 <= v <= 1.0
        v_scaled = michelson_contrast(_image(scale * counts), LEFT, RIGHT)
        assert v_scaled == pytest.approx(v, abs=1e-9)


class TestAdvantage:
    def test_ratio(self):
        assert qi_advantage(0.9, 0.3) == pytest.approx(3.0)

    def test_equal_contrasts(self):
        assert qi_advantage(0.42, 0.42) == 1.0

    def test_zero_classical_undefined(self):
        with pytest.raises(AnalysisError, match="advantage undefined"):
            qi_advantage(0.5, 0.0)


class TestNoiseRejection:
    obj = Roi(label="object", rect=(0, 0, 2, 4))
    mask = Roi(label="mask", rect=(2, 0, 2, 4))

    def test_identical_images_give_unity(self):
        img = _image(np.hstack([np.full((4, 2), 6.0), np.full((4, 2), 2.0)]))
        assert noise_rejection_ratio(img, img, self.obj, self.mask) == 1.0

    def test_clean_and_image_gives_infinity(self):
        classical = _image(np.full((4, 4), 2.0))
        and_img = _image(np.hstack([np.full((4, 2), 1.0), np.zeros((4, 2))]),
                         kind="and")
        r = noise_rejection_ratio(classical, and_img, self.obj, self.mask)
        assert r == math.inf

    def test_zero_classical_undefined(self):
        zero = _image(np.zeros((4, 4)))
        with pytest.raises(AnalysisError, match="ratio undefined"):
            noise_rejection_ratio(zero, zero, self.obj, self.mask)


class TestCutProfiles:
    def test_single_row(self):
        img = _image(np.arange(12.0).reshape(3, 4))
        row_profile, _ = cut_profiles(img, rows=[1], cols=[0])
        assert np.array_equal(row_profile, [4, 5, 6, 7])

    def test_uniform_image(self):
        img = _image(np.full((5, 5), 2.5))
        rp, cp = cut_profiles(img, rows=range(1, 4), cols=range(2, 5))
        assert np.all(rp == 2.5) and np.all(cp == 2.5)
        assert rp.shape == (5,) and cp.shape == (5,)

    def test_empty_range_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            cut_profiles(_image(np.ones((3, 3))), rows=[], cols=[0])

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValidationError, match="out of bounds"):
            cut_profiles(_image(np.ones((3, 3))), rows=[3], cols=[0])


class TestPresenceBer:
    roi = Roi(label="object", rect=(2, 2, 5, 5))

    def _scene(self, eta=1.0, seed=0):
        return SceneConfig(width=9, height=9, pair_rate=2.0, pump_sigma_px=4.0,
                           probe_loss_eta=eta,
                           detector=DetectorModel(dark_event_prob=0.001),
                           seed=seed)

    def test_separable_limit_is_error_free(self):
        scene = SceneConfig(width=9, height=9, pair_rate=2.0,
                            pump_sigma_px=4.0,
                            detector=DetectorModel(dark_event_prob=0.0))
        result = presence_ber(scene, self.roi, block_frames=400, trials=100)
        for stats in result.values():
            assert stats["ber"] == 0.0

    def test_blocked_probe_is_uninformative(self):
        result = presence_ber(self._scene(eta=0.0), self.roi,
                              block_frames=50, trials=200)
        for stats in result.values():
            assert 0.3 <= stats["ber"] <= 0.7

    def test_more_frames_never_hurt(self):
        short = presence_ber(self._scene(eta=0.08, seed=4), self.roi,
                             block_frames=5, trials=300,
                             strategies=("combined",))
        long = presence_ber(self._scene(eta=0.08, seed=4), self.roi,
                            block_frames=80, trials=300,
                            strategies=("combined",))
        assert long["combined"]["ber"] <= short["combined"]["ber"] + 0.05

    def test_result_bookkeeping(self):
        result = presence_ber(self._scene(seed=2), self.roi,
                              block_frames=20, trials=100,
                              strategies="classical")
        stats = result["classical"]
        assert stats["trials"] == 100
        assert stats["errors"] == round(stats["ber"] * 100)
        lo, hi = stats["ci95"]
        assert 0.0 <= lo <= stats["ber"] <= hi <= 1.0

    def test_too_few_trials_rejected(self):
        with pytest.raises(ValidationError, match="trials"):
            presence_ber(self._scene(), self.roi, block_frames=10, trials=99)

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValidationError, match="unknown strategy"):
            presence_ber(self._scene(), self.roi, block_frames=10, trials=100,
                         strategies=("bayes",))
