"""Contrast, advantage, noise rejection, cut profiles, and presence detection."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .coincidence import and_accumulate, classical_accumulate
from .model import (AnalysisError, CountImage, Roi, SceneConfig,
                    ValidationError, validate_scene)
from .oracle import expected_rates
from .simulate import generate_stack


def _roi_mean(image: CountImage, roi: Roi) -> float:
    m = roi.mask(image.width, image.height)
    return float(np.asarray(image.counts, dtype=np.float64)[m].mean())


def _check_disjoint(a: Roi, b: Roi, width, height):
    if np.any(a.mask(width, height) & b.mask(width, height)):
        raise ValidationError(f"ROIs '{a.label}' and '{b.label}' overlap")


def michelson_contrast(image: CountImage, bright: Roi, dark: Roi) -> float:
    """V = (I_max - I_min) / (I_max + I_min) over ROI mean counts."""
    _check_disjoint(bright, dark, image.width, image.height)
    i_max = _roi_mean(image, bright)
    i_min = _roi_mean(image, dark)
    if i_max + i_min <= 0:
        raise AnalysisError("undefined contrast: both ROI means are zero")
    return (i_max - i_min) / (i_max + i_min)


def qi_advantage(v_quantum: float, v_classical: float) -> float:
    if v_classical == 0:
        raise AnalysisError("advantage undefined: classical contrast is zero")
    return v_quantum / v_classical


def noise_rejection_ratio(classical: CountImage, and_img: CountImage,
                          object_roi: Roi, mask_roi: Roi) -> float:
    """R = [obj/mask of the AND image] / [obj/mask of the classical image].

    A zero mask-ROI mean in the AND image yields +inf (never clipped); the raw
    ROI means belong in the surrounding report.
    """
    _check_disjoint(object_roi, mask_roi, classical.width, classical.height)
    mask_c = _roi_mean(classical, mask_roi)
    obj_c = _roi_mean(classical, object_roi)
    if mask_c <= 0 or obj_c <= 0:
        raise AnalysisError("classical ROI mean is zero; ratio undefined")
    rho_c = obj_c / mask_c
    mask_a = _roi_mean(and_img, mask_roi)
    obj_a = _roi_mean(and_img, object_roi)
    if mask_a <= 0:
        return math.inf
    return (obj_a / mask_a) / rho_c


def cut_profiles(image: CountImage, rows, cols):
    """(per-column mean over `rows`, per-row mean over `cols`)."""
    rows = np.asarray(list(rows), dtype=np.int64)
    cols = np.asarray(list(cols), dtype=np.int64)
    if rows.size == 0 or cols.size == 0:
        raise ValidationError("cut range is empty")
    if rows.min() < 0 or rows.max() >= image.height:
        raise ValidationError("cut rows out of bounds")
    if cols.min() < 0 or cols.max() >= image.width:
        raise ValidationError("cut cols out of bounds")
    counts = np.asarray(image.counts, dtype=np.float64)
    row_profile = counts[rows, :].mean(axis=0)
    col_profile = counts[:, cols].mean(axis=1)
    return row_profile, col_profile


def _absent_scene(scene: SceneConfig, object_roi: Roi) -> SceneConfig:
    obj = scene.object_map.copy()
    obj[object_roi.mask(scene.width, scene.height)] = 0.0
    return replace(scene, object_map=obj)


def _poisson_logterm(s: float, lam_p: float, lam_a: float) -> float:
    """Log-likelihood-ratio contribution of one Poisson statistic."""
    if lam_p == lam_a:
        return 0.0
    if lam_a == 0:
        return math.inf if s > 0 else -lam_p
    if lam_p == 0:
        return -math.inf if s > 0 else lam_a
    return s * math.log(lam_p / lam_a) - (lam_p - lam_a)


def presence_ber(scene: SceneConfig, object_roi: Roi, block_frames: int,
                 trials: int, strategies=("classical", "quantum", "combined"),
                 ) -> dict:
    """Bit-error rate of present/absent decisions per detection strategy.

    Each trial simulates a fresh block of frames with the object present or
    absent (equal prior). Single-statistic strategies threshold the ROI-summed
    counts at the midpoint of the oracle means; the combined strategy uses a
    Poisson likelihood ratio over both statistics jointly.
    """
    if block_frames < 1:
        raise ValidationError("block_frames must be >= 1")
    if trials < 100:
        raise ValidationError("trials must be >= 100")
    if isinstance(strategies, str):
        strategies = (strategies,)
    known = {"classical", "quantum", "combined"}
    unknown = set(strategies) - known
    if unknown:
        raise ValidationError(f"unknown strategy: {sorted(unknown)}")

    present = validate_scene(scene)
    absent = validate_scene(_absent_scene(scene, object_roi))
    roi_mask = object_roi.mask(scene.width, scene.height)

    rates_p = expected_rates(present)
    rates_a = expected_rates(absent)
    m = block_frames
    lam_c_p = m * float(rates_p.p_probe[roi_mask].sum())
    lam_c_a = m * float(rates_a.p_probe[roi_mask].sum())
    lam_q_p = m * float(rates_p.p_and[roi_mask].sum())
    lam_q_a = m * float(rates_a.p_and[roi_mask].sum())
    for lam in (lam_c_p, lam_c_a, lam_q_p, lam_q_a):
        if not math.isfinite(lam) or lam < 0:
            raise AnalysisError("degenerate oracle rates for detection")
    thr_c = 0.5 * (lam_c_p + lam_c_a)
    thr_q = 0.5 * (lam_q_p + lam_q_a)

    errors = {s: 0 for s in strategies}
    for trial in range(trials):
        ss = np.random.SeedSequence(entropy=int(scene.seed),
                                    spawn_key=(trial,))
        coin_seed, block_seed = ss.generate_state(2, np.uint64)
        is_present = bool(np.random.Generator(
            np.random.Philox(key=np.array([coin_seed, 0], np.uint64))
        ).integers(0, 2))
        trial_scene = replace(present if is_present else absent,
                              seed=int(block_seed))
        probe, ref = generate_stack(trial_scene, m)
        s_c = float(classical_accumulate(probe).counts[roi_mask].sum())
        s_q = float(and_accumulate(probe, ref, scene.geometry)
                    .counts[roi_mask].sum())
        for strat in strategies:
            if strat == "classical":
                decide = s_c > thr_c
            elif strat == "quantum":
                decide = s_q > thr_q
            else:
                llr = (_poisson_logterm(s_c, lam_c_p, lam_c_a)
                       + _poisson_logterm(s_q, lam_q_p, lam_q_a))
                decide = llr > 0
            if decide != is_present:
                errors[strat] += 1

    out = {}
    for strat in strategies:
        k = errors[strat]
        ber = k / trials
        half = 1.96 * math.sqrt(max(ber * (1 - ber), 1e-12) / trials)
        out[strat] = {
            "ber": ber,
            "errors": k,
            "trials": trials,
            "ci95": (max(0.0, ber - half), min(1.0, ber + half)),
        }
    return out
