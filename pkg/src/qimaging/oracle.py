"""Closed-form expected per-pixel rates and contrasts for any scene.

This is the independent validation model for the Monte Carlo simulator: the
pump envelope and jitter are reduced to exact pixel-landing probabilities,
and all per-pixel event probabilities follow from Poisson thinning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import AnalysisError, SceneConfig, validate_scene


def matched_pixel_prob(sigma_px: float) -> float:
    """Probability that 2-D Gaussian jitter rounds to zero offset in both axes."""
    if sigma_px < 0:
        raise ValueError("sigma_px must be >= 0")
    if sigma_px == 0:
        return 1.0
    p1 = math.erf(0.5 / (sigma_px * math.sqrt(2.0)))
    return p1 * p1


def _axis_ref_pmf(center: float, sigma: float, n: int) -> np.ndarray:
    """P(reference rounds to pixel k | accepted), per axis."""
    k = np.arange(n)
    p = ndtr((k + 0.5 - center) / sigma) - ndtr((k - 0.5 - center) / sigma)
    z = p.sum()
    if z <= 0:
        raise AnalysisError("pump envelope outside sensor")
    return p / z


def _axis_jitter_pmf(sigma: float):
    """(offsets, probabilities) of the rounded per-axis jitter."""
    if sigma == 0:
        return np.array([0]), np.array([1.0])
    dmax = int(math.ceil(6 * sigma)) + 1
    d = np.arange(-dmax, dmax + 1)
    p = ndtr((d + 0.5) / sigma) - ndtr((d - 0.5) / sigma)
    return d, p


def _axis_probe_pmf(ref_pmf: np.ndarray, c_half: int, sigma: float,
                    n: int) -> np.ndarray:
    """P(probe lands at pixel p) per axis: mirrored reference plus jitter."""
    offs, jp = _axis_jitter_pmf(sigma)
    out = np.zeros(n)
    for d, pd in zip(offs, jp):
        # probe = c_half - k + d for reference pixel k
        k = c_half - np.arange(n) + d  # probe coordinate per ref pixel
        ok = (k >= 0) & (k < n)
        np.add.at(out, k[ok], pd * ref_pmf[ok])
    return out


@dataclass
class RatePrediction:
    """Per-frame event probabilities; p_true/p_acc live in AND-image coords."""

    p_probe: np.ndarray
    p_ref: np.ndarray
    p_true: np.ndarray
    p_acc: np.ndarray
    q_match: float

    @property
    def p_and(self) -> np.ndarray:
        return self.p_true + self.p_acc


def expected_rates(scene: SceneConfig) -> RatePrediction:
    validate_scene(scene)
    w, h = scene.width, scene.height
    geo = scene.geometry
    cx, cy = geo.center_px()
    chx, chy = int(geo.center[0]), int(geo.center[1])

    ref_x = _axis_ref_pmf(cx, scene.pump_sigma_px, w)
    ref_y = _axis_ref_pmf(cy, scene.pump_sigma_px, h)
    ref_pmf = np.outer(ref_y, ref_x)

    probe_x = _axis_probe_pmf(ref_x, chx, geo.sigma_px, w)
    probe_y = _axis_probe_pmf(ref_y, chy, geo.sigma_px, h)
    probe_pmf = np.outer(probe_y, probe_x)

    det = scene.detector
    eta = scene.probe_loss_eta
    t = scene.object_map
    m = scene.thermal_scale * scene.thermal_map
    p_th = m / (1.0 + m)
    p_dark = det.dark_event_prob

    lam_probe = scene.pair_rate * probe_pmf * t * eta * det.qe_probe
    p_probe = 1.0 - np.exp(-lam_probe) * (1.0 - p_th) * (1.0 - p_dark)

    lam_ref = scene.pair_rate * ref_pmf * det.qe_ref
    p_ref = 1.0 - np.exp(-lam_ref) * (1.0 - p_dark)

    q = matched_pixel_prob(geo.sigma_px)
    # a matched pair at probe pixel x came from the reference pixel that is
    # its point reflection; it must survive the object, loss, and both QEs
    lam_true = (scene.pair_rate * ref_pmf[::-1, ::-1] * q
                * t * eta * det.qe_probe * det.qe_ref)
    p_true = 1.0 - np.exp(-lam_true)

    # residual (non-true) firings on the two sides of an AND pixel are
    # independent, so the accidental term is their product
    lam_ref_rot = lam_ref[::-1, ::-1]
    pi_probe = 1.0 - (np.exp(-(lam_probe - lam_true))
                      * (1.0 - p_th) * (1.0 - p_dark))
    pi_ref = 1.0 - np.exp(-(lam_ref_rot - lam_true)) * (1.0 - p_dark)
    p_acc = np.exp(-lam_true) * pi_probe * pi_ref

    return RatePrediction(p_probe=p_probe, p_ref=p_ref, p_true=p_true,
                          p_acc=p_acc, q_match=q)


def _roi_mean(arr: np.ndarray, roi) -> float:
    m = roi.mask(arr.shape[1], arr.shape[0])
    return float(arr[m].mean())


def predicted_contrasts(scene: SceneConfig, bright, dark):
    """Expected (V_classical, V_quantum, advantage) for the given ROIs."""
    rates = expected_rates(scene)
    vc = _contrast(_roi_mean(rates.p_probe, bright),
                   _roi_mean(rates.p_probe, dark))
    vq = _contrast(_roi_mean(rates.p_and, bright),
                   _roi_mean(rates.p_and, dark))
    if vc == 0:
        raise AnalysisError("predicted classical contrast is zero")
    return vc, vq, vq / vc


def _contrast(i_max: float, i_min: float) -> float:
    if i_max + i_min <= 0:
        raise AnalysisError("undefined contrast: both ROI means are zero")
    return (i_max - i_min) / (i_max + i_min)
