"""Monte Carlo generation of probe/reference frame streams.

Every frame draws all of its randomness from a counter-based stream keyed by
(scene.seed, frame_index), so a stack is bit-identical no matter how frames
are partitioned across workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (Frame, FrameStack, SceneConfig, ValidationError,
                    row_bytes, validate_scene)


class SimulationError(RuntimeError):
    pass


_MAX_RESAMPLE_ROUNDS = 1000


def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    key = np.array([seed, frame_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _FrameStreams:
    """Reuses one Generator, re-keying its Philox state per frame.

    Produces exactly the stream of frame_rng(seed, index) without paying the
    Generator construction cost on every frame.
    """

    def __init__(self, seed: int):
        self._bitgen = np.random.Philox(key=np.array([seed, 0], np.uint64))
        self._gen = np.random.Generator(self._bitgen)
        self._template = self._bitgen.state
        self._seed = seed

    def for_frame(self, frame_index: int) -> np.random.Generator:
        st = self._template
        st["state"]["key"] = np.array([self._seed, frame_index], np.uint64)
        self._bitgen.state = st
        return self._gen


def _round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x).astype(np.int64)


@dataclass
class PairSample:
    ref_px: tuple
    probe_px: tuple | None
    detected_ref: bool
    detected_probe: bool


@dataclass
class _ScenePrep:
    """Per-stack precomputation shared by every frame."""

    pump_center: np.ndarray   # continuous (cx, cy) in pixel units
    pump_sigma: float
    center_half: np.ndarray   # integer anticorrelation center, half-pixels
    dims: np.ndarray          # (width, height)
    sigma_px: float
    thermal_levels: list      # [(mean photon number m, flat pixel indices)]
    npix: int
    dark_idx: np.ndarray = field(default=None)

    @classmethod
    def build(cls, scene):
        m = (scene.thermal_scale * scene.thermal_map).ravel()
        levels = []
        for val in np.unique(m):
            if val > 0:
                levels.append((float(val), np.flatnonzero(m == val)))
        npix = scene.width * scene.height
        return cls(
            pump_center=np.array(scene.geometry.center_px()),
            pump_sigma=scene.pump_sigma_px,
            center_half=np.array(scene.geometry.center, np.int64),
            dims=np.array([scene.width, scene.height], np.int64),
            sigma_px=scene.geometry.sigma_px,
            thermal_levels=levels,
            npix=npix,
            # one Bernoulli field over both sensor regions: indices below
            # npix are probe pixels, the rest reference pixels
            dark_idx=np.arange(2 * npix),
        )


def _sample_ref_pixels(rng, k, prep):
    """k reference pixels from the pump envelope, rejected to the sensor."""
    need = k
    parts = []
    for _ in range(_MAX_RESAMPLE_ROUNDS):
        m = need + (need >> 1) + 4
        cand = _round_half_away(
            prep.pump_center + prep.pump_sigma * rng.normal(size=(m, 2)))
        good = cand[((cand >= 0) & (cand < prep.dims)).all(axis=1)]
        if good.shape[0] >= need:
            parts.append(good[:need])
            need = 0
            break
        parts.append(good)
        need -= good.shape[0]
    if need:
        raise SimulationError("pump envelope outside sensor")
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def _sample_pairs(rng, k, scene, prep):
    """Vectorized pair sampling; returns coordinate arrays and detection masks."""
    ref = _sample_ref_pixels(rng, k, prep)
    jit = _round_half_away(prep.sigma_px * rng.normal(size=(k, 2)))
    # probe lands at the point reflection of the reference pixel, plus jitter
    probe = prep.center_half - ref + jit
    on_sensor = ((probe >= 0) & (probe < prep.dims)).all(axis=1)
    t = np.zeros(k)
    on = np.flatnonzero(on_sensor)
    t[on] = scene.object_map[probe[on, 1], probe[on, 0]]
    det = scene.detector
    u = rng.random((4, k))
    detected_probe = (
        on_sensor
        & (u[0] < t)
        & (u[1] < scene.probe_loss_eta)
        & (u[2] < det.qe_probe)
    )
    detected_ref = u[3] < det.qe_ref
    return ref, probe, on_sensor, detected_probe, detected_ref


def sample_pair(geometry, pump_sigma_px, scene: SceneConfig, rng) -> PairSample:
    """Draw one photon pair; probe_px is None when the probe is lost."""
    prep = _ScenePrep.build(scene)
    ref, probe, on_sensor, dp, dr = _sample_pairs(rng, 1, scene, prep)
    probe_px = ((int(probe[0, 0]), int(probe[0, 1]))
                if (on_sensor[0] and dp[0]) else None)
    return PairSample(
        ref_px=(int(ref[0, 0]), int(ref[0, 1])),
        probe_px=probe_px,
        detected_ref=bool(dr[0]),
        detected_probe=bool(dp[0]),
    )


def sample_thermal_events(thermal_map, thermal_scale, rng) -> set:
    """Per-pixel thresholded Bose-Einstein background: fires w.p. m/(1+m)."""
    m = thermal_scale * np.asarray(thermal_map, dtype=np.float64)
    p = m / (1.0 + m)
    fired = rng.random(p.shape) < p
    ys, xs = np.nonzero(fired)
    return set(zip(xs.tolist(), ys.tolist()))


def sample_dark_events(detector, width, height, rng) -> set:
    fired = rng.random((height, width)) < detector.dark_event_prob
    ys, xs = np.nonzero(fired)
    return set(zip(xs.tolist(), ys.tolist()))


def _distinct_ints(rng, n, k):
    """k distinct uniform ints in [0, n); exact, cheap for sparse k."""
    if k == 0:
        return np.empty(0, np.int64)
    if k * k > n:
        return rng.permutation(n)[:k]
    while True:
        v = rng.integers(0, n, size=k)
        if len(set(v.tolist())) == k:
            return v


def _bernoulli_field(rng, level_indices, p):
    k = rng.binomial(level_indices.size, p)
    if k == 0:
        return np.empty(0, np.int64)
    return level_indices[_distinct_ints(rng, level_indices.size, k)]


def _frame_events(scene, prep, rng):
    """One frame of events; returns flat pixel indices for probe and ref."""
    w = scene.width
    probe_idx = []
    ref_idx = []
    if scene.pair_rate > 0:
        k = rng.poisson(scene.pair_rate)
        if k > 0:
            ref, probe, on_sensor, dp, dr = _sample_pairs(rng, k, scene, prep)
            probe_idx.append(probe[dp, 1] * w + probe[dp, 0])
            ref_idx.append(ref[dr, 1] * w + ref[dr, 0])
    if prep.thermal_levels:
        gain = rng.gamma(1.0) if scene.thermal_bunching else 1.0
        for m, idx in prep.thermal_levels:
            gm = gain * m
            probe_idx.append(_bernoulli_field(rng, idx, gm / (1.0 + gm)))
    p_dark = scene.detector.dark_event_prob
    if p_dark > 0:
        dark = _bernoulli_field(rng, prep.dark_idx, p_dark)
        probe_idx.append(dark[dark < prep.npix])
        ref_idx.append(dark[dark >= prep.npix] - prep.npix)
    empty = np.empty(0, np.int64)
    return (np.concatenate(probe_idx) if probe_idx else empty,
            np.concatenate(ref_idx) if ref_idx else empty)


def generate_frame(scene: SceneConfig, rng) -> tuple:
    """One (probe, ref) frame pair from a caller-supplied stream."""
    prep = _ScenePrep.build(scene)
    p_idx, r_idx = _frame_events(scene, prep, rng)
    w, h = scene.width, scene.height
    pb = np.zeros(w * h, bool)
    pb[p_idx] = True
    rb = np.zeros(w * h, bool)
    rb[r_idx] = True
    return Frame.from_bool(pb.reshape(h, w)), Frame.from_bool(rb.reshape(h, w))


def _generate_packed_range(scene, start, count):
    """Packed probe/ref frames for indices [start, start+count)."""
    prep = _ScenePrep.build(scene)
    w, h = scene.width, scene.height
    rb = row_bytes(w)
    probe = np.zeros((count, h, rb), np.uint8)
    ref = np.zeros((count, h, rb), np.uint8)
    p_counts = np.zeros(count, np.int64)
    r_counts = np.zeros(count, np.int64)
    p_flat, r_flat = [], []
    streams = _FrameStreams(scene.seed)
    for i in range(count):
        rng = streams.for_frame(start + i)
        p_idx, r_idx = _frame_events(scene, prep, rng)
        p_counts[i] = p_idx.size
        r_counts[i] = r_idx.size
        p_flat.append(p_idx)
        r_flat.append(r_idx)
    for target, counts, parts in ((probe, p_counts, p_flat),
                                  (ref, r_counts, r_flat)):
        flat = np.concatenate(parts) if parts else np.empty(0, np.int64)
        if flat.size == 0:
            continue
        f = np.repeat(np.arange(count), counts)
        ys, xs = np.divmod(flat, w)
        np.bitwise_or.at(target, (f, ys, xs >> 3),
                         (1 << (xs & 7)).astype(np.uint8))
    return probe, ref


def generate_stack(scene: SceneConfig, n_frames: int, workers: int = 1):
    """Simulate (probe, ref) FrameStacks; bit-identical for any worker count."""
    validate_scene(scene)
    if n_frames < 1:
        raise ValidationError("n_frames must be >= 1")
    if workers <= 1:
        probe, ref = _generate_packed_range(scene, 0, n_frames)
    else:
        bounds = np.linspace(0, n_frames, workers + 1).astype(int)
        tasks = [(int(a), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:])
                 if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_range_task,
                                  [(scene, s, c) for s, c in tasks]))
        probe = np.concatenate([p for p, _ in parts])
        ref = np.concatenate([r for _, r in parts])
    w, h = scene.width, scene.height
    return FrameStack(w, h, probe), FrameStack(w, h, ref)


def _range_task(args):
    scene, start, count = args
    return _generate_packed_range(scene, start, count)
