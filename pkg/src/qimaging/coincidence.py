"""Coincidence analysis: pi-rotation, AND/classical accumulation, correlation.

Accumulation works on bit-packed frames in chunks; all reductions are integer
sums, so any partition of frames across workers combines to the exact
sequential result.
"""
from __future__ import annotations

import numpy as np

from .model import (CorrelationMap, CountImage, Frame, FrameStack,
                    ValidationError)

_CHUNK_FRAMES = 16384


def _check_center(center, width, height):
    if tuple(center) != (width - 1, height - 1):
        raise ValidationError(
            f"center {tuple(center)} incompatible with image parity; the "
            f"point reflection must map the {width}x{height} grid onto "
            f"itself (expected ({width - 1}, {height - 1}) in half-pixels)")


def rotate_pi(frame: Frame, center) -> Frame:
    """Point reflection of every event through the anticorrelation center."""
    _check_center(center, frame.width, frame.height)
    return Frame.from_bool(frame.to_bool()[::-1, ::-1])


def _unpack(packed, width):
    return np.unpackbits(packed, axis=-1, count=width, bitorder="little")


def _check_match(probe: FrameStack, ref: FrameStack):
    if (probe.width, probe.height) != (ref.width, ref.height):
        raise ValidationError("probe and ref stacks differ in dimensions")
    if probe.n_frames != ref.n_frames:
        raise ValidationError("probe and ref stacks differ in frame count")


def classical_accumulate(stack: FrameStack) -> CountImage:
    """Per-pixel sum of raw events over all frames."""
    acc = np.zeros((stack.height, stack.width), np.int64)
    for i in range(0, stack.n_frames, _CHUNK_FRAMES):
        chunk = _unpack(stack.packed[i:i + _CHUNK_FRAMES], stack.width)
        acc += chunk.sum(axis=0, dtype=np.int64)
    return CountImage(stack.width, stack.height, acc, stack.n_frames,
                      kind="classical")


def and_accumulate(probe: FrameStack, ref: FrameStack, geometry,
                   tolerance: int = 0) -> CountImage:
    """Sum of per-frame pixel-wise AND of probe and pi-rotated ref frames.

    tolerance > 0 dilates the rotated reference by a Chebyshev window before
    the AND (off by default; recorded in the result metadata).
    """
    _check_match(probe, ref)
    _check_center(geometry.center, probe.width, probe.height)
    acc = np.zeros((probe.height, probe.width), np.int64)
    for i in range(0, probe.n_frames, _CHUNK_FRAMES):
        pu = _unpack(probe.packed[i:i + _CHUNK_FRAMES], probe.width)
        ru = _unpack(ref.packed[i:i + _CHUNK_FRAMES], ref.width)
        rr = ru[:, ::-1, ::-1]
        if tolerance > 0:
            from scipy.ndimage import maximum_filter
            win = 2 * tolerance + 1
            rr = maximum_filter(rr, size=(1, win, win), mode="constant")
        acc += (pu & rr).sum(axis=0, dtype=np.int64)
    return CountImage(probe.width, probe.height, acc, probe.n_frames,
                      kind="and", meta={"tolerance": tolerance})


def accidental_baseline(probe: FrameStack, ref: FrameStack,
                        geometry) -> CountImage:
    """Expected AND counts if the streams were independent: N * p(x) * r(x)."""
    _check_match(probe, ref)
    _check_center(geometry.center, probe.width, probe.height)
    n = probe.n_frames
    p_mean = classical_accumulate(probe).counts / n
    r_mean = classical_accumulate(ref).counts[::-1, ::-1] / n
    return CountImage(probe.width, probe.height, n * p_mean * r_mean, n,
                      kind="baseline")


def _stack_events(stack: FrameStack):
    """All events as (frame, y, x) int arrays, ordered by frame index."""
    fs, ys, xs = [], [], []
    for i in range(0, stack.n_frames, _CHUNK_FRAMES):
        chunk = _unpack(stack.packed[i:i + _CHUNK_FRAMES], stack.width)
        coords = np.argwhere(chunk)
        fs.append(coords[:, 0] + i)
        ys.append(coords[:, 1])
        xs.append(coords[:, 2])
    return (np.concatenate(fs), np.concatenate(ys), np.concatenate(xs))


def cross_correlate(probe: FrameStack, ref: FrameStack, geometry,
                    max_disp: int) -> CorrelationMap:
    """Frame-wise cross-correlation of probe with the rotated reference,
    minus the accidental baseline from the per-pixel mean images.

    value(dx, dy) = (1/N) sum_f sum_x probe_f(x) * rotref_f(x + d)
                    - sum_x pbar(x) * rbar(x + d)
    with out-of-bounds x + d omitted from both sums.
    """
    _check_match(probe, ref)
    _check_center(geometry.center, probe.width, probe.height)
    if max_disp < 0:
        raise ValidationError("max_disp must be >= 0")
    n = probe.n_frames
    w, h = probe.width, probe.height
    d = max_disp

    pf, py, px = _stack_events(probe)
    rf, ry0, rx0 = _stack_events(ref)
    # rotate reference event coordinates
    rx = (w - 1) - rx0
    ry = (h - 1) - ry0

    # per-frame join: pair each probe event with every ref event of its frame
    n_ref = np.bincount(rf, minlength=n)
    ref_start = np.concatenate(([0], np.cumsum(n_ref)[:-1]))
    rep = n_ref[pf]
    total = int(rep.sum())
    hist = np.zeros((2 * d + 1, 2 * d + 1), np.float64)
    if total > 0:
        pi = np.repeat(np.arange(pf.size), rep)
        offs = np.arange(total) - np.repeat(np.cumsum(rep) - rep, rep)
        ri = ref_start[pf[pi]] + offs
        ddx = rx[ri] - px[pi]
        ddy = ry[ri] - py[pi]
        keep = (np.abs(ddx) <= d) & (np.abs(ddy) <= d)
        np.add.at(hist, (ddy[keep] + d, ddx[keep] + d), 1.0)
    hist /= n

    p_mean = np.zeros((h, w))
    np.add.at(p_mean, (py, px), 1.0)
    r_mean = np.zeros((h, w))
    np.add.at(r_mean, (ry, rx), 1.0)
    p_mean /= n
    r_mean /= n

    base = np.empty((2 * d + 1, 2 * d + 1))
    for dy in range(-d, d + 1):
        for dx in range(-d, d + 1):
            py0, py1 = max(0, -dy), min(h, h - dy)
            px0, px1 = max(0, -dx), min(w, w - dx)
            base[dy + d, dx + d] = np.sum(
                p_mean[py0:py1, px0:px1]
                * r_mean[py0 + dy:py1 + dy, px0 + dx:px1 + dx])
    return CorrelationMap(max_disp=d, values=hist - base)


def correlation_peak_stats(cmap: CorrelationMap) -> dict:
    """Peak location/amplitude and the std of all other displacements."""
    d = cmap.max_disp
    v = cmap.values
    iy, ix = np.unravel_index(np.argmax(v), v.shape)
    others = np.delete(v.ravel(), iy * v.shape[1] + ix)
    return {
        "peak_dx": int(ix - d),
        "peak_dy": int(iy - d),
        "peak_value": float(v[iy, ix]),
        "background_std": float(others.std()) if others.size else 0.0,
    }
