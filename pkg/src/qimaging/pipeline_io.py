"""Bit-exact stack persistence (QIFS), PGM/PNG maps and images, reports.

QIFS layout, all little-endian: magic "QIFS", version u16 = 1, width u16,
height u16, n_frames u64, then frames in order; each frame is `height` rows,
each row bit-packed LSB-first and padded to a byte boundary.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import AnalysisReport, CountImage, FrameStack, row_bytes

QIFS_MAGIC = b"QIFS"
QIFS_VERSION = 1
_HEADER = struct.Struct("<4sHHHQ")


class FormatError(ValueError):
    """Malformed or unsupported file content."""


def write_stack(stack: FrameStack, path) -> None:
    if stack.width > 0xFFFF or stack.height > 0xFFFF:
        raise FormatError("stack dimensions overflow u16")
    header = _HEADER.pack(QIFS_MAGIC, QIFS_VERSION, stack.width,
                          stack.height, stack.n_frames)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(stack.packed).tobytes())


def read_stack(path) -> FrameStack:
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError("truncated QIFS header")
        magic, version, width, height, n_frames = _HEADER.unpack(header)
        if magic != QIFS_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {QIFS_MAGIC!r}")
        if version != QIFS_VERSION:
            raise FormatError(f"unsupported QIFS version {version}")
        if width < 1 or height < 1:
            raise FormatError("QIFS dimensions must be >= 1")
        body = np.fromfile(f, dtype=np.uint8)
    expected = n_frames * height * row_bytes(width)
    if body.size != expected:
        raise FormatError(
            f"truncated QIFS body: got {body.size} bytes, expected {expected}")
    packed = body.reshape(n_frames, height, row_bytes(width))
    return FrameStack(width, height, packed)


# ---------------------------------------------------------------------------
# grayscale maps and rendered images

def read_map(path) -> np.ndarray:
    """P5 PGM (maxval 255 or 65535) scaled to [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("malformed PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise FormatError(f"not a P5 PGM: magic {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("malformed PGM header") from None
    if maxval == 255:
        dtype, nbytes = np.uint8, 1
    elif maxval == 65535:
        dtype, nbytes = ">u2", 2
    else:
        raise FormatError(f"unsupported PGM maxval {maxval}")
    body = data[pos:pos + width * height * nbytes]
    if len(body) != width * height * nbytes:
        raise FormatError("truncated PGM body")
    arr = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return arr.astype(np.float64) / maxval


def write_pgm(values: np.ndarray, path, maxval: int = 255) -> None:
    """values in [0, 1] quantized to a P5 PGM."""
    if maxval not in (255, 65535):
        raise FormatError(f"unsupported PGM maxval {maxval}")
    q = np.clip(np.rint(np.asarray(values) * maxval), 0, maxval)
    body = (q.astype(np.uint8).tobytes() if maxval == 255
            else q.astype(">u2").tobytes())
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{maxval}\n".encode())
        f.write(body)


def write_image(image: CountImage, path, normalization: str = "linear"):
    """Render counts to 8-bit gray (PGM or PNG); sidecar JSON records scaling."""
    path = Path(path)
    counts = np.asarray(image.counts, dtype=np.float64)
    peak = counts.max()
    if normalization == "linear":
        norm = counts / peak if peak > 0 else counts
    elif normalization == "log":
        norm = np.log1p(counts) / np.log1p(peak) if peak > 0 else counts
    else:
        raise FormatError(f"unknown normalization {normalization!r}")
    if path.suffix.lower() == ".pgm":
        write_pgm(norm, path)
    elif path.suffix.lower() == ".png":
        from PIL import Image
        gray = np.clip(np.rint(norm * 255), 0, 255).astype(np.uint8)
        Image.fromarray(gray, mode="L").save(path)
    else:
        raise FormatError(f"unsupported image suffix {path.suffix!r}")
    sidecar = {
        "normalization": normalization,
        "max_count": float(peak),
        "kind": image.kind,
        "n_frames_accumulated": image.n_frames_accumulated,
        "meta": image.meta,
    }
    with open(path.with_suffix(path.suffix + ".norm.json"), "w") as f:
        json.dump(sidecar, f, indent=2)


# ---------------------------------------------------------------------------
# reports and profiles

def _json_safe(x):
    if isinstance(x, float) and math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _json_restore(x):
    if x == "+inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    if x == "nan":
        return math.nan
    if isinstance(x, dict):
        return {k: _json_restore(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_restore(v) for v in x]
    return x


def write_report(report: AnalysisReport, path) -> None:
    from . import __version__
    payload = _json_safe(asdict(report))
    payload["software_version"] = __version__
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)


def read_report(path) -> AnalysisReport:
    with open(path) as f:
        payload = _json_restore(json.load(f))
    payload.pop("software_version", None)
    return AnalysisReport(**payload)


def write_profiles(profiles, path) -> None:
    """CSV of cut profiles: header row, one row per pixel index."""
    row_profile, col_profile = profiles
    n = max(len(row_profile), len(col_profile))
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["index", "row_profile", "col_profile"])
        for i in range(n):
            wr.writerow([
                i,
                row_profile[i] if i < len(row_profile) else "",
                col_profile[i] if i < len(col_profile) else "",
            ])
