"""Domain types, scene configuration, and validation shared by all modules.

Conventions: arrays are indexed [y, x]; event coordinates are (x, y) tuples;
the anticorrelation center is stored in half-pixel units so that a point
reflection of an odd-sized grid about its central pixel is an exact index
permutation (e.g. a 49x49 image reflects about stored center (48, 48)).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

DEFAULT_SIGMA_PX = 4.0 / 13.0  # 4 um correlation width over a 13 um pixel pitch
DEFAULT_DARK_EVENT_PROB = 0.0016


class ValidationError(ValueError):
    """A config, frame, or input violates a documented invariant."""


class AnalysisError(ValueError):
    """An analysis operation is undefined for the given inputs."""


def _require(cond, msg):
    if not cond:
        raise ValidationError(msg)


def row_bytes(width: int) -> int:
    return (width + 7) // 8


class Frame:
    """A binary per-pixel event map for one beam in one exposure.

    Pixels are stored bit-packed, LSB-first within each byte, rows padded to a
    byte boundary. A pixel holds at most one event (thresholded detection).
    """

    __slots__ = ("width", "height", "packed")

    def __init__(self, width: int, height: int, packed: np.ndarray):
        _require(width >= 1 and height >= 1, "frame dimensions must be >= 1")
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        if packed.shape != (height, row_bytes(width)):
            raise ValidationError(
                f"packed shape {packed.shape} does not match "
                f"({height}, {row_bytes(width)})"
            )
        self.width = width
        self.height = height
        self.packed = packed

    @classmethod
    def empty(cls, width, height):
        return cls(width, height, np.zeros((height, row_bytes(width)), np.uint8))

    @classmethod
    def from_bool(cls, arr) -> "Frame":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValidationError("frame array must be 2-D")
        h, w = arr.shape
        packed = np.packbits(arr.astype(np.uint8), axis=-1, bitorder="little")
        return cls(w, h, packed)

    @classmethod
    def from_events(cls, width, height, events) -> "Frame":
        arr = np.zeros((height, width), bool)
        for x, y in events:
            if not (0 <= x < width and 0 <= y < height):
                raise ValidationError(f"event ({x}, {y}) out of bounds")
            arr[y, x] = True
        return cls.from_bool(arr)

    def to_bool(self) -> np.ndarray:
        return np.unpackbits(
            self.packed, axis=-1, count=self.width, bitorder="little"
        ).astype(bool)

    @property
    def events(self) -> frozenset:
        ys, xs = np.nonzero(self.to_bool())
        return frozenset(zip(xs.tolist(), ys.tolist()))

    @property
    def n_events(self) -> int:
        return int(np.unpackbits(self.packed, axis=-1, count=self.width,
                                 bitorder="little").sum())

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.width == other.width
            and self.height == other.height
            and np.array_equal(self.packed, other.packed)
        )

    def __repr__(self):
        return f"Frame({self.width}x{self.height}, {self.n_events} events)"


class FrameStack:
    """An ordered acquisition of frames sharing one geometry."""

    __slots__ = ("width", "height", "packed")

    def __init__(self, width: int, height: int, packed: np.ndarray):
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        if packed.ndim != 3 or packed.shape[1:] != (height, row_bytes(width)):
            raise ValidationError("packed stack shape mismatch")
        self.width = width
        self.height = height
        self.packed = packed

    @property
    def n_frames(self) -> int:
        return self.packed.shape[0]

    @classmethod
    def from_frames(cls, frames) -> "FrameStack":
        frames = list(frames)
        _require(len(frames) > 0, "frame stack must be non-empty")
        w, h = frames[0].width, frames[0].height
        for f in frames:
            _require((f.width, f.height) == (w, h),
                     "all frames in a stack must share dimensions")
        return cls(w, h, np.stack([f.packed for f in frames]))

    @classmethod
    def from_bool(cls, arr) -> "FrameStack":
        arr = np.asarray(arr)
        n, h, w = arr.shape
        packed = np.packbits(arr.astype(np.uint8), axis=-1, bitorder="little")
        return cls(w, h, packed)

    def frame(self, i: int) -> Frame:
        return Frame(self.width, self.height, self.packed[i])

    def __iter__(self):
        for i in range(self.n_frames):
            yield self.frame(i)

    def __eq__(self, other):
        return (
            isinstance(other, FrameStack)
            and self.width == other.width
            and self.height == other.height
            and np.array_equal(self.packed, other.packed)
        )

    def __repr__(self):
        return f"FrameStack({self.n_frames} x {self.width}x{self.height})"


@dataclass(frozen=True)
class Roi:
    """A labelled region: either a rectangle (x0, y0, w, h) or explicit pixels."""

    label: str = ""
    rect: tuple | None = None
    pixels: tuple | None = None

    def __post_init__(self):
        if (self.rect is None) == (self.pixels is None):
            raise ValidationError("Roi needs exactly one of rect or pixels")
        if self.rect is not None:
            x0, y0, w, h = self.rect
            _require(w >= 1 and h >= 1, f"Roi '{self.label}' is empty")
        else:
            _require(len(self.pixels) > 0, f"Roi '{self.label}' is empty")

    def mask(self, width: int, height: int) -> np.ndarray:
        m = np.zeros((height, width), bool)
        if self.rect is not None:
            x0, y0, w, h = self.rect
            _require(
                0 <= x0 and 0 <= y0 and x0 + w <= width and y0 + h <= height,
                f"Roi '{self.label}' rect {self.rect} exceeds {width}x{height}",
            )
            m[y0:y0 + h, x0:x0 + w] = True
        else:
            for x, y in self.pixels:
                _require(0 <= x < width and 0 <= y < height,
                         f"Roi '{self.label}' pixel ({x}, {y}) out of bounds")
                m[y, x] = True
        return m

    def n_pixels(self) -> int:
        if self.rect is not None:
            return self.rect[2] * self.rect[3]
        return len(set(self.pixels))


@dataclass(frozen=True)
class CorrelationGeometry:
    """Anticorrelation center (half-pixel units) and pair correlation width."""

    center: tuple = (48, 48)
    sigma_px: float = DEFAULT_SIGMA_PX

    def center_px(self):
        return (self.center[0] / 2.0, self.center[1] / 2.0)


@dataclass(frozen=True)
class DetectorModel:
    qe_probe: float = 1.0
    qe_ref: float = 1.0
    dark_event_prob: float = DEFAULT_DARK_EVENT_PROB


@dataclass(eq=False)
class SceneConfig:
    """Full statistical description of source, object, background, and sensor."""

    width: int = 49
    height: int = 49
    pair_rate: float = 3.84
    pump_sigma_px: float = 20.0
    geometry: CorrelationGeometry | None = None
    object_map: np.ndarray | None = None
    thermal_map: np.ndarray | None = None
    thermal_scale: float = 1.0
    probe_loss_eta: float = 1.0
    detector: DetectorModel = field(default_factory=DetectorModel)
    seed: int = 0
    thermal_bunching: bool = False

    def __post_init__(self):
        if self.geometry is None:
            self.geometry = CorrelationGeometry(
                (self.width - 1, self.height - 1), DEFAULT_SIGMA_PX)
        if self.object_map is None:
            self.object_map = np.ones((self.height, self.width))
        if self.thermal_map is None:
            self.thermal_map = np.zeros((self.height, self.width))
        self.object_map = np.asarray(self.object_map, dtype=np.float64)
        self.thermal_map = np.asarray(self.thermal_map, dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, SceneConfig):
            return NotImplemented
        scalar = (
            "width height pair_rate pump_sigma_px geometry thermal_scale "
            "probe_loss_eta detector seed thermal_bunching".split()
        )
        return all(getattr(self, k) == getattr(other, k) for k in scalar) and (
            np.array_equal(self.object_map, other.object_map)
            and np.array_equal(self.thermal_map, other.thermal_map)
        )


def validate_scene(scene: SceneConfig) -> SceneConfig:
    """Check every scene invariant; raise naming the first violated field."""
    _require(isinstance(scene.width, (int, np.integer)) and scene.width >= 1,
             "width must be an integer >= 1")
    _require(isinstance(scene.height, (int, np.integer)) and scene.height >= 1,
             "height must be an integer >= 1")
    _require(scene.pair_rate >= 0, "pair_rate must be >= 0")
    _require(scene.pump_sigma_px > 0, "pump_sigma_px must be > 0")
    geo = scene.geometry
    _require(len(geo.center) == 2 and all(
        float(c).is_integer() for c in geo.center),
        "geometry.center must be two integers in half-pixel units")
    _require(geo.sigma_px >= 0, "geometry.sigma_px must be >= 0")
    cx, cy = geo.center_px()
    _require(0 <= cx <= scene.width - 1 and 0 <= cy <= scene.height - 1,
             "geometry.center outside the sensor after halving")
    _require(scene.object_map.shape == (scene.height, scene.width),
             f"object_map dimensions {scene.object_map.shape} do not match "
             f"({scene.height}, {scene.width})")
    _require(scene.thermal_map.shape == (scene.height, scene.width),
             f"thermal_map dimensions {scene.thermal_map.shape} do not match "
             f"({scene.height}, {scene.width})")
    _require(np.all(scene.object_map >= 0) and np.all(scene.object_map <= 1),
             "object_map values out of [0,1]")
    _require(np.all(scene.thermal_map >= 0), "thermal_map values must be >= 0")
    _require(scene.thermal_scale >= 0, "thermal_scale must be >= 0")
    _require(0 <= scene.probe_loss_eta <= 1, "probe_loss_eta out of [0,1]")
    det = scene.detector
    _require(0 <= det.qe_probe <= 1, "detector.qe_probe out of [0,1]")
    _require(0 <= det.qe_ref <= 1, "detector.qe_ref out of [0,1]")
    _require(0 <= det.dark_event_prob <= 1,
             "detector.dark_event_prob out of [0,1]")
    _require(isinstance(scene.seed, (int, np.integer)) and scene.seed >= 0,
             "seed must be a non-negative integer")
    scene.object_map.flags.writeable = False
    scene.thermal_map.flags.writeable = False
    return scene


# ---------------------------------------------------------------------------
# built-in map generators (test shapes standing in for cut-card objects/masks)

def make_map(spec: dict, width: int, height: int) -> np.ndarray:
    kind = spec.get("generator")
    params = {k: v for k, v in spec.items() if k != "generator"}
    if kind == "uniform":
        return np.full((height, width), float(params.get("value", 1.0)))
    if kind == "disk":
        cx = params.get("cx", (width - 1) / 2)
        cy = params.get("cy", (height - 1) / 2)
        radius = params["radius"]
        value = float(params.get("value", 1.0))
        background = float(params.get("background", 0.0))
        yy, xx = np.mgrid[0:height, 0:width]
        m = np.full((height, width), background)
        m[(xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2] = value
        return m
    if kind == "bars":
        pitch = int(params["pitch"])
        bar_width = int(params.get("bar_width", 1))
        axis = params.get("axis", "x")
        phase = int(params.get("phase", 0))
        value = float(params.get("value", 1.0))
        m = np.zeros((height, width))
        if axis in ("x", "both"):
            cols = (np.arange(width) + phase) % pitch < bar_width
            m[:, cols] = value
        if axis in ("y", "both"):
            rows = (np.arange(height) + phase) % pitch < bar_width
            m[rows, :] = value
        return m
    if kind == "letters":
        from PIL import Image, ImageDraw
        text = str(params.get("text", "QI"))
        value = float(params.get("value", 1.0))
        img = Image.new("L", (width, height), 0)
        draw = ImageDraw.Draw(img)
        # default bitmap font; center the text box on the grid
        box = draw.textbbox((0, 0), text)
        x0 = (width - (box[2] - box[0])) // 2 - box[0]
        y0 = (height - (box[3] - box[1])) // 2 - box[1]
        draw.text((x0, y0), text, fill=255)
        return (np.asarray(img, dtype=np.float64) / 255.0 > 0.5) * value
    raise ValidationError(f"unknown map generator {kind!r}")


def _resolve_map(value, width, height, base_dir):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return np.full((height, width), float(value))
    if isinstance(value, str):
        from .pipeline_io import read_map
        path = Path(value)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return read_map(path)
    if isinstance(value, dict):
        return make_map(value, width, height)
    return np.asarray(value, dtype=np.float64)


_SCENE_KEYS = (
    "width height pair_rate pump_sigma_px geometry object_map thermal_map "
    "thermal_scale probe_loss_eta detector seed thermal_bunching".split()
)


def scene_from_dict(d: dict, base_dir=None) -> SceneConfig:
    unknown = set(d) - set(_SCENE_KEYS)
    if unknown:
        raise ValidationError(f"unknown scene key(s): {sorted(unknown)}")
    width = int(d.get("width", 49))
    height = int(d.get("height", 49))
    geometry = None
    if "geometry" in d and d["geometry"] is not None:
        g = dict(d["geometry"])
        g_unknown = set(g) - {"center", "sigma_px"}
        if g_unknown:
            raise ValidationError(f"unknown geometry key(s): {sorted(g_unknown)}")
        geometry = CorrelationGeometry(
            center=tuple(int(c) for c in g.get("center", (width - 1, height - 1))),
            sigma_px=float(g.get("sigma_px", DEFAULT_SIGMA_PX)),
        )
    detector = DetectorModel()
    if "detector" in d and d["detector"] is not None:
        det = dict(d["detector"])
        d_unknown = set(det) - {"qe_probe", "qe_ref", "dark_event_prob"}
        if d_unknown:
            raise ValidationError(f"unknown detector key(s): {sorted(d_unknown)}")
        detector = DetectorModel(
            qe_probe=float(det.get("qe_probe", 1.0)),
            qe_ref=float(det.get("qe_ref", 1.0)),
            dark_event_prob=float(det.get("dark_event_prob",
                                          DEFAULT_DARK_EVENT_PROB)),
        )
    scene = SceneConfig(
        width=width,
        height=height,
        pair_rate=float(d.get("pair_rate", 3.84)),
        pump_sigma_px=float(d.get("pump_sigma_px", 20.0)),
        geometry=geometry,
        object_map=_resolve_map(d.get("object_map"), width, height, base_dir),
        thermal_map=_resolve_map(d.get("thermal_map"), width, height, base_dir),
        thermal_scale=float(d.get("thermal_scale", 1.0)),
        probe_loss_eta=float(d.get("probe_loss_eta", 1.0)),
        detector=detector,
        seed=int(d.get("seed", 0)),
        thermal_bunching=bool(d.get("thermal_bunching", False)),
    )
    return validate_scene(scene)


def scene_to_dict(scene: SceneConfig) -> dict:
    return {
        "width": scene.width,
        "height": scene.height,
        "pair_rate": scene.pair_rate,
        "pump_sigma_px": scene.pump_sigma_px,
        "geometry": {
            "center": list(scene.geometry.center),
            "sigma_px": scene.geometry.sigma_px,
        },
        "object_map": scene.object_map.tolist(),
        "thermal_map": scene.thermal_map.tolist(),
        "thermal_scale": scene.thermal_scale,
        "probe_loss_eta": scene.probe_loss_eta,
        "detector": asdict(scene.detector),
        "seed": scene.seed,
        "thermal_bunching": scene.thermal_bunching,
    }


def load_scene(path) -> SceneConfig:
    path = Path(path)
    with open(path) as f:
        d = json.load(f)
    return scene_from_dict(d, base_dir=path.parent)


def save_scene(scene: SceneConfig, path):
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2)


# ---------------------------------------------------------------------------
# accumulation / analysis result containers

@dataclass(eq=False)
class CountImage:
    """Per-pixel accumulated counts with frame-count provenance."""

    width: int
    height: int
    counts: np.ndarray
    n_frames_accumulated: int
    kind: str  # classical | and | baseline
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (self.height, self.width):
            raise ValidationError("counts shape does not match image dimensions")

    def __eq__(self, other):
        return (
            isinstance(other, CountImage)
            and (self.width, self.height, self.kind, self.n_frames_accumulated)
            == (other.width, other.height, other.kind, other.n_frames_accumulated)
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(eq=False)
class CorrelationMap:
    """Accidental-subtracted coincidence strength per displacement."""

    max_disp: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        d = 2 * self.max_disp + 1
        if self.values.shape != (d, d):
            raise ValidationError("correlation map shape must be (2D+1, 2D+1)")

    def value(self, dx: int, dy: int) -> float:
        return float(self.values[dy + self.max_disp, dx + self.max_disp])


@dataclass
class AnalysisReport:
    v_classical: float | None
    v_quantum: float | None
    advantage: float | None
    noise_rejection: float | None
    totals: dict
    config: dict
