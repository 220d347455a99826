"""Deterministic synthetic "fruit field" scenes: colored disks on a gray
background, each with a hidden continuous maturity that drives its color,
a discrete stage label derived from that maturity, and the stage-to-
continuous target mapping used for training.

The trainer only ever consumes the discrete stage (via y_target); the
hidden y_true exists solely so the evaluation kit can measure whether
learned distributions recover the underlying continuum.

Dataset layout (bit-exact):
    <dir>/images/NNNNNN.ppm   binary P6, 8-bit, values floor(255*v + 0.5)
    <dir>/annotations.txt     one line per object:
                              image_index cx cy w h stage   (%.9g floats)
    <dir>/truths.txt          one line per object: image_index y_true
Scene pixels are quantized to the 8-bit grid at generation time, so a
write/read round trip reproduces images exactly and boxes to 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BoxCXCYWH
from .rng import Xoshiro256, substream

IMAGE_SIZE = 64
MIN_OBJECTS, MAX_OBJECTS = 1, 6
RADIUS_RANGE = (4.0, 10.0)
SEPARATION_FACTOR = 0.6
PLACEMENT_BUDGET = 1000
_RETRY_STRIDE = 65536  # substream key = scene_index * stride + retry

_GREEN = np.array([0.20, 0.70, 0.20])
_RED = np.array([0.85, 0.15, 0.10])
_DISK_NOISE = 0.03
_BG_GRAY = 0.45
_BG_NOISE = 0.05
_STAGE_EDGE_EPS = 1e-9  # redraw y_true this close to a stage boundary

STAGE_NAMES = ("unripe", "half-ripe", "ripe")


def stage_of(y_true: float) -> int:
    """Discrete stage from hidden maturity: thirds of [0, 1]."""
    if y_true < 1.0 / 3.0:
        return 0
    if y_true < 2.0 / 3.0:
        return 1
    return 2


def stage_to_target(stage: int) -> float:
    """Continuous training target per stage: midpoints of equal thirds.

    Midpoints avoid the interval endpoints, where the Beta NLL is
    singular.
    """
    if stage == 0:
        return 1.0 / 6.0
    if stage == 1:
        return 0.5
    if stage == 2:
        return 5.0 / 6.0
    raise ValueError(f"stage must be in {{0, 1, 2}}, got {stage}")


@dataclass(frozen=True)
class GroundTruthObject:
    box: BoxCXCYWH
    stage: int
    y_target: float
    y_true: float

    def __post_init__(self):
        if self.stage not in (0, 1, 2):
            raise ValueError(f"stage must be in {{0, 1, 2}}, got {self.stage}")
        if not (0.0 <= self.y_true <= 1.0):
            raise ValueError(f"y_true must be in [0, 1], got {self.y_true}")
        if stage_of(self.y_true) != self.stage:
            raise ValueError(
                f"stage {self.stage} inconsistent with y_true {self.y_true}")
        if self.y_target != stage_to_target(self.stage):
            raise ValueError(
                f"y_target {self.y_target} is not the mapping of stage {self.stage}")


@dataclass
class Scene:
    image: np.ndarray  # (IMAGE_SIZE, IMAGE_SIZE, 3) float64 on the 8-bit grid
    objects: list[GroundTruthObject]


def _quantize(v: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(v, 0.0, 1.0) * 255.0 + 0.5) / 255.0


def _try_scene(rng: Xoshiro256) -> Scene | None:
    """One generation attempt; None if the placement budget is exhausted.

    Draw order (fixed for reproducibility): object count; per object
    radius then center attempts; per object y_true; background noise
    row-major; disk noise per object in placement order, covered pixels
    row-major, channels last. Later disks draw over earlier ones.
    """
    size = IMAGE_SIZE
    n_obj = rng.randint(MIN_OBJECTS, MAX_OBJECTS)

    radii: list[float] = []
    centers: list[tuple[float, float]] = []
    attempts = 0
    for _ in range(n_obj):
        r = rng.uniform_in(*RADIUS_RANGE)
        while True:
            attempts += 1
            if attempts > PLACEMENT_BUDGET:
                return None
            cx = rng.uniform_in(r, size - r)
            cy = rng.uniform_in(r, size - r)
            ok = all(
                math.hypot(cx - ox, cy - oy) >= SEPARATION_FACTOR * (r + orad)
                for (ox, oy), orad in zip(centers, radii)
            )
            if ok:
                break
        radii.append(r)
        centers.append((cx, cy))

    y_trues: list[float] = []
    for _ in range(n_obj):
        y = rng.uniform_open()
        while (abs(y - 1.0 / 3.0) < _STAGE_EDGE_EPS
               or abs(y - 2.0 / 3.0) < _STAGE_EDGE_EPS):
            y = rng.uniform_open()
        y_trues.append(y)

    bg = np.array(rng.uniforms(size * size * 3)).reshape(size, size, 3)
    image = _BG_GRAY + _BG_NOISE * (2.0 * bg - 1.0)

    objects: list[GroundTruthObject] = []
    for (cx, cy), r, y in zip(centers, radii, y_trues):
        base = (1.0 - y) * _GREEN + y * _RED
        row_lo = max(0, int(math.floor(cy - r)))
        row_hi = min(size - 1, int(math.ceil(cy + r)))
        for py in range(row_lo, row_hi + 1):
            dy = py + 0.5 - cy
            span = r * r - dy * dy
            if span < 0.0:
                continue
            half = math.sqrt(span)
            # pixel centers px + 0.5 within [cx - half, cx + half]
            x_lo = max(0, int(math.ceil(cx - half - 0.5)))
            x_hi = min(size - 1, int(math.floor(cx + half - 0.5)))
            if x_hi < x_lo:
                continue
            n_cov = x_hi - x_lo + 1
            noise = np.array(rng.uniforms(3 * n_cov)).reshape(n_cov, 3)
            image[py, x_lo:x_hi + 1, :] = base + _DISK_NOISE * (2.0 * noise - 1.0)

        x0 = max(cx - r, 0.0) / size
        x1 = min(cx + r, float(size)) / size
        y0 = max(cy - r, 0.0) / size
        y1 = min(cy + r, float(size)) / size
        stage = stage_of(y)
        objects.append(GroundTruthObject(
            box=BoxCXCYWH(0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0),
            stage=stage,
            y_target=stage_to_target(stage),
            y_true=y,
        ))

    return Scene(image=_quantize(image), objects=objects)


def generate(seed: int, n_scenes: int) -> list[Scene]:
    """n_scenes deterministic scenes; scene i uses substream i so scenes
    are reproducible independently of one another."""
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    scenes = []
    for i in range(n_scenes):
        retry = 0
        while True:
            scene = _try_scene(substream(seed, i * _RETRY_STRIDE + retry))
            if scene is not None:
                break
            retry += 1
        scenes.append(scene)
    return scenes


# ---------------------------------------------------------------------------
# Dataset files.

def _write_ppm(path: Path, image: np.ndarray) -> None:
    raw = np.floor(image * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (image.shape[1], image.shape[0]))
        f.write(raw.tobytes())


def _read_ppm(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P6":
            raise ValueError(f"{path}: not a binary P6 PPM")
        dims = f.readline().split()
        maxval = f.readline().strip()
        if len(dims) != 2 or maxval != b"255":
            raise ValueError(f"{path}: unsupported PPM header")
        w, h = int(dims[0]), int(dims[1])
        raw = np.frombuffer(f.read(w * h * 3), dtype=np.uint8)
    return raw.reshape(h, w, 3).astype(np.float64) / 255.0


def write_dataset(scenes: list[Scene], directory) -> None:
    """Write images/, annotations.txt, and the eval-only truths.txt."""
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    ann_lines = []
    truth_lines = []
    for i, scene in enumerate(scenes):
        _write_ppm(directory / "images" / f"{i:06d}.ppm", scene.image)
        for obj in scene.objects:
            b = obj.box
            ann_lines.append(
                f"{i} {b.cx:.9g} {b.cy:.9g} {b.w:.9g} {b.h:.9g} {obj.stage}")
            truth_lines.append(f"{i} {obj.y_true:.9g}")
    (directory / "annotations.txt").write_text("\n".join(ann_lines) + "\n")
    (directory / "truths.txt").write_text("\n".join(truth_lines) + "\n")


def read_dataset(directory) -> list[Scene]:
    """Read a dataset directory back into scenes; inverse of write_dataset."""
    directory = Path(directory)
    image_dir = directory / "images"
    if not image_dir.is_dir():
        raise ValueError(f"missing images directory under {directory}")
    image_paths = sorted(image_dir.glob("*.ppm"))
    images = [_read_ppm(p) for p in image_paths]

    raw: list[list[tuple]] = [[] for _ in images]
    ann_path = directory / "annotations.txt"
    for lineno, line in enumerate(ann_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"{ann_path}:{lineno}: expected 6 fields, got {len(parts)}")
        try:
            idx = int(parts[0])
            cx, cy, w, h = (float(v) for v in parts[1:5])
            stage = int(parts[5])
        except ValueError as e:
            raise ValueError(f"{ann_path}:{lineno}: {e}") from None
        if not (0 <= idx < len(images)):
            raise ValueError(f"{ann_path}:{lineno}: image index {idx} out of range")
        raw[idx].append((cx, cy, w, h, stage))

    truths: list[list[float]] = [[] for _ in images]
    truth_path = directory / "truths.txt"
    for lineno, line in enumerate(truth_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{truth_path}:{lineno}: expected 2 fields, got {len(parts)}")
        try:
            idx = int(parts[0])
            y = float(parts[1])
        except ValueError as e:
            raise ValueError(f"{truth_path}:{lineno}: {e}") from None
        if not (0 <= idx < len(images)):
            raise ValueError(f"{truth_path}:{lineno}: image index {idx} out of range")
        truths[idx].append(y)

    scenes = []
    for i, image in enumerate(images):
        if not raw[i]:
            raise ValueError(f"image {i} has no annotated objects (minimum is 1)")
        if len(raw[i]) != len(truths[i]):
            raise ValueError(
                f"image {i}: {len(raw[i])} annotations but {len(truths[i])} truth lines")
        objects = []
        for (cx, cy, w, h, stage), y_true in zip(raw[i], truths[i]):
            objects.append(GroundTruthObject(
                box=BoxCXCYWH(cx, cy, w, h),
                stage=stage,
                y_target=stage_to_target(stage),
                y_true=y_true,
            ))
        scenes.append(Scene(image=image, objects=objects))
    return scenes
