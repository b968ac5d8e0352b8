"""KAIST-style paired thermal/RGB dataset handling plus a synthetic desk-scale stand-in.

Images are 8-bit PNGs on disk. In memory they are float32 arrays shaped
(channels, height, width) with values in [-1, 1] (the tanh convention used by
every generator in this package). IR rasters are single-channel; RGB rasters
are 3-channel.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

TIMES_OF_DAY = ("day", "night")
SPLITS = ("train", "test")

# categories the evaluation module accepts; the toy generator draws from these
VEHICLE_CATEGORIES = ("car", "bus", "truck", "motorcycle", "bicycle")


class ManifestError(ValueError):
    """A dataset manifest is missing, malformed, or violates an invariant."""


@dataclass(frozen=True)
class SamplePair:
    """One IR frame, optionally registered with an RGB frame of the same scene."""

    id: str
    ir_path: Path
    rgb_path: Path | None
    time_of_day: str
    split: str

    @property
    def paired(self) -> bool:
        return self.rgb_path is not None


@dataclass
class DatasetManifest:
    samples: list[SamplePair]
    root: Path
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a JSON-lines manifest; one object per sample.

    Each record is {"id", "ir", "rgb", "tod", "split"} with paths relative to
    the manifest's directory. Order is preserved. Raises ManifestError with a
    line number for malformed records, duplicate ids, and unresolvable paths.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    root = path.parent.resolve()
    samples: list[SamplePair] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: malformed record: {exc}") from exc
            if not isinstance(rec, dict):
                raise ManifestError(f"line {lineno}: record is not an object")
            for key in ("id", "ir", "tod", "split"):
                if key not in rec:
                    raise ManifestError(f"line {lineno}: missing field {key!r}")
            sample_id = rec["id"]
            if sample_id in seen:
                raise ManifestError(
                    f"duplicate sample id {sample_id!r} on lines {seen[sample_id]} and {lineno}"
                )
            seen[sample_id] = lineno
            if rec["tod"] not in TIMES_OF_DAY:
                raise ManifestError(f"line {lineno}: bad tod {rec['tod']!r}")
            if rec["split"] not in SPLITS:
                raise ManifestError(f"line {lineno}: bad split {rec['split']!r}")
            ir_path = (root / rec["ir"]).resolve()
            if not ir_path.is_file():
                raise ManifestError(f"line {lineno}: unresolvable path: {rec['ir']}")
            rgb_path = None
            if rec.get("rgb") is not None:
                rgb_path = (root / rec["rgb"]).resolve()
                if not rgb_path.is_file():
                    raise ManifestError(f"line {lineno}: unresolvable path: {rec['rgb']}")
            samples.append(
                SamplePair(
                    id=sample_id,
                    ir_path=ir_path,
                    rgb_path=rgb_path,
                    time_of_day=rec["tod"],
                    split=rec["split"],
                )
            )
    return DatasetManifest(samples=samples, root=root, meta={"path": str(path)})


def save_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    """Write the manifest as JSON-lines with paths relative to its directory."""
    path = Path(path)
    root = path.parent.resolve()
    with open(path, "w", encoding="utf-8") as fh:
        for s in manifest.samples:
            rec = {
                "id": s.id,
                "ir": os.path.relpath(s.ir_path, root),
                "rgb": None if s.rgb_path is None else os.path.relpath(s.rgb_path, root),
                "tod": s.time_of_day,
                "split": s.split,
            }
            fh.write(json.dumps(rec) + "\n")
    return path


def filter_samples(
    manifest: DatasetManifest,
    time_of_day: str | None = None,
    split: str | None = None,
    paired_only: bool = False,
) -> list[SamplePair]:
    """Samples matching every given predicate, in manifest order."""
    if time_of_day is not None and time_of_day not in TIMES_OF_DAY:
        raise ValueError(f"bad time_of_day {time_of_day!r}")
    if split is not None and split not in SPLITS:
        raise ValueError(f"bad split {split!r}")
    out = []
    for s in manifest.samples:
        if time_of_day is not None and s.time_of_day != time_of_day:
            continue
        if split is not None and s.split != split:
            continue
        if paired_only and not s.paired:
            continue
        out.append(s)
    return out


def load_image(path: str | Path, expected_channels: int) -> np.ndarray:
    """Decode an 8-bit PNG to a float32 (C, H, W) array in [-1, 1].

    Each 8-bit value v maps to v/127.5 - 1. The file must carry exactly the
    expected channel count (mode L for 1, RGB for 3); no silent conversion.
    """
    if expected_channels not in (1, 3):
        raise ValueError(f"expected_channels must be 1 or 3, got {expected_channels}")
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from exc
    want_mode = "L" if expected_channels == 1 else "RGB"
    if img.mode != want_mode:
        raise ValueError(
            f"{path}: expected {expected_channels}-channel ({want_mode}) image, got mode {img.mode}"
        )
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return arr / 127.5 - 1.0


def save_image(path: str | Path, tensor: np.ndarray) -> Path:
    """Write a (C, H, W) array in [-1, 1] as an 8-bit PNG (the inverse affine map)."""
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ValueError(f"expected (C, H, W) with C in {{1, 3}}, got shape {arr.shape}")
    u8 = np.clip(np.round((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)
    if u8.shape[0] == 1:
        img = Image.fromarray(u8[0], mode="L")
    else:
        img = Image.fromarray(u8.transpose(1, 2, 0), mode="RGB")
    path = Path(path)
    img.save(path, format="PNG")
    return path


def verify_manifest(manifest: DatasetManifest) -> None:
    """Deep-check sample invariants: IR decodes 1-channel, RGB 3-channel, sizes match."""
    for s in manifest.samples:
        ir = load_image(s.ir_path, 1)
        if s.rgb_path is not None:
            rgb = load_image(s.rgb_path, 3)
            if ir.shape[1:] != rgb.shape[1:]:
                raise ManifestError(
                    f"sample {s.id!r}: IR {ir.shape[1:]} and RGB {rgb.shape[1:]} sizes differ"
                )


# ---------------------------------------------------------------------------
# synthetic toy dataset
# ---------------------------------------------------------------------------

# clean IR intensities per region; night values compress the day deltas toward
# a common ambient level, so per-scene contrast (mean abs deviation) is lower
# at night by construction
_IR_DAY = {"sky": 40.0, "ground": 55.0, "road": 85.0, "vehicle": 230.0}
_IR_NIGHT_BASE = 92.0
_IR_NIGHT_SCALE = 0.38
_IR_NOISE_DAY = 8.0
_IR_NOISE_NIGHT = 4.0

_VEHICLE_PALETTE = (
    (200, 60, 50),
    (60, 90, 200),
    (220, 200, 60),
    (70, 170, 140),
    (180, 120, 190),
)
_TOY_CATEGORIES = ("car", "car", "car", "bus", "truck")


def _render_scene(rng: np.random.Generator, size: int):
    """Render one scene as four registered rasters plus its vehicle boxes."""
    s = size
    horizon = int(s * 0.35)
    road_top = int(s * 0.50)
    road_bot = int(s * 0.85)

    n_vehicles = int(rng.integers(0, 5))
    boxes = []
    vehicles = []
    for _ in range(n_vehicles):
        w = int(rng.integers(max(6, s // 8), s // 4 + 1))
        h = int(rng.integers(max(4, s // 10), s // 6 + 1))
        x = int(rng.integers(2, s - 2 - w))
        y = int(rng.integers(road_top + 1, road_bot - h))
        color = _VEHICLE_PALETTE[int(rng.integers(0, len(_VEHICLE_PALETTE)))]
        category = _TOY_CATEGORIES[int(rng.integers(0, len(_TOY_CATEGORIES)))]
        boxes.append({"x": float(x), "y": float(y), "w": float(w), "h": float(h), "category": category})
        vehicles.append((x, y, w, h, color))

    day_rgb = np.empty((s, s, 3), dtype=np.float64)
    day_rgb[:horizon] = (140, 180, 220)
    day_rgb[horizon:] = (120, 150, 95)
    day_rgb[road_top:road_bot] = (90, 90, 95)
    lane = (road_top + road_bot) // 2
    day_rgb[lane : lane + 1] = (200, 200, 190)
    for x, y, w, h, color in vehicles:
        day_rgb[y : y + h, x : x + w] = color

    ir_day = np.empty((s, s), dtype=np.float64)
    ir_day[:horizon] = _IR_DAY["sky"]
    ir_day[horizon:] = _IR_DAY["ground"]
    ir_day[road_top:road_bot] = _IR_DAY["road"]
    for x, y, w, h, _ in vehicles:
        ir_day[y : y + h, x : x + w] = _IR_DAY["vehicle"]
    ir_night = _IR_NIGHT_BASE + _IR_NIGHT_SCALE * (ir_day - _IR_DAY["sky"])

    night_rgb = day_rgb * 0.22 + np.array([8.0, 10.0, 24.0])
    yy, xx = np.mgrid[0:s, 0:s]
    radius = max(2.0, s / 24.0)
    for x, y, w, h, _ in vehicles:
        for hx in (x + w // 6, x + w - 1 - w // 6):
            hy = y + h - 1
            blob = 230.0 * np.exp(-(((xx - hx) ** 2 + (yy - hy) ** 2) / (2.0 * radius**2)))
            night_rgb += blob[..., None]

    # noise fields drawn in a fixed order so the stream is reproducible
    day_rgb += rng.normal(0.0, 5.0, (s, s, 3))
    night_rgb += rng.normal(0.0, 3.0, (s, s, 3))
    ir_day += rng.normal(0.0, _IR_NOISE_DAY, (s, s))
    ir_night += rng.normal(0.0, _IR_NOISE_NIGHT, (s, s))

    def to_u8(a):
        return np.clip(np.round(a), 0, 255).astype(np.uint8)

    return {
        "day_rgb": to_u8(day_rgb),
        "night_rgb": to_u8(night_rgb),
        "day_ir": to_u8(ir_day),
        "night_ir": to_u8(ir_night),
        "boxes": boxes,
    }


def synth_toy_dataset(
    out_dir: str | Path, n_pairs: int, image_size: int, seed: int
) -> DatasetManifest:
    """Render a deterministic toy dataset of n_pairs scenes.

    Each scene produces four registered rasters (day-RGB, day-IR, night-RGB,
    night-IR) under out_dir/images, two manifest samples (day + night), and
    one annotation line per vehicle box keyed by the night sample id. Night-IR
    contrast is lower than day-IR per scene by construction. Identical
    arguments produce byte-identical files.
    """
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    if image_size < 32:
        raise ValueError(f"image_size must be >= 32, got {image_size}")
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    samples: list[SamplePair] = []
    ann_lines: list[str] = []
    for i in range(n_pairs):
        rng = np.random.default_rng([seed, i])
        scene = _render_scene(rng, image_size)
        day_id = f"scene{i:04d}_day"
        night_id = f"scene{i:04d}_night"
        files = {
            f"{day_id}_ir.png": scene["day_ir"],
            f"{day_id}_rgb.png": scene["day_rgb"],
            f"{night_id}_ir.png": scene["night_ir"],
            f"{night_id}_rgb.png": scene["night_rgb"],
        }
        for name, arr in files.items():
            if arr.ndim == 2:
                Image.fromarray(arr, mode="L").save(images_dir / name, format="PNG")
            else:
                Image.fromarray(arr, mode="RGB").save(images_dir / name, format="PNG")
        for sid in (day_id, night_id):
            samples.append(
                SamplePair(
                    id=sid,
                    ir_path=(images_dir / f"{sid}_ir.png").resolve(),
                    rgb_path=(images_dir / f"{sid}_rgb.png").resolve(),
                    time_of_day="day" if sid == day_id else "night",
                    split="train",
                )
            )
        for box in scene["boxes"]:
            ann_lines.append(
                json.dumps(
                    {
                        "image_id": night_id,
                        "category": box["category"],
                        "bbox": [box["x"], box["y"], box["w"], box["h"]],
                    }
                )
            )

    meta = {"source": "toy", "seed": seed, "n_pairs": n_pairs, "image_size": image_size}
    manifest = DatasetManifest(samples=samples, root=out_dir.resolve(), meta=meta)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    with open(out_dir / "annotations.jsonl", "w", encoding="utf-8") as fh:
        for line in ann_lines:
            fh.write(line + "\n")
    with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")
    return manifest
