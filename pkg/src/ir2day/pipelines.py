"""Compose trained stages into the four pipeline variants and run batch inference.

Variants (night-IR is always the inference input, fake day-RGB the output):

  baseline:   colorizer trained on true (day-IR, day-RGB); applied to night-IR.
  approach1:  cycle translator night-IR <-> day-IR; inference routes night-IR
               through the night->day direction into the baseline colorizer.
  approach2:  day translator night-RGB <-> day-RGB synthesizes fake day-RGB
               targets for each registered night-IR; colorizer trains on that
               synthesized set; inference touches the colorizer only.
  approach3:  cycle translator day-IR <-> night-IR synthesizes fake night-IR
               from each paired day-IR; colorizer trains on (fake night-IR,
               true day-RGB); inference touches the colorizer only.

Stages run lazily with content-addressed caching: a stage whose fingerprint
(role, configs, seed, input file hashes, upstream checkpoint hash) matches the
cached one is reused. Every run writes work_dir/lineage.json recording the
stage DAG, per-stage input files, and file hashes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .data import DatasetManifest, SamplePair, filter_samples, load_image, load_manifest, save_image, save_manifest
from .losses import LossWeights
from .networks import GeneratorConfig
from .training import (
    NetworkPair,
    StageCheckpoint,
    TrainSchedule,
    colorizer_networks,
    cycle_networks,
    default_schedule,
    default_weights,
    derive_seed,
    load_checkpoint,
    save_checkpoint,
    train_colorizer,
    train_cycle_translator,
    train_day_translator,
)

logger = logging.getLogger("ir2day.pipelines")

APPROACHES = ("baseline", "approach1", "approach2", "approach3")

# (trained stages, synthesized datasets) per approach
EXPECTED_SHAPE = {"baseline": (1, 0), "approach1": (2, 0), "approach2": (2, 1), "approach3": (2, 1)}

_STAGE_ROLES = {
    "baseline": {"colorizer": "colorizer"},
    "approach1": {"translator": "cycle_translator", "colorizer": "colorizer"},
    "approach2": {"translator": "day_translator", "colorizer": "colorizer"},
    "approach3": {"translator": "cycle_translator", "colorizer": "colorizer"},
}


class PipelineError(RuntimeError):
    """A pipeline spec is invalid or its artifacts are incomplete."""


@dataclass
class StageParams:
    schedule: TrainSchedule
    weights: LossWeights
    networks: NetworkPair
    multi_view: bool = False
    use_replay_buffer: bool = True


@dataclass
class PipelineSpec:
    approach: str
    manifest: DatasetManifest
    work_dir: Path
    stages: dict[str, StageParams]
    seed: int = 0


@dataclass
class PipelineArtifacts:
    approach: str
    work_dir: Path
    lineage: dict
    checkpoints: dict[str, Path]
    hooks: dict[str, Callable] = field(default_factory=dict)


def stage_role(approach: str, stage: str) -> str:
    try:
        return _STAGE_ROLES[approach][stage]
    except KeyError:
        raise PipelineError(f"approach {approach!r} has no stage {stage!r}") from None


def default_stage_params(
    approach: str,
    stage: str,
    seed: int = 0,
    scale: str = "desk",
    overrides: dict | None = None,
) -> StageParams:
    """Stage config with desk-scale or full-scale defaults plus flat overrides.

    The stage seed is derived from the run seed and the stage name alone, so a
    stage shared by two approaches (e.g. the colorizer) trains identically for
    identical data; the composition equivalences rely on this.
    """
    role = stage_role(approach, stage)
    ov = dict(overrides or {})
    stage_seed = ov.pop("seed", derive_seed(seed, f"stage/{stage}"))
    translator_channels = 3 if approach == "approach2" else 1

    if scale == "desk":
        sched = {"total_epochs": 2, "constant_epochs": 1, "seed": stage_seed}
        if role == "day_translator":
            sched["base_lr_discriminator"] = 1e-4
        net = {"base_width": 8, "n_downsample": 2, "n_resblocks": 1, "disc_layers": 2}
        arch = "coarse2fine"
    elif scale == "full":
        base = default_schedule(role)
        sched = {
            "total_epochs": base.total_epochs,
            "constant_epochs": base.constant_epochs,
            "base_lr_generator": base.base_lr_generator,
            "base_lr_discriminator": base.base_lr_discriminator,
            "seed": stage_seed,
        }
        if role == "colorizer":
            net = {"base_width": 32, "n_downsample": 3, "n_resblocks": 9, "disc_layers": 3}
        else:
            net = {"base_width": 64, "n_downsample": 2, "n_resblocks": 9, "disc_layers": 3}
        arch = "coarse2fine"
    else:
        raise PipelineError(f"unknown scale {scale!r} (desk or full)")

    for key in ("total_epochs", "constant_epochs", "base_lr_generator", "base_lr_discriminator", "batch_size"):
        if key in ov:
            sched[key] = ov.pop(key)
    schedule = TrainSchedule(**sched)

    wdict = dataclasses.asdict(default_weights(role))
    for key in list(ov):
        if key in wdict:
            wdict[key] = ov.pop(key)
    weights = LossWeights(**wdict)

    for key in ("base_width", "n_downsample", "n_resblocks", "disc_base_width", "disc_layers"):
        if key in ov:
            net[key] = ov.pop(key)
    arch = ov.pop("arch", arch)
    if role == "colorizer":
        networks = colorizer_networks(1, 3, arch=arch, **net)
    else:
        networks = cycle_networks(translator_channels, **net)

    multi_view = bool(ov.pop("multi_view", False))
    use_replay = bool(ov.pop("replay_buffer", True))
    if ov:
        raise PipelineError(f"unknown stage override(s) for {stage!r}: {sorted(ov)}")
    return StageParams(schedule, weights, networks, multi_view, use_replay)


def default_pipeline_spec(
    approach: str,
    manifest: DatasetManifest,
    work_dir: str | Path,
    seed: int = 0,
    scale: str = "desk",
    stage_overrides: dict[str, dict] | None = None,
) -> PipelineSpec:
    if approach not in APPROACHES:
        raise PipelineError(f"unknown approach {approach!r}; choose from {APPROACHES}")
    stage_overrides = stage_overrides or {}
    for name in stage_overrides:
        stage_role(approach, name)
    stages = {
        name: default_stage_params(approach, name, seed, scale, stage_overrides.get(name))
        for name in _STAGE_ROLES[approach]
    }
    return PipelineSpec(approach, manifest, Path(work_dir), stages, seed)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fingerprint(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _relstr(path: Path, work: Path) -> str:
    try:
        return str(Path(path).resolve().relative_to(work.resolve()))
    except ValueError:
        return str(Path(path).resolve())


def _file_records(paths: list[Path], work: Path) -> list[dict]:
    return [{"path": _relstr(p, work), "sha256": file_sha256(p)} for p in paths]


def _apply_generator(net: nn.Module, size_multiple: int, img: np.ndarray) -> np.ndarray:
    """Run one generator on a (C, H, W) array, reflect-padding odd sizes and cropping back."""
    t = torch.as_tensor(img, dtype=torch.float32).unsqueeze(0)
    h, w = t.shape[-2:]
    ph = (-h) % size_multiple
    pw = (-w) % size_multiple
    if ph or pw:
        mode = "reflect" if ph < h and pw < w else "replicate"
        t = F.pad(t, (0, pw, 0, ph), mode=mode)
    with torch.no_grad():
        out = net(t)
    return out[..., :h, :w].clamp(-1.0, 1.0).squeeze(0).numpy()


def _generator_step(ckpt: StageCheckpoint, net_name: str) -> Callable[[np.ndarray], np.ndarray]:
    cfg = ckpt.net_configs[net_name]
    assert isinstance(cfg, GeneratorConfig)
    net = ckpt.instantiate(net_name)
    def step(img: np.ndarray) -> np.ndarray:
        return _apply_generator(net, cfg.size_multiple, img)
    return step


class _Runner:
    """One pipeline execution over a work_dir, accumulating lineage."""

    def __init__(self, spec: PipelineSpec):
        if spec.approach not in APPROACHES:
            raise PipelineError(f"unknown approach {spec.approach!r}; choose from {APPROACHES}")
        self.spec = spec
        self.work = Path(spec.work_dir)
        for sub in ("stages", "synth", "out"):
            (self.work / sub).mkdir(parents=True, exist_ok=True)
        self.lineage: dict = {
            "approach": spec.approach,
            "seed": spec.seed,
            "stages": [],
            "synthesized": [],
            "inference": [],
        }
        self.checkpoints: dict[str, Path] = {}
        self.hooks: dict[str, Callable] = {}

    def params(self, stage: str) -> StageParams:
        try:
            return self.spec.stages[stage]
        except KeyError:
            raise PipelineError(f"spec for {self.spec.approach!r} is missing stage {stage!r}") from None

    def train_stage(self, name: str, role: str, train_fn, input_files: list[Path]) -> StageCheckpoint:
        params = self.params(name)
        stage_dir = self.work / "stages" / name
        stage_dir.mkdir(parents=True, exist_ok=True)
        ckpt_path = stage_dir / "checkpoint.ckpt"
        log_path = stage_dir / "loss_log.csv"
        meta_path = stage_dir / "stage.json"
        inputs = _file_records(input_files, self.work)
        fingerprint = _fingerprint(
            {
                "role": role,
                "schedule": dataclasses.asdict(params.schedule),
                "weights": dataclasses.asdict(params.weights),
                "generator": dataclasses.asdict(params.networks.generator),
                "discriminator": dataclasses.asdict(params.networks.discriminator),
                "multi_view": params.multi_view,
                "replay_buffer": params.use_replay_buffer,
                "inputs": [(r["path"], r["sha256"]) for r in inputs],
            }
        )
        ckpt = None
        cached = False
        if meta_path.is_file() and ckpt_path.is_file():
            try:
                stored = json.loads(meta_path.read_text())
            except json.JSONDecodeError:
                stored = {}
            if stored.get("fingerprint") == fingerprint:
                try:
                    ckpt = load_checkpoint(ckpt_path, expected_role=role)
                    cached = True
                    logger.info("stage %s: cached", name)
                except Exception:
                    ckpt = None
        if ckpt is None:
            logger.info("stage %s: training (%s)", name, role)
            try:
                ckpt = train_fn(params, log_path)
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(f"stage {name!r} failed: {exc}") from exc
            save_checkpoint(ckpt, ckpt_path)
            meta_path.write_text(
                json.dumps({"fingerprint": fingerprint, "checkpoint_hash": ckpt.content_hash}, indent=2)
                + "\n"
            )
        self.checkpoints[name] = ckpt_path
        self.lineage["stages"].append(
            {
                "name": name,
                "role": role,
                "checkpoint": _relstr(ckpt_path, self.work),
                "checkpoint_hash": ckpt.content_hash,
                "checkpoint_sha256": file_sha256(ckpt_path),
                "loss_log": _relstr(log_path, self.work) if log_path.is_file() else None,
                "cached": cached,
                "inputs": inputs,
            }
        )
        return ckpt

    def synth_stage(
        self,
        name: str,
        source_stage: str,
        producer_hash: str,
        items: list[tuple[str, Path, Path]],
        generate: Callable[[np.ndarray], np.ndarray],
        fake_side: str,
    ) -> DatasetManifest:
        """Synthesize one paired dataset; items are (id, ir_source, rgb_source).

        fake_side says which side the generator produces ("ir" or "rgb"); the
        other side is referenced from the original dataset.
        """
        synth_dir = self.work / "synth" / name
        images_dir = synth_dir / "images"
        images_dir.mkdir(parents=True, exist_ok=True)
        meta_path = synth_dir / "synth.json"
        manifest_path = synth_dir / "manifest.jsonl"
        sources = [(sid, file_sha256(ir), file_sha256(rgb)) for sid, ir, rgb in items]
        fingerprint = _fingerprint({"producer": producer_hash, "fake_side": fake_side, "sources": sources})
        cached = False
        if meta_path.is_file() and manifest_path.is_file():
            try:
                stored = json.loads(meta_path.read_text())
            except json.JSONDecodeError:
                stored = {}
            if stored.get("fingerprint") == fingerprint:
                cached = True
                logger.info("synthesized dataset %s: cached", name)
        if not cached:
            logger.info("synthesized dataset %s: generating %d pairs", name, len(items))
            samples = []
            for sid, ir_src, rgb_src in items:
                if fake_side == "rgb":
                    source = load_image(rgb_src, 3)
                    fake = generate(source)
                    out_path = images_dir / f"{sid}_fake_day_rgb.png"
                    save_image(out_path, fake)
                    ir_path, rgb_path = Path(ir_src).resolve(), out_path.resolve()
                else:
                    source = load_image(ir_src, 1)
                    fake = generate(source)
                    out_path = images_dir / f"{sid}_fake_night_ir.png"
                    save_image(out_path, fake)
                    ir_path, rgb_path = out_path.resolve(), Path(rgb_src).resolve()
                samples.append(
                    SamplePair(id=sid, ir_path=ir_path, rgb_path=rgb_path, time_of_day="night", split="train")
                )
            manifest = DatasetManifest(samples=samples, root=synth_dir.resolve(), meta={"source": source_stage})
            save_manifest(manifest, manifest_path)
            meta_path.write_text(json.dumps({"fingerprint": fingerprint}, indent=2) + "\n")
        manifest = load_manifest(manifest_path)
        produced = sorted(images_dir.glob("*.png"))
        self.lineage["synthesized"].append(
            {
                "name": name,
                "manifest": _relstr(manifest_path, self.work),
                "source_stage": source_stage,
                "cached": cached,
                "files": _file_records(produced, self.work),
            }
        )
        return manifest

    def finish(self) -> PipelineArtifacts:
        lineage_path = self.work / "lineage.json"
        lineage_path.write_text(json.dumps(self.lineage, indent=2, sort_keys=True) + "\n")
        return PipelineArtifacts(
            approach=self.spec.approach,
            work_dir=self.work,
            lineage=self.lineage,
            checkpoints=dict(self.checkpoints),
            hooks=dict(self.hooks),
        )


def _load_pairs(samples: list[SamplePair]) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(load_image(s.ir_path, 1), load_image(s.rgb_path, 3)) for s in samples]


def _pair_files(samples: list[SamplePair]) -> list[Path]:
    files: list[Path] = []
    for s in samples:
        files.append(s.ir_path)
        files.append(s.rgb_path)
    return files


def _colorizer_stage(runner: _Runner, pairs: list[SamplePair] | None = None, manifest: DatasetManifest | None = None):
    if pairs is None:
        pairs = [s for s in manifest.samples]
    data = _load_pairs(pairs)

    def train_fn(params: StageParams, log_path: Path) -> StageCheckpoint:
        return train_colorizer(data, params.schedule, params.weights, params.networks, log_path=log_path)

    return runner.train_stage("colorizer", "colorizer", train_fn, _pair_files(pairs))


def run_baseline(spec: PipelineSpec) -> PipelineArtifacts:
    """Colorizer on true (day-IR, day-RGB); night-IR is translated directly by it."""
    runner = _Runner(spec)
    day_pairs = filter_samples(spec.manifest, "day", "train", paired_only=True)
    if not day_pairs:
        raise PipelineError("baseline needs paired day-time training samples")
    _colorizer_stage(runner, pairs=day_pairs)
    runner.lineage["inference"] = [{"stage": "colorizer", "net": "g"}]
    return runner.finish()


def run_approach1(
    spec: PipelineSpec, translator_hook: Callable[[np.ndarray], np.ndarray] | None = None
) -> PipelineArtifacts:
    """Night-IR -> (cycle translator, night->day) -> fake day-IR -> baseline colorizer.

    translator_hook (testing seam) replaces the trained translator at
    inference; no translator stage is trained when it is set.
    """
    runner = _Runner(spec)
    night = filter_samples(spec.manifest, "night", "train")
    day_pairs = filter_samples(spec.manifest, "day", "train", paired_only=True)
    if not day_pairs:
        raise PipelineError("approach1 needs paired day-time training samples")
    if translator_hook is None:
        if not night:
            raise PipelineError("approach1 needs night-time IR training samples")
        night_ir = [load_image(s.ir_path, 1) for s in night]
        day_ir = [load_image(s.ir_path, 1) for s in filter_samples(spec.manifest, "day", "train")]

        def train_fn(params: StageParams, log_path: Path) -> StageCheckpoint:
            return train_cycle_translator(
                night_ir, day_ir, params.schedule, params.weights, params.networks,
                log_path=log_path, use_replay_buffer=params.use_replay_buffer,
            )

        runner.train_stage(
            "translator", "cycle_translator", train_fn,
            [s.ir_path for s in night] + [s.ir_path for s in filter_samples(spec.manifest, "day", "train")],
        )
        runner.lineage["inference"].append({"stage": "translator", "net": "g_ab"})
    else:
        runner.hooks["translator"] = translator_hook
        runner.lineage["inference"].append({"stage": "translator", "hook": True})
    _colorizer_stage(runner, pairs=day_pairs)
    runner.lineage["inference"].append({"stage": "colorizer", "net": "g"})
    return runner.finish()


def run_approach2(spec: PipelineSpec) -> PipelineArtifacts:
    """Day translator synthesizes fake day-RGB targets for registered night-IR;
    the colorizer trains on that synthesized set and serves inference alone."""
    runner = _Runner(spec)
    night_pairs = filter_samples(spec.manifest, "night", "train", paired_only=True)
    day_rgb_samples = filter_samples(spec.manifest, "day", "train", paired_only=True)
    if not night_pairs:
        raise PipelineError("approach2 needs night samples with registered RGB")
    if not day_rgb_samples:
        raise PipelineError("approach2 needs day-time RGB samples")
    night_rgb = [load_image(s.rgb_path, 3) for s in night_pairs]
    day_rgb = [load_image(s.rgb_path, 3) for s in day_rgb_samples]

    def train_fn(params: StageParams, log_path: Path) -> StageCheckpoint:
        return train_day_translator(
            night_rgb, day_rgb, params.schedule, params.weights, params.networks,
            log_path=log_path, use_replay_buffer=params.use_replay_buffer, multi_view=params.multi_view,
        )

    translator = runner.train_stage(
        "translator", "day_translator", train_fn,
        [s.rgb_path for s in night_pairs] + [s.rgb_path for s in day_rgb_samples],
    )
    synth = runner.synth_stage(
        "pairs",
        "translator",
        translator.content_hash,
        [(s.id, s.ir_path, s.rgb_path) for s in night_pairs],
        _generator_step(translator, "g_ab"),
        fake_side="rgb",
    )
    _colorizer_stage(runner, manifest=synth)
    runner.lineage["inference"] = [{"stage": "colorizer", "net": "g"}]
    return runner.finish()


def run_approach3(
    spec: PipelineSpec, translator_hook: Callable[[np.ndarray], np.ndarray] | None = None
) -> PipelineArtifacts:
    """Cycle translator day-IR <-> night-IR synthesizes fake night-IR paired with
    true day-RGB; the colorizer trains on those pairs and serves inference alone.

    translator_hook (testing seam) replaces the day->night synthesis step; no
    translator stage is trained when it is set.
    """
    runner = _Runner(spec)
    day_pairs = filter_samples(spec.manifest, "day", "train", paired_only=True)
    night = filter_samples(spec.manifest, "night", "train")
    if not day_pairs:
        raise PipelineError("approach3 needs paired day-time training samples")
    if translator_hook is None:
        if not night:
            raise PipelineError("approach3 needs night-time IR training samples")
        day_ir = [load_image(s.ir_path, 1) for s in filter_samples(spec.manifest, "day", "train")]
        night_ir = [load_image(s.ir_path, 1) for s in night]

        def train_fn(params: StageParams, log_path: Path) -> StageCheckpoint:
            return train_cycle_translator(
                day_ir, night_ir, params.schedule, params.weights, params.networks,
                log_path=log_path, use_replay_buffer=params.use_replay_buffer,
            )

        translator = runner.train_stage(
            "translator", "cycle_translator", train_fn,
            [s.ir_path for s in filter_samples(spec.manifest, "day", "train")] + [s.ir_path for s in night],
        )
        day_to_night = _generator_step(translator, "g_ab")
        producer_hash = translator.content_hash
    else:
        runner.hooks["translator"] = translator_hook
        day_to_night = translator_hook
        producer_hash = "hook"
    synth = runner.synth_stage(
        "pairs",
        "translator",
        producer_hash,
        [(s.id, s.ir_path, s.rgb_path) for s in day_pairs],
        day_to_night,
        fake_side="ir",
    )
    _colorizer_stage(runner, manifest=synth)
    runner.lineage["inference"] = [{"stage": "colorizer", "net": "g"}]
    return runner.finish()


def run_pipeline(spec: PipelineSpec) -> PipelineArtifacts:
    """Dispatch on spec.approach."""
    fn = {
        "baseline": run_baseline,
        "approach1": run_approach1,
        "approach2": run_approach2,
        "approach3": run_approach3,
    }.get(spec.approach)
    if fn is None:
        raise PipelineError(f"unknown approach {spec.approach!r}; choose from {APPROACHES}")
    return fn(spec)


def load_artifacts(work_dir: str | Path) -> PipelineArtifacts:
    """Reload completed pipeline artifacts from a work_dir's lineage record."""
    work = Path(work_dir)
    lineage_path = work / "lineage.json"
    if not lineage_path.is_file():
        raise PipelineError(f"no pipeline artifacts in {work} (missing lineage.json)")
    lineage = json.loads(lineage_path.read_text())
    checkpoints = {}
    for entry in lineage["stages"]:
        checkpoints[entry["name"]] = work / entry["checkpoint"]
    return PipelineArtifacts(
        approach=lineage["approach"], work_dir=work, lineage=lineage, checkpoints=checkpoints
    )


def _inference_chain(artifacts: PipelineArtifacts) -> list[Callable[[np.ndarray], np.ndarray]]:
    roles = {entry["name"]: entry["role"] for entry in artifacts.lineage["stages"]}
    chain = []
    for item in artifacts.lineage["inference"]:
        stage = item["stage"]
        if item.get("hook"):
            hook = artifacts.hooks.get(stage)
            if hook is None:
                raise PipelineError(f"stage {stage!r} was run with an in-process hook; cannot reload it")
            chain.append(hook)
            continue
        ckpt_path = artifacts.checkpoints.get(stage)
        if ckpt_path is None or not Path(ckpt_path).is_file():
            raise PipelineError(f"missing checkpoint for stage {stage!r}; re-run the pipeline")
        ckpt = load_checkpoint(ckpt_path, expected_role=roles.get(stage))
        chain.append(_generator_step(ckpt, item["net"]))
    if not chain:
        raise PipelineError("artifacts carry no inference chain")
    return chain


def translate(
    artifacts: PipelineArtifacts, images: list[str | Path], out_dir: str | Path
) -> list[Path]:
    """Run night-IR inputs through the approach's inference chain; write 8-bit RGB PNGs.

    Output names derive from input stems; inputs whose size is not a multiple
    of the generators' stride are reflect-padded and cropped back.
    Deterministic given the artifacts.
    """
    chain = _inference_chain(artifacts)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for path in images:
        path = Path(path)
        img = load_image(path, 1)
        for step in chain:
            img = step(img)
        out_path = out_dir / f"{path.stem}_fake_day_rgb.png"
        save_image(out_path, img)
        outputs.append(out_path)
    return outputs


def pipeline_shape(artifacts: PipelineArtifacts) -> tuple[int, int]:
    """(trained stages, synthesized datasets); compare with EXPECTED_SHAPE."""
    return len(artifacts.lineage["stages"]), len(artifacts.lineage["synthesized"])


def verify_lineage(artifacts: PipelineArtifacts) -> None:
    """Check every file a lineage record references exists and hash-matches."""
    work = Path(artifacts.work_dir)

    def check(rec: dict) -> None:
        path = Path(rec["path"])
        if not path.is_absolute():
            path = work / path
        if not path.is_file():
            raise PipelineError(f"lineage references missing file {path}")
        actual = file_sha256(path)
        if actual != rec["sha256"]:
            raise PipelineError(f"lineage hash mismatch for {path}")

    for entry in artifacts.lineage["stages"]:
        ckpt = work / entry["checkpoint"]
        if not ckpt.is_file():
            raise PipelineError(f"lineage references missing checkpoint {ckpt}")
        if file_sha256(ckpt) != entry["checkpoint_sha256"]:
            raise PipelineError(f"lineage hash mismatch for checkpoint {ckpt}")
        for rec in entry["inputs"]:
            check(rec)
    for entry in artifacts.lineage["synthesized"]:
        for rec in entry["files"]:
            check(rec)
