"""Optimization loops for the three model roles, with schedules and checkpointing.

Roles: cycle_translator (unpaired two-domain translation), colorizer
(supervised IR -> RGB), day_translator (night-RGB <-> day-RGB cycle pair with
per-side learning rates). Optimizer is Adam(0.5, 0.999) and batch size
defaults to 1 (conventions of the model family, not published values).

Determinism: every random decision (parameter init, shuffling, replay buffer)
flows from schedule.seed through local generators, so identical seeds on one
machine reproduce loss logs and parameters exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from itertools import chain
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .losses import (
    LossWeights,
    adversarial_loss,
    build_feature_extractor,
    l1_loss,
    perceptual_loss,
    total_variation_loss,
)
from .networks import DiscriminatorConfig, GeneratorConfig, build_discriminator, build_generator

ROLES = ("cycle_translator", "colorizer", "day_translator")

CYCLE_LOG_COLUMNS = (
    "step", "epoch", "lr_g", "lr_d",
    "adv_g", "cycle_a", "cycle_b", "identity_a", "identity_b",
    "loss_d_a", "loss_d_b", "total",
)
COLORIZER_LOG_COLUMNS = (
    "step", "epoch", "lr_g", "lr_d",
    "adv_g", "l1", "perceptual", "tv",
    "loss_d", "total",
)

ADAM_BETAS = (0.5, 0.999)


def derive_seed(seed: int, label: str) -> int:
    """Stable per-stage seed fan-out (independent of hash randomization).

    Result fits in a non-negative int63 so every RNG backend accepts it.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class TrainSchedule:
    total_epochs: int
    constant_epochs: int
    base_lr_generator: float = 2e-4
    base_lr_discriminator: float = 2e-4
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.constant_epochs <= self.total_epochs:
            raise ValueError(
                f"need 0 < constant_epochs <= total_epochs, got {self.constant_epochs}/{self.total_epochs}"
            )
        if self.base_lr_generator <= 0 or self.base_lr_discriminator <= 0:
            raise ValueError("learning rates must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def default_schedule(role: str, seed: int = 0) -> TrainSchedule:
    """Published epoch/learning-rate structure per role."""
    if role == "cycle_translator":
        return TrainSchedule(60, 40, 2e-4, 2e-4, seed=seed)
    if role == "colorizer":
        return TrainSchedule(100, 80, 2e-4, 2e-4, seed=seed)
    if role == "day_translator":
        return TrainSchedule(80, 40, 2e-4, 1e-4, seed=seed)
    raise ValueError(f"unknown role {role!r}")


def default_weights(role: str) -> LossWeights:
    """Loss weighting per role; colorizer pixel/feature/TV weights are artifact defaults."""
    if role in ("cycle_translator", "day_translator"):
        return LossWeights(lambda_adv=1.0, lambda_cycle=10.0, adv_mode="lsgan")
    if role == "colorizer":
        return LossWeights(
            lambda_adv=1.0,
            lambda_cycle=0.0,
            lambda_l1=100.0,
            lambda_perceptual=10.0,
            lambda_tv=1.0,
            adv_mode="vanilla",
        )
    raise ValueError(f"unknown role {role!r}")


def lr_at_epoch(schedule: TrainSchedule, epoch: int, side: str = "generator") -> float:
    """Constant through constant_epochs, then linear to 0 at total_epochs."""
    if side == "generator":
        base = schedule.base_lr_generator
    elif side == "discriminator":
        base = schedule.base_lr_discriminator
    else:
        raise ValueError(f"side must be 'generator' or 'discriminator', got {side!r}")
    if not 0 <= epoch <= schedule.total_epochs:
        raise ValueError(f"epoch {epoch} out of range [0, {schedule.total_epochs}]")
    if epoch < schedule.constant_epochs:
        return base
    if schedule.total_epochs == schedule.constant_epochs:
        return 0.0
    return base * (schedule.total_epochs - epoch) / (schedule.total_epochs - schedule.constant_epochs)


@dataclass(frozen=True)
class NetworkPair:
    generator: GeneratorConfig
    discriminator: DiscriminatorConfig


def cycle_networks(
    channels: int = 1,
    base_width: int = 32,
    n_downsample: int = 2,
    n_resblocks: int = 3,
    disc_base_width: int | None = None,
    disc_layers: int = 3,
) -> NetworkPair:
    """Config pair for a same-channel-count cycle translator (resnet generator)."""
    return NetworkPair(
        generator=GeneratorConfig(channels, channels, base_width, n_downsample, n_resblocks, "resnet"),
        discriminator=DiscriminatorConfig(channels, disc_base_width or base_width, disc_layers),
    )


def colorizer_networks(
    ir_channels: int = 1,
    rgb_channels: int = 3,
    base_width: int = 32,
    n_downsample: int = 2,
    n_resblocks: int = 3,
    arch: str = "coarse2fine",
    disc_base_width: int | None = None,
    disc_layers: int = 3,
) -> NetworkPair:
    """Config pair for the supervised colorizer; the patch discriminator is
    conditioned on the IR input (concatenated channels)."""
    return NetworkPair(
        generator=GeneratorConfig(ir_channels, rgb_channels, base_width, n_downsample, n_resblocks, arch),
        discriminator=DiscriminatorConfig(ir_channels + rgb_channels, disc_base_width or base_width, disc_layers),
    )


class ImageBuffer:
    """Replay buffer of previously generated samples for discriminator updates."""

    def __init__(self, max_size: int = 50, rng: random.Random | None = None):
        if max_size < 1:
            raise ValueError("max_size must be >= 1")
        self.max_size = max_size
        self.rng = rng if rng is not None else random.Random(0)
        self.data: list[torch.Tensor] = []

    def push_and_pop(self, batch: torch.Tensor) -> torch.Tensor:
        out = []
        for el in batch:
            el = el.unsqueeze(0)
            if len(self.data) < self.max_size:
                self.data.append(el)
                out.append(el)
            elif self.rng.random() > 0.5:
                i = self.rng.randrange(self.max_size)
                out.append(self.data[i].clone())
                self.data[i] = el
            else:
                out.append(el)
        return torch.cat(out)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


class CheckpointError(RuntimeError):
    """Checkpoint file is corrupt, incompatible, or of the wrong role."""


@dataclass
class StageCheckpoint:
    role: str
    net_configs: dict[str, GeneratorConfig | DiscriminatorConfig]
    states: dict[str, dict]
    optim_states: dict[str, dict]
    epochs_completed: int
    meta: dict = field(default_factory=dict)
    content_hash: str | None = None

    def instantiate(self, name: str) -> nn.Module:
        """Build the named network from its config and load its parameters."""
        cfg = self.net_configs[name]
        if isinstance(cfg, GeneratorConfig):
            net = build_generator(cfg)
        else:
            net = build_discriminator(cfg)
        net.load_state_dict(self.states[name])
        net.eval()
        return net


_CKPT_MAGIC = b"IR2DCKP1"
_DTYPES = {
    "float32": torch.float32,
    "float64": torch.float64,
    "int64": torch.int64,
    "int32": torch.int32,
    "uint8": torch.uint8,
    "bool": torch.bool,
}


def _encode_tree(obj, tensors: list[np.ndarray]):
    if isinstance(obj, torch.Tensor):
        arr = obj.detach().cpu().contiguous().numpy()
        tensors.append(arr)
        return {"__t__": len(tensors) - 1}
    if isinstance(obj, dict):
        return {"__d__": [[_encode_tree(k, tensors), _encode_tree(v, tensors)] for k, v in obj.items()]}
    if isinstance(obj, tuple):
        return {"__tup__": [_encode_tree(v, tensors) for v in obj]}
    if isinstance(obj, list):
        return {"__l__": [_encode_tree(v, tensors) for v in obj]}
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} in checkpoint")


def _decode_tree(node, tensors: list[torch.Tensor]):
    if isinstance(node, dict):
        if "__t__" in node:
            return tensors[node["__t__"]]
        if "__d__" in node:
            return {_decode_tree(k, tensors): _decode_tree(v, tensors) for k, v in node["__d__"]}
        if "__tup__" in node:
            return tuple(_decode_tree(v, tensors) for v in node["__tup__"])
        if "__l__" in node:
            return [_decode_tree(v, tensors) for v in node["__l__"]]
        raise CheckpointError(f"unknown node markers {sorted(node)}")
    return node


def _config_to_json(cfg) -> dict:
    d = dataclasses.asdict(cfg)
    d["kind"] = "generator" if isinstance(cfg, GeneratorConfig) else "discriminator"
    return d


def _config_from_json(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "generator":
        return GeneratorConfig(**d)
    return DiscriminatorConfig(**d)


def _canonical(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode()


def save_checkpoint(ckpt: StageCheckpoint, path: str | Path) -> str:
    """Write a single-file checkpoint: magic + JSON header + raw parameter blobs.

    Returns the content hash (sha256 over header-sans-hash + blobs), also
    stored in the header and verified on load. Serialization is
    byte-deterministic for identical contents.
    """
    tensors: list[np.ndarray] = []
    tree = _encode_tree({"states": ckpt.states, "optim_states": ckpt.optim_states}, tensors)
    blob_parts = []
    tensor_meta = []
    offset = 0
    for arr in tensors:
        raw = arr.tobytes()
        tensor_meta.append(
            {"dtype": str(arr.dtype), "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        blob_parts.append(raw)
        offset += len(raw)
    blob = b"".join(blob_parts)
    header = {
        "version": 1,
        "role": ckpt.role,
        "epochs_completed": ckpt.epochs_completed,
        "net_configs": {name: _config_to_json(cfg) for name, cfg in ckpt.net_configs.items()},
        "meta": ckpt.meta,
        "tree": tree,
        "tensors": tensor_meta,
    }
    content_hash = hashlib.sha256(_canonical(header) + blob).hexdigest()
    header["hash"] = content_hash
    header_bytes = _canonical(header)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        fh.write(blob)
    ckpt.content_hash = content_hash
    return content_hash


def load_checkpoint(path: str | Path, expected_role: str | None = None) -> StageCheckpoint:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        header_len = int.from_bytes(fh.read(8), "little")
        header_bytes = fh.read(header_len)
        blob = fh.read()
    try:
        header = json.loads(header_bytes)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != 1:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
    stored_hash = header.pop("hash", None)
    actual = hashlib.sha256(_canonical(header) + blob).hexdigest()
    if stored_hash != actual:
        raise CheckpointError(f"{path}: content hash mismatch (file corrupted?)")
    role = header["role"]
    if expected_role is not None and role != expected_role:
        raise CheckpointError(f"{path}: role mismatch: expected {expected_role!r}, found {role!r}")
    tensors: list[torch.Tensor] = []
    for tm in header["tensors"]:
        raw = blob[tm["offset"] : tm["offset"] + tm["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(tm["dtype"])).reshape(tm["shape"]).copy()
        tensors.append(torch.from_numpy(arr).to(_DTYPES[tm["dtype"]]))
    tree = _decode_tree(header["tree"], tensors)
    return StageCheckpoint(
        role=role,
        net_configs={name: _config_from_json(d) for name, d in header["net_configs"].items()},
        states=tree["states"],
        optim_states=tree["optim_states"],
        epochs_completed=header["epochs_completed"],
        meta=header["meta"],
        content_hash=stored_hash,
    )


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------


def _as_image_tensor(x) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(x), dtype=torch.float32)
    if t.dim() != 3:
        raise ValueError(f"expected (C, H, W) images, got shape {tuple(t.shape)}")
    return t


def _check_uniform_size(tensors: list[torch.Tensor], what: str) -> None:
    sizes = {tuple(t.shape[-2:]) for t in tensors}
    if len(sizes) > 1:
        raise ValueError(f"{what}: images are not size-compatible: {sorted(sizes)}")


def _scalar(t) -> float:
    return float(t.detach()) if isinstance(t, torch.Tensor) else float(t)


def _set_lr(opt: torch.optim.Optimizer, lr: float) -> None:
    for group in opt.param_groups:
        group["lr"] = lr


def _check_finite(step: int, terms: dict[str, float]) -> None:
    for name, value in terms.items():
        if not math.isfinite(value):
            raise RuntimeError(f"non-finite loss at step {step}: {name}={value}")


def _write_loss_log(rows: list[dict], columns: tuple[str, ...], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])


def _epoch_pairing(rng: random.Random, n_a: int, n_b: int) -> list[tuple[int, int]]:
    """One pass over the larger domain, cycling the (shuffled) smaller one."""
    idx_a = list(range(n_a))
    idx_b = list(range(n_b))
    rng.shuffle(idx_a)
    rng.shuffle(idx_b)
    n = max(n_a, n_b)
    return [(idx_a[i % n_a], idx_b[i % n_b]) for i in range(n)]


def _batched(pairs: list, batch_size: int):
    for i in range(0, len(pairs), batch_size):
        yield pairs[i : i + batch_size]


# view transforms for the optional multi-view discriminators
def _view_blur(x: torch.Tensor) -> torch.Tensor:
    k = torch.tensor([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]], dtype=x.dtype) / 16.0
    c = x.shape[1]
    weight = k.expand(c, 1, 3, 3)
    return F.conv2d(F.pad(x, (1, 1, 1, 1), mode="reflect"), weight, groups=c)


def _view_gray(x: torch.Tensor) -> torch.Tensor:
    return x.mean(dim=1, keepdim=True)


def _view_grad(x: torch.Tensor) -> torch.Tensor:
    g = _view_gray(x)
    gx = F.pad(g[..., :, 1:] - g[..., :, :-1], (0, 1, 0, 0))
    gy = F.pad(g[..., 1:, :] - g[..., :-1, :], (0, 0, 0, 1))
    return torch.sqrt(gx * gx + gy * gy + 1e-12)


_VIEWS = {"image": lambda x: x, "blur": _view_blur, "gray": _view_gray, "grad": _view_grad}


def _domain_discriminators(
    template: DiscriminatorConfig, channels: int, multi_view: bool
) -> dict[str, DiscriminatorConfig]:
    if not multi_view:
        return {"image": dataclasses.replace(template, in_channels=channels)}
    return {
        "blur": dataclasses.replace(template, in_channels=channels),
        "gray": dataclasses.replace(template, in_channels=1),
        "grad": dataclasses.replace(template, in_channels=1),
    }


def train_colorizer(
    paired_data,
    schedule: TrainSchedule,
    weights: LossWeights,
    networks: NetworkPair,
    *,
    log_path: str | Path | None = None,
    feature_extractor: nn.Module | None = None,
) -> StageCheckpoint:
    """Supervised IR -> RGB training: adversarial + L1 + perceptual + TV.

    paired_data is a list of (ir, rgb) images shaped (C, H, W) in [-1, 1].
    The discriminator is conditioned on the IR input (channel concat).
    """
    if not paired_data:
        raise ValueError("colorizer training needs at least one (ir, rgb) pair")
    pairs = [(_as_image_tensor(ir), _as_image_tensor(rgb)) for ir, rgb in paired_data]
    for i, (ir, rgb) in enumerate(pairs):
        if ir.shape[-2:] != rgb.shape[-2:]:
            raise ValueError(f"pair {i}: IR {tuple(ir.shape[-2:])} and RGB {tuple(rgb.shape[-2:])} sizes differ")
    _check_uniform_size([p[0] for p in pairs] + [p[1] for p in pairs], "colorizer training set")

    gen_cfg, disc_cfg = networks.generator, networks.discriminator
    expected_d_in = gen_cfg.in_channels + gen_cfg.out_channels
    if disc_cfg.in_channels != expected_d_in:
        raise ValueError(
            f"conditional discriminator needs in_channels={expected_d_in} "
            f"(IR {gen_cfg.in_channels} + RGB {gen_cfg.out_channels}), got {disc_cfg.in_channels}"
        )
    seed = schedule.seed
    g = build_generator(gen_cfg, derive_seed(seed, "colorizer/g"))
    d = build_discriminator(disc_cfg, derive_seed(seed, "colorizer/d"))
    fx = feature_extractor
    if fx is None and weights.lambda_perceptual > 0:
        fx = build_feature_extractor("random_conv", derive_seed(seed, "colorizer/fx"))
    opt_g = torch.optim.Adam(g.parameters(), lr=schedule.base_lr_generator, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(d.parameters(), lr=schedule.base_lr_discriminator, betas=ADAM_BETAS)
    rng = random.Random(derive_seed(seed, "colorizer/shuffle"))

    rows: list[dict] = []
    step = 0
    for epoch in range(schedule.total_epochs):
        lr_g = lr_at_epoch(schedule, epoch, "generator")
        lr_d = lr_at_epoch(schedule, epoch, "discriminator")
        _set_lr(opt_g, lr_g)
        _set_lr(opt_d, lr_d)
        order = list(range(len(pairs)))
        rng.shuffle(order)
        for batch_idx in _batched(order, schedule.batch_size):
            ir = torch.stack([pairs[i][0] for i in batch_idx])
            rgb = torch.stack([pairs[i][1] for i in batch_idx])
            terms = {"adv_g": 0.0, "l1": 0.0, "perceptual": 0.0, "tv": 0.0}
            gen_active = (
                weights.lambda_adv > 0
                or weights.lambda_l1 > 0
                or weights.lambda_perceptual > 0
                or weights.lambda_tv > 0
            )
            fake = g(ir) if gen_active else None
            total_g = torch.zeros(())
            if gen_active:
                parts = []
                if weights.lambda_adv > 0:
                    adv_g = adversarial_loss(None, d(torch.cat([ir, fake], dim=1)), weights.adv_mode, "generator")
                    terms["adv_g"] = _scalar(adv_g)
                    parts.append(weights.lambda_adv * adv_g)
                if weights.lambda_l1 > 0:
                    t = l1_loss(rgb, fake)
                    terms["l1"] = _scalar(t)
                    parts.append(weights.lambda_l1 * t)
                if weights.lambda_perceptual > 0:
                    t = perceptual_loss(rgb, fake, fx)
                    terms["perceptual"] = _scalar(t)
                    parts.append(weights.lambda_perceptual * t)
                if weights.lambda_tv > 0:
                    t = total_variation_loss(fake)
                    terms["tv"] = _scalar(t)
                    parts.append(weights.lambda_tv * t)
                total_g = sum(parts)
                opt_g.zero_grad()
                total_g.backward()
                opt_g.step()
            loss_d = 0.0
            if weights.lambda_adv > 0:
                d_real = d(torch.cat([ir, rgb], dim=1))
                d_fake = d(torch.cat([ir, fake.detach()], dim=1))
                loss_d_t = weights.lambda_adv * adversarial_loss(d_real, d_fake, weights.adv_mode, "discriminator")
                opt_d.zero_grad()
                loss_d_t.backward()
                opt_d.step()
                loss_d = _scalar(loss_d_t)
            # recombine in float64 from the logged scalars so the logged total
            # equals the weighted sum of the logged terms exactly
            row_total = (
                weights.lambda_adv * terms["adv_g"]
                + weights.lambda_l1 * terms["l1"]
                + weights.lambda_perceptual * terms["perceptual"]
                + weights.lambda_tv * terms["tv"]
            )
            row = {
                "step": step,
                "epoch": epoch,
                "lr_g": lr_g,
                "lr_d": lr_d,
                **terms,
                "loss_d": loss_d,
                "total": row_total,
            }
            _check_finite(step, {k: v for k, v in row.items() if k not in ("step", "epoch")})
            rows.append(row)
            step += 1
    if log_path is not None:
        _write_loss_log(rows, COLORIZER_LOG_COLUMNS, log_path)
    return StageCheckpoint(
        role="colorizer",
        net_configs={"g": gen_cfg, "d": disc_cfg},
        states={"g": g.state_dict(), "d": d.state_dict()},
        optim_states={"g": opt_g.state_dict(), "d": opt_d.state_dict()},
        epochs_completed=schedule.total_epochs,
        meta={
            "schedule": dataclasses.asdict(schedule),
            "weights": dataclasses.asdict(weights),
            "log_columns": list(COLORIZER_LOG_COLUMNS),
        },
    )


def _train_cycle(
    data_a,
    data_b,
    schedule: TrainSchedule,
    weights: LossWeights,
    networks: NetworkPair,
    role: str,
    *,
    log_path: str | Path | None = None,
    use_replay_buffer: bool = True,
    multi_view: bool = False,
    meta_extra: dict | None = None,
) -> StageCheckpoint:
    if not data_a or not data_b:
        raise ValueError(f"{role}: both domains must be non-empty")
    a_imgs = [_as_image_tensor(x) for x in data_a]
    b_imgs = [_as_image_tensor(x) for x in data_b]
    _check_uniform_size(a_imgs + b_imgs, f"{role} training set")

    gen_ab_cfg = networks.generator
    gen_ba_cfg = dataclasses.replace(
        gen_ab_cfg, in_channels=gen_ab_cfg.out_channels, out_channels=gen_ab_cfg.in_channels
    )
    if weights.lambda_identity > 0 and gen_ab_cfg.in_channels != gen_ab_cfg.out_channels:
        raise ValueError("identity loss requires equal channel counts in both domains")
    seed = schedule.seed
    g_ab = build_generator(gen_ab_cfg, derive_seed(seed, f"{role}/g_ab"))
    g_ba = build_generator(gen_ba_cfg, derive_seed(seed, f"{role}/g_ba"))
    d_cfgs_a = _domain_discriminators(networks.discriminator, gen_ab_cfg.in_channels, multi_view)
    d_cfgs_b = _domain_discriminators(networks.discriminator, gen_ab_cfg.out_channels, multi_view)
    d_a = {
        v: build_discriminator(cfg, derive_seed(seed, f"{role}/d_a_{v}")) for v, cfg in d_cfgs_a.items()
    }
    d_b = {
        v: build_discriminator(cfg, derive_seed(seed, f"{role}/d_b_{v}")) for v, cfg in d_cfgs_b.items()
    }
    opt_g = torch.optim.Adam(
        chain(g_ab.parameters(), g_ba.parameters()), lr=schedule.base_lr_generator, betas=ADAM_BETAS
    )
    d_params = chain(*(m.parameters() for m in d_a.values()), *(m.parameters() for m in d_b.values()))
    opt_d = torch.optim.Adam(d_params, lr=schedule.base_lr_discriminator, betas=ADAM_BETAS)
    rng = random.Random(derive_seed(seed, f"{role}/shuffle"))
    buf_a = ImageBuffer(50, random.Random(derive_seed(seed, f"{role}/buffer_a"))) if use_replay_buffer else None
    buf_b = ImageBuffer(50, random.Random(derive_seed(seed, f"{role}/buffer_b"))) if use_replay_buffer else None

    def adv_gen(discs: dict[str, nn.Module], fake: torch.Tensor) -> torch.Tensor:
        total = None
        for view, disc in discs.items():
            t = adversarial_loss(None, disc(_VIEWS[view](fake)), weights.adv_mode, "generator")
            total = t if total is None else total + t
        return total

    def adv_disc(discs: dict[str, nn.Module], real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
        total = None
        for view, disc in discs.items():
            t = adversarial_loss(
                disc(_VIEWS[view](real)), disc(_VIEWS[view](fake)), weights.adv_mode, "discriminator"
            )
            total = t if total is None else total + t
        return total

    rows: list[dict] = []
    step = 0
    for epoch in range(schedule.total_epochs):
        lr_g = lr_at_epoch(schedule, epoch, "generator")
        lr_d = lr_at_epoch(schedule, epoch, "discriminator")
        _set_lr(opt_g, lr_g)
        _set_lr(opt_d, lr_d)
        for batch in _batched(_epoch_pairing(rng, len(a_imgs), len(b_imgs)), schedule.batch_size):
            a = torch.stack([a_imgs[i] for i, _ in batch])
            b = torch.stack([b_imgs[j] for _, j in batch])
            terms = {"adv_g": 0.0, "cycle_a": 0.0, "cycle_b": 0.0, "identity_a": 0.0, "identity_b": 0.0}
            gen_active = weights.lambda_adv > 0 or weights.lambda_cycle > 0 or weights.lambda_identity > 0
            fake_b = fake_a = None
            total_g = torch.zeros(())
            if gen_active:
                fake_b = g_ab(a)
                fake_a = g_ba(b)
                parts = []
                if weights.lambda_adv > 0:
                    adv_g = adv_gen(d_b, fake_b) + adv_gen(d_a, fake_a)
                    terms["adv_g"] = _scalar(adv_g)
                    parts.append(weights.lambda_adv * adv_g)
                if weights.lambda_cycle > 0:
                    cyc_a = l1_loss(a, g_ba(fake_b))
                    cyc_b = l1_loss(b, g_ab(fake_a))
                    terms["cycle_a"], terms["cycle_b"] = _scalar(cyc_a), _scalar(cyc_b)
                    parts.append(weights.lambda_cycle * (cyc_a + cyc_b))
                if weights.lambda_identity > 0:
                    id_a = l1_loss(a, g_ba(a))
                    id_b = l1_loss(b, g_ab(b))
                    terms["identity_a"], terms["identity_b"] = _scalar(id_a), _scalar(id_b)
                    parts.append(weights.lambda_identity * (id_a + id_b))
                total_g = sum(parts)
                opt_g.zero_grad()
                total_g.backward()
                opt_g.step()
            loss_d_a = loss_d_b = 0.0
            if weights.lambda_adv > 0:
                fa = fake_a.detach()
                fb = fake_b.detach()
                if buf_a is not None:
                    fa = buf_a.push_and_pop(fa)
                    fb = buf_b.push_and_pop(fb)
                da_t = weights.lambda_adv * adv_disc(d_a, a, fa)
                db_t = weights.lambda_adv * adv_disc(d_b, b, fb)
                opt_d.zero_grad()
                (da_t + db_t).backward()
                opt_d.step()
                loss_d_a, loss_d_b = _scalar(da_t), _scalar(db_t)
            row_total = (
                weights.lambda_adv * terms["adv_g"]
                + weights.lambda_cycle * (terms["cycle_a"] + terms["cycle_b"])
                + weights.lambda_identity * (terms["identity_a"] + terms["identity_b"])
            )
            row = {
                "step": step,
                "epoch": epoch,
                "lr_g": lr_g,
                "lr_d": lr_d,
                **terms,
                "loss_d_a": loss_d_a,
                "loss_d_b": loss_d_b,
                "total": row_total,
            }
            _check_finite(step, {k: v for k, v in row.items() if k not in ("step", "epoch")})
            rows.append(row)
            step += 1
    if log_path is not None:
        _write_loss_log(rows, CYCLE_LOG_COLUMNS, log_path)

    net_configs: dict = {"g_ab": gen_ab_cfg, "g_ba": gen_ba_cfg}
    states = {"g_ab": g_ab.state_dict(), "g_ba": g_ba.state_dict()}
    for side, cfgs, nets in (("d_a", d_cfgs_a, d_a), ("d_b", d_cfgs_b, d_b)):
        for view in cfgs:
            key = side if view == "image" else f"{side}_{view}"
            net_configs[key] = cfgs[view]
            states[key] = nets[view].state_dict()
    meta = {
        "schedule": dataclasses.asdict(schedule),
        "weights": dataclasses.asdict(weights),
        "multi_view": multi_view,
        "replay_buffer": use_replay_buffer,
        "log_columns": list(CYCLE_LOG_COLUMNS),
    }
    if meta_extra:
        meta.update(meta_extra)
    return StageCheckpoint(
        role=role,
        net_configs=net_configs,
        states=states,
        optim_states={"g": opt_g.state_dict(), "d": opt_d.state_dict()},
        epochs_completed=schedule.total_epochs,
        meta=meta,
    )


def train_cycle_translator(
    data_a,
    data_b,
    schedule: TrainSchedule,
    weights: LossWeights,
    networks: NetworkPair,
    *,
    log_path: str | Path | None = None,
    use_replay_buffer: bool = True,
) -> StageCheckpoint:
    """Unpaired cycle translation between domains A and B; g_ab maps A -> B."""
    return _train_cycle(
        data_a, data_b, schedule, weights, networks, "cycle_translator",
        log_path=log_path, use_replay_buffer=use_replay_buffer,
    )


def train_day_translator(
    night_rgb,
    day_rgb,
    schedule: TrainSchedule,
    weights: LossWeights,
    networks: NetworkPair,
    *,
    log_path: str | Path | None = None,
    use_replay_buffer: bool = True,
    multi_view: bool = False,
) -> StageCheckpoint:
    """Night-RGB <-> day-RGB cycle pair; the night -> day direction is g_ab.

    multi_view adds blurred/grayscale/gradient-view discriminators per domain
    (off by default: a single patch discriminator per domain).
    """
    return _train_cycle(
        night_rgb, day_rgb, schedule, weights, networks, "day_translator",
        log_path=log_path, use_replay_buffer=use_replay_buffer, multi_view=multi_view,
        meta_extra={"domain_a": "night_rgb", "domain_b": "day_rgb", "night_to_day": "g_ab"},
    )
