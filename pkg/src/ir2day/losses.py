"""Training objectives: adversarial, cycle-consistency, pixel L1, perceptual, total-variation.

All functions return scalar torch tensors and stay differentiable w.r.t. their
image (or score-map) inputs. Sign convention: every value is a loss to
minimize, >= 0 (the vanilla adversarial terms after the log-sigmoid clamp
included).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .networks import init_weights

LOG_EPS = 1e-7
ADV_MODES = ("vanilla", "lsgan")
ADV_SIDES = ("generator", "discriminator")


@dataclass(frozen=True)
class LossWeights:
    """Weights for the training objectives of one stage.

    lambda_adv scales the adversarial term on both sides (1.0 is the
    conventional on switch; 0 turns GAN training off entirely).
    lambda_identity is the CycleGAN identity term, off by default.
    Defaults beyond lambda_cycle=10 are artifact conventions, not published
    values; colorizer runs override them (see training.default_weights).
    """

    lambda_adv: float = 1.0
    lambda_cycle: float = 10.0
    lambda_l1: float = 0.0
    lambda_perceptual: float = 0.0
    lambda_tv: float = 0.0
    lambda_identity: float = 0.0
    adv_mode: str = "lsgan"

    def __post_init__(self):
        for name in (
            "lambda_adv",
            "lambda_cycle",
            "lambda_l1",
            "lambda_perceptual",
            "lambda_tv",
            "lambda_identity",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.adv_mode not in ADV_MODES:
            raise ValueError(f"adv_mode must be one of {ADV_MODES}, got {self.adv_mode!r}")


def _clamped_log_sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.log(torch.clamp(torch.sigmoid(x), min=LOG_EPS))


def adversarial_loss(
    d_real: torch.Tensor | None,
    d_fake: torch.Tensor,
    mode: str = "lsgan",
    side: str = "generator",
) -> torch.Tensor:
    """GAN loss on raw (pre-sigmoid) patch score maps.

    vanilla/discriminator: -[mean log s(d_real) + mean log(1 - s(d_fake))]
    vanilla/generator:     -mean log s(d_fake)            (non-saturating)
    lsgan/discriminator:   mean (d_real - 1)^2 + mean d_fake^2
    lsgan/generator:       mean (d_fake - 1)^2
    d_real may be None on the generator side (unused there).
    """
    if mode not in ADV_MODES:
        raise ValueError(f"mode must be one of {ADV_MODES}, got {mode!r}")
    if side not in ADV_SIDES:
        raise ValueError(f"side must be one of {ADV_SIDES}, got {side!r}")
    if side == "discriminator":
        if d_real is None:
            raise ValueError("discriminator side requires d_real")
        if d_real.shape != d_fake.shape:
            raise ValueError(f"real/fake score shapes differ: {tuple(d_real.shape)} vs {tuple(d_fake.shape)}")
        if mode == "vanilla":
            return -(_clamped_log_sigmoid(d_real).mean() + torch.log(
                torch.clamp(1.0 - torch.sigmoid(d_fake), min=LOG_EPS)
            ).mean())
        return ((d_real - 1.0) ** 2).mean() + (d_fake**2).mean()
    if mode == "vanilla":
        return -_clamped_log_sigmoid(d_fake).mean()
    return ((d_fake - 1.0) ** 2).mean()


def l1_loss(y: torch.Tensor, y_hat: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(y_hat.shape)}")
    return (y - y_hat).abs().mean()


def cycle_consistency_loss(x: torch.Tensor, x_reconstructed: torch.Tensor) -> torch.Tensor:
    """Mean absolute reconstruction error; same function as l1_loss, different pipeline edge."""
    return l1_loss(x, x_reconstructed)


def total_variation_loss(img: torch.Tensor) -> torch.Tensor:
    """Anisotropic L1 total variation, normalized by C*H*W, averaged over batch."""
    if img.dim() != 4:
        raise ValueError(f"expected a (N, C, H, W) batch, got shape {tuple(img.shape)}")
    n, c, h, w = img.shape
    if h < 2 or w < 2:
        raise ValueError(f"degenerate spatial size {h}x{w}; need H >= 2 and W >= 2")
    dh = (img[..., :, 1:] - img[..., :, :-1]).abs().reshape(n, -1).sum(dim=1)
    dv = (img[..., 1:, :] - img[..., :-1, :]).abs().reshape(n, -1).sum(dim=1)
    return ((dh + dv) / float(c * h * w)).mean()


def perceptual_loss(y: torch.Tensor, y_hat: torch.Tensor, fx: "nn.Module") -> torch.Tensor:
    """Sum over feature depths of mean squared feature differences.

    1-channel inputs are replicated to the extractor's channel count.
    """
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(y_hat.shape)}")
    want = getattr(fx, "in_channels", 3)
    if y.shape[1] == 1 and want == 3:
        y = y.repeat(1, 3, 1, 1)
        y_hat = y_hat.repeat(1, 3, 1, 1)
    total = None
    for fy, fyh in zip(fx(y), fx(y_hat)):
        term = F.mse_loss(fy, fyh)
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# frozen feature extractors
# ---------------------------------------------------------------------------


class RandomConvFeatures(nn.Module):
    """Fixed-seed 4-layer strided conv stack emitting features at 2 depths.

    Parameters are frozen at construction and never registered with any
    optimizer; identical seeds give identical features.
    """

    in_channels = 3

    def __init__(self, seed: int, base_width: int = 16):
        super().__init__()
        w = base_width
        self.c1 = nn.Conv2d(3, w, 3, stride=2, padding=1)
        self.c2 = nn.Conv2d(w, 2 * w, 3, stride=2, padding=1)
        self.c3 = nn.Conv2d(2 * w, 4 * w, 3, stride=2, padding=1)
        self.c4 = nn.Conv2d(4 * w, 4 * w, 3, stride=2, padding=1)
        init_weights(self, seed, std=0.2)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x) -> list[torch.Tensor]:
        h = F.relu(self.c1(x))
        f1 = F.relu(self.c2(h))
        h = F.relu(self.c3(f1))
        f2 = self.c4(h)
        return [f1, f2]


_VGG16_PLAN = (64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512)
VGG16_TAPS = ("relu1_2", "relu2_2", "relu3_3", "relu4_3", "relu5_3")


class VggStyleFeatures(nn.Module):
    """VGG-16 conv stack tapping features at named relu layers.

    Weights come from a state-dict file; this package ships none. Inputs are
    expected in [-1, 1]; no dataset-statistics normalization is applied.
    """

    in_channels = 3

    def __init__(self, weights_path: str | Path | None = None, taps: tuple[str, ...] = ("relu2_2", "relu3_3")):
        super().__init__()
        for t in taps:
            if t not in VGG16_TAPS:
                raise ValueError(f"unknown tap {t!r}; choose from {VGG16_TAPS}")
        self.taps = tuple(taps)
        layers: list[nn.Module] = []
        names: list[str] = []
        c_in, block, conv_i = 3, 1, 1
        for item in _VGG16_PLAN:
            if item == "M":
                layers.append(nn.MaxPool2d(2))
                names.append(f"pool{block}")
                block += 1
                conv_i = 1
            else:
                layers.append(nn.Conv2d(c_in, item, 3, padding=1))
                names.append(f"conv{block}_{conv_i}")
                layers.append(nn.ReLU(inplace=True))
                names.append(f"relu{block}_{conv_i}")
                c_in = item
                conv_i += 1
        self.features = nn.Sequential(*layers)
        self._names = names
        if weights_path is not None:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            self.load_state_dict(state)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x) -> list[torch.Tensor]:
        out = []
        for name, layer in zip(self._names, self.features):
            x = layer(x)
            if name in self.taps:
                out.append(x)
        return out


def build_feature_extractor(kind: str, seed_or_path=0, taps=None) -> nn.Module:
    """random_conv: seeded frozen conv stack. pretrained: VGG-16-style stack from a weights file."""
    if kind == "random_conv":
        return RandomConvFeatures(int(seed_or_path))
    if kind == "pretrained":
        path = Path(seed_or_path)
        if not path.is_file():
            raise FileNotFoundError(f"feature extractor weights not found: {path}")
        kwargs = {} if taps is None else {"taps": tuple(taps)}
        return VggStyleFeatures(path, **kwargs)
    raise ValueError(f"unknown feature extractor kind {kind!r}")
