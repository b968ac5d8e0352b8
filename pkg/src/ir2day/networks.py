"""Generator and discriminator architectures with hard shape and range contracts.

Two generator families share one config: a resnet encoder/decoder (CycleGAN
style) and a two-level coarse-to-fine generator (a reduced Pix2pixHD: a
half-resolution global branch whose features feed a full-resolution refinement
branch). The discriminator is a patch classifier emitting a score map. All
convolutions use instance normalization; generator convs pad by reflection.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

GENERATOR_ARCHS = ("resnet", "coarse2fine")


@dataclass(frozen=True)
class GeneratorConfig:
    in_channels: int
    out_channels: int
    base_width: int = 32
    n_downsample: int = 2
    n_resblocks: int = 3
    arch: str = "resnet"

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.base_width < 4:
            raise ValueError(f"base_width must be >= 4, got {self.base_width}")
        if self.n_downsample < 1:
            raise ValueError(f"n_downsample must be >= 1, got {self.n_downsample}")
        if self.n_resblocks < 1:
            raise ValueError(f"n_resblocks must be >= 1, got {self.n_resblocks}")
        if self.arch not in GENERATOR_ARCHS:
            raise ValueError(f"arch must be one of {GENERATOR_ARCHS}, got {self.arch!r}")

    @property
    def size_multiple(self) -> int:
        """Input H and W must be multiples of this for output size == input size."""
        extra = 1 if self.arch == "coarse2fine" else 0
        return 2 ** (self.n_downsample + extra)


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_channels: int
    base_width: int = 32
    n_layers: int = 3

    def __post_init__(self):
        if self.in_channels < 1:
            raise ValueError("in_channels must be >= 1")
        if self.base_width < 4:
            raise ValueError(f"base_width must be >= 4, got {self.base_width}")
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")


def init_weights(module: nn.Module, seed: int, std: float = 0.02) -> None:
    """Re-initialize all conv weights N(0, std), biases 0, from a local generator.

    Walks modules in registration order, so identical architectures and seeds
    yield identical parameters regardless of global RNG state.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.normal_(0.0, std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


class ResidualBlock(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(width, width, 3),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(width, width, 3),
            nn.InstanceNorm2d(width),
        )

    def forward(self, x):
        return x + self.block(x)


def _resnet_body(in_channels: int, width: int, n_downsample: int, n_resblocks: int) -> nn.Sequential:
    """Stem + downsampling + residual blocks + mirrored upsampling, ending at `width` features."""
    layers: list[nn.Module] = [
        nn.ReflectionPad2d(3),
        nn.Conv2d(in_channels, width, 7),
        nn.InstanceNorm2d(width),
        nn.ReLU(inplace=True),
    ]
    w = width
    for _ in range(n_downsample):
        layers += [
            nn.ReflectionPad2d(1),
            nn.Conv2d(w, w * 2, 3, stride=2),
            nn.InstanceNorm2d(w * 2),
            nn.ReLU(inplace=True),
        ]
        w *= 2
    layers += [ResidualBlock(w) for _ in range(n_resblocks)]
    for _ in range(n_downsample):
        layers += [
            nn.ConvTranspose2d(w, w // 2, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(w // 2),
            nn.ReLU(inplace=True),
        ]
        w //= 2
    return nn.Sequential(*layers)


class ResnetGenerator(nn.Module):
    """Stride-2 downsampling, residual blocks, mirrored upsampling, final tanh."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        self.body = _resnet_body(
            config.in_channels, config.base_width, config.n_downsample, config.n_resblocks
        )
        self.head = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(config.base_width, config.out_channels, 7),
            nn.Tanh(),
        )

    def forward(self, x):
        _check_channels(x, self.config.in_channels)
        return self.head(self.body(x))


class CoarseToFineGenerator(nn.Module):
    """Half-resolution global branch feeding a full-resolution refinement branch."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        self.global_net = _resnet_body(
            config.in_channels, w, config.n_downsample, config.n_resblocks
        )
        self.refine_stem = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(config.in_channels, w, 7),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(w, w, 3, stride=2),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
        )
        self.refine_blocks = nn.Sequential(*[ResidualBlock(w) for _ in range(config.n_resblocks)])
        self.refine_head = nn.Sequential(
            nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(3),
            nn.Conv2d(w, config.out_channels, 7),
            nn.Tanh(),
        )

    def forward(self, x):
        _check_channels(x, self.config.in_channels)
        coarse = F.avg_pool2d(x, 2)
        feats = self.global_net(coarse)
        y = self.refine_stem(x)
        y = self.refine_blocks(y + feats)
        return self.refine_head(y)


class PatchDiscriminator(nn.Module):
    """n_layers stride-2 4x4 convs, one stride-1 4x4 conv, then a 1-channel 4x4 head.

    Output is a (N, 1, h', w') patch score map; h'/w' follow the conv
    arithmetic in score_map_hw exactly.
    """

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        layers: list[nn.Module] = [
            nn.Conv2d(config.in_channels, w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        mult = 1
        for n in range(1, config.n_layers):
            prev, mult = mult, min(2**n, 8)
            layers += [
                nn.Conv2d(w * prev, w * mult, 4, stride=2, padding=1),
                nn.InstanceNorm2d(w * mult),
                nn.LeakyReLU(0.2, inplace=True),
            ]
        prev, mult = mult, min(2**config.n_layers, 8)
        layers += [
            nn.Conv2d(w * prev, w * mult, 4, stride=1, padding=1),
            nn.InstanceNorm2d(w * mult),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w * mult, 1, 4, stride=1, padding=1),
        ]
        self.model = nn.Sequential(*layers)

    @staticmethod
    def score_map_hw(config: DiscriminatorConfig, height: int, width: int) -> tuple[int, int]:
        """Score-map size for a given input size; raises if the stack bottoms out."""

        def step(size: int, stride: int) -> int:
            return (size + 2 - 4) // stride + 1

        h, w = height, width
        for _ in range(config.n_layers):
            h, w = step(h, 2), step(w, 2)
            if h < 1 or w < 1:
                raise ValueError(f"input {height}x{width} too small for {config.n_layers}-layer stack")
        for _ in range(2):
            h, w = step(h, 1), step(w, 1)
            if h < 1 or w < 1:
                raise ValueError(f"input {height}x{width} too small for {config.n_layers}-layer stack")
        return h, w

    def forward(self, x):
        _check_channels(x, self.config.in_channels)
        self.score_map_hw(self.config, x.shape[-2], x.shape[-1])
        return self.model(x)


def _check_channels(x: torch.Tensor, expected: int) -> None:
    if x.dim() != 4:
        raise ValueError(f"expected a (N, C, H, W) batch, got shape {tuple(x.shape)}")
    if x.shape[1] != expected:
        raise ValueError(f"expected {expected} input channels, got {x.shape[1]}")


def build_generator(config: GeneratorConfig, seed: int = 0) -> nn.Module:
    net = ResnetGenerator(config) if config.arch == "resnet" else CoarseToFineGenerator(config)
    init_weights(net, seed)
    return net


def build_discriminator(config: DiscriminatorConfig, seed: int = 0) -> nn.Module:
    net = PatchDiscriminator(config)
    init_weights(net, seed)
    return net
