"""Encoder, condition-driven generator, and projection discriminator.

The generator receives a bin index and modulates every residual block
through conditional batch normalization (one learned scale/shift embedding
per bin per block).  The discriminator scores an image/condition pair as
an unconditional scalar head plus an ordinal condition term: a cumulative
sum of inner products between learned per-bin vectors and the feature
embedding, which encodes that conditions are ordered.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm


class ShapeError(ValueError):
    """Input violates a network's shape contract."""


@dataclass(frozen=True)
class ArchitectureConfig:
    """Shape knobs shared by the three networks.

    Desk default is 3 residual blocks at 32x32; 5 blocks reproduces the
    full-scale layout at 128x128.
    """

    image_shape: tuple[int, int, int] = (1, 32, 32)
    base_width: int = 24
    blocks: int = 3
    channel_multipliers: tuple[int, ...] = (1, 2, 2)
    disc_width: int = 24
    disc_blocks: int = 3
    disc_channel_multipliers: tuple[int, ...] = (1, 2, 2)
    use_spectral_norm: bool = True

    def __post_init__(self):
        if len(self.channel_multipliers) != self.blocks:
            raise ValueError("channel_multipliers length must equal blocks")
        if len(self.disc_channel_multipliers) != self.disc_blocks:
            raise ValueError("disc_channel_multipliers length must equal disc_blocks")
        c, h, w = self.image_shape
        down = 2 ** self.blocks
        if h % down or w % down:
            raise ValueError(f"image size {h}x{w} not divisible by 2^{self.blocks}")

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(self.base_width * m for m in self.channel_multipliers)

    @property
    def disc_widths(self) -> tuple[int, ...]:
        return tuple(self.disc_width * m for m in self.disc_channel_multipliers)

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        c, h, w = self.image_shape
        down = 2 ** self.blocks
        return (self.widths[-1], h // down, w // down)


def _check_finite(x: torch.Tensor, what: str):
    if not torch.isfinite(x).all():
        raise ShapeError(f"{what} contains non-finite values")


class ConditionalBatchNorm2d(nn.Module):
    """Batch norm whose affine transform is selected by the bin index."""

    def __init__(self, num_features: int, n_bins: int):
        super().__init__()
        self.num_features = num_features
        self.bn = nn.BatchNorm2d(num_features, affine=False)
        self.embed = nn.Embedding(n_bins, 2 * num_features)
        with torch.no_grad():
            self.embed.weight[:, :num_features].fill_(1.0)
            self.embed.weight[:, num_features:].zero_()

    def forward(self, x: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        h = self.bn(x)
        gamma, beta = self.embed(k).chunk(2, dim=1)
        return gamma.unsqueeze(-1).unsqueeze(-1) * h + beta.unsqueeze(-1).unsqueeze(-1)


class EncoderBlock(nn.Module):
    """BN-ReLU-Conv3-BN-ReLU-Conv3 with 2x downsampling and a 1x1 skip."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(c_in)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.pool = nn.AvgPool2d(2)
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(torch.relu(self.bn1(x)))
        h = self.conv2(torch.relu(self.bn2(h)))
        return self.pool(h) + self.pool(self.skip(x))


class Encoder(nn.Module):
    """Downsampling residual net mapping an image to a spatial latent map."""

    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.config = config
        c, _, _ = config.image_shape
        widths = config.widths
        self.stem = nn.Conv2d(c, widths[0], 3, padding=1)
        self.blocks = nn.ModuleList(
            EncoderBlock(a, b) for a, b in zip((widths[0],) + widths, widths)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or tuple(x.shape[1:]) != self.config.image_shape:
            raise ShapeError(
                f"encoder expects (*, {self.config.image_shape}), got {tuple(x.shape)}"
            )
        _check_finite(x, "encoder input")
        h = self.stem(x)
        for block in self.blocks:
            h = block(h)
        return h


class GeneratorBlock(nn.Module):
    """CBN-ReLU-Conv3-CBN-ReLU-Conv3 with 2x upsampling and a 1x1 skip."""

    def __init__(self, c_in: int, c_out: int, n_bins: int):
        super().__init__()
        self.cbn1 = ConditionalBatchNorm2d(c_in, n_bins)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.cbn2 = ConditionalBatchNorm2d(c_out, n_bins)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        h = self.up(torch.relu(self.cbn1(x, k)))
        h = self.conv1(h)
        h = self.conv2(torch.relu(self.cbn2(h, k)))
        return h + self.skip(self.up(x))


class ConditionalGenerator(nn.Module):
    """Upsampling residual net from latent map + bin index to an image in [0,1]."""

    def __init__(self, config: ArchitectureConfig, n_bins: int):
        super().__init__()
        self.config = config
        self.n_bins = n_bins
        widths = tuple(reversed(config.widths))
        out_widths = widths[1:] + (config.base_width,)
        self.blocks = nn.ModuleList(
            GeneratorBlock(a, b, n_bins) for a, b in zip(widths, out_widths)
        )
        c, _, _ = config.image_shape
        self.out_bn = nn.BatchNorm2d(config.base_width)
        self.out_conv = nn.Conv2d(config.base_width, c, 3, padding=1)

    def _check_condition(self, k, batch: int) -> torch.Tensor:
        k = torch.as_tensor(k, dtype=torch.long)
        if k.dim() == 0:
            k = k.expand(batch)
        if k.shape != (batch,):
            raise ShapeError(f"condition batch shape {tuple(k.shape)} != ({batch},)")
        if (k < 0).any() or (k >= self.n_bins).any():
            raise ShapeError(f"bin index outside [0, {self.n_bins - 1}]")
        return k

    def forward(self, z: torch.Tensor, k) -> torch.Tensor:
        if z.dim() != 4 or tuple(z.shape[1:]) != self.config.latent_shape:
            raise ShapeError(
                f"generator expects latent (*, {self.config.latent_shape}), got {tuple(z.shape)}"
            )
        _check_finite(z, "generator input")
        k = self._check_condition(k, z.shape[0])
        h = z
        for block in self.blocks:
            h = block(h, k)
        h = self.out_conv(torch.relu(self.out_bn(h)))
        return torch.sigmoid(h)


class DiscriminatorBlock(nn.Module):
    """ReLU-Conv3-ReLU-Conv3 with 2x downsampling; no normalization."""

    def __init__(self, c_in: int, c_out: int, use_sn: bool, first: bool = False):
        super().__init__()
        wrap = spectral_norm if use_sn else (lambda m: m)
        self.first = first
        self.conv1 = wrap(nn.Conv2d(c_in, c_out, 3, padding=1))
        self.conv2 = wrap(nn.Conv2d(c_out, c_out, 3, padding=1))
        self.pool = nn.AvgPool2d(2)
        self.skip = wrap(nn.Conv2d(c_in, c_out, 1)) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x if self.first else torch.relu(x)
        h = self.conv1(h)
        h = self.conv2(torch.relu(h))
        return self.pool(h) + self.pool(self.skip(x))


class ProjectionDiscriminator(nn.Module):
    """Feature net phi, scalar head psi, and N-1 ordinal condition vectors.

    ``score(x, k) = psi(phi(x)) + sum_{i<k} v_i . phi(x)``.
    """

    def __init__(self, config: ArchitectureConfig, n_bins: int):
        super().__init__()
        self.config = config
        self.n_bins = n_bins
        wrap = spectral_norm if config.use_spectral_norm else (lambda m: m)
        c, _, _ = config.image_shape
        widths = config.disc_widths
        self.stem = wrap(nn.Conv2d(c, widths[0], 3, padding=1))
        self.blocks = nn.ModuleList(
            DiscriminatorBlock(a, b, config.use_spectral_norm, first=(i == 0))
            for i, (a, b) in enumerate(zip((widths[0],) + widths, widths))
        )
        self.psi = wrap(nn.Linear(widths[-1], 1))
        self.ordinal = nn.Parameter(torch.zeros(n_bins - 1, widths[-1]))
        nn.init.normal_(self.ordinal, std=0.02)

    @property
    def feature_dim(self) -> int:
        return self.config.disc_widths[-1]

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """phi(x): global-sum-pooled feature vector, shape (n, feature_dim)."""
        if x.dim() != 4 or tuple(x.shape[1:]) != self.config.image_shape:
            raise ShapeError(
                f"discriminator expects (*, {self.config.image_shape}), got {tuple(x.shape)}"
            )
        h = self.stem(x)
        for block in self.blocks:
            h = block(h)
        return torch.relu(h).sum(dim=(2, 3))

    def _check_condition(self, k, batch: int) -> torch.Tensor:
        k = torch.as_tensor(k, dtype=torch.long)
        if k.dim() == 0:
            k = k.expand(batch)
        if k.shape != (batch,):
            raise ShapeError(f"condition batch shape {tuple(k.shape)} != ({batch},)")
        if (k < 0).any() or (k >= self.n_bins).any():
            raise ShapeError(f"bin index outside [0, {self.n_bins - 1}]")
        return k

    def ordinal_ratio(self, features: torch.Tensor, k) -> torch.Tensor:
        """Cumulative sum of the first k inner products v_i . phi(x)."""
        k = self._check_condition(k, features.shape[0])
        inner = features @ self.ordinal.t()  # (n, n_bins-1)
        cum = torch.cumsum(inner, dim=1)
        cum = torch.cat([torch.zeros_like(cum[:, :1]), cum], dim=1)  # r(0) = 0
        return cum.gather(1, k.unsqueeze(1)).squeeze(1)

    def forward(self, x: torch.Tensor, k) -> torch.Tensor:
        phi = self.features(x)
        return self.psi(phi).squeeze(1) + self.ordinal_ratio(phi, k)


def encode(encoder: Encoder, x: torch.Tensor) -> torch.Tensor:
    return encoder(x)


def generate(generator: ConditionalGenerator, z: torch.Tensor, k) -> torch.Tensor:
    return generator(z, k)


def ordinal_ratio(disc: ProjectionDiscriminator, features: torch.Tensor, k) -> torch.Tensor:
    return disc.ordinal_ratio(features, k)


def discriminate(disc: ProjectionDiscriminator, x: torch.Tensor, k) -> torch.Tensor:
    return disc(x, k)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
