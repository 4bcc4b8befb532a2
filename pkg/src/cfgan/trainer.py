"""Adversarial training of the explainer against a frozen black box.

Each step samples a batch, conditions the generator on uniformly drawn
target bins, updates the discriminator on the hinge loss (real images at
their own bin, fakes at the sampled bin), then updates encoder+generator
on the adversarial, KL-compatibility, reconstruction and cycle terms.
The black box only ever provides posterior values and input gradients.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from cfgan.blackbox import BlackBoxClassifier, images_to_tensor
from cfgan.conditioning import ConditionSpec, bin_index
from cfgan.losses import (LossWeights, cycle_loss, hinge_d_loss, hinge_g_loss,
                          kl_compatibility, reconstruction_loss,
                          total_generator_objective)
from cfgan.nets import (ArchitectureConfig, ConditionalGenerator, Encoder,
                        ProjectionDiscriminator)
from cfgan.synthdata import LabeledImageDataset

BUNDLE_FORMAT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite or past the divergence threshold."""

    def __init__(self, message: str, step: int, last_checkpoint: str | None):
        super().__init__(message)
        self.step = step
        self.last_checkpoint = last_checkpoint


class BundleFormatError(ValueError):
    """Checkpoint directory does not match the expected manifest schema."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for the explainer.

    Learning rates and moment coefficients follow the usual two-timescale
    recipe for projection-style GANs; everything is overridable.
    """

    delta: float = 0.1
    weights: LossWeights = field(default_factory=LossWeights)
    arch: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    g_lr: float = 2e-4
    d_lr: float = 4e-4
    betas: tuple[float, float] = (0.0, 0.9)
    batch_size: int = 32
    d_steps_per_g_step: int = 1
    total_steps: int = 3500
    seed: int = 0
    checkpoint_interval: int = 500
    divergence_threshold: float = 1e4
    kl_reverse: bool = False

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.d_steps_per_g_step < 1:
            raise ValueError("d_steps_per_g_step must be >= 1")


@dataclass
class ExplainerBundle:
    """Encoder, generator, discriminator and their shared condition grid."""

    encoder: Encoder
    generator: ConditionalGenerator
    discriminator: ProjectionDiscriminator
    spec: ConditionSpec
    manifest: dict

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.encoder.config.image_shape

    def eval_mode(self) -> "ExplainerBundle":
        self.encoder.eval()
        self.generator.eval()
        self.discriminator.eval()
        return self

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """Inference-mode latent for (n,C,H,W) input."""
        self.encoder.eval()
        with torch.no_grad():
            return self.encoder(x)

    def generate(self, z: torch.Tensor, k) -> torch.Tensor:
        """Inference-mode generation from latent + bin index."""
        self.generator.eval()
        with torch.no_grad():
            return self.generator(z, k)

    def embed_images(self, images: np.ndarray, pooling: str = "flatten") -> np.ndarray:
        """Encoder embedding of numpy images; 'flatten' or 'mean' pooling."""
        z = self.encode(images_to_tensor(images))
        if pooling == "flatten":
            return z.reshape(z.shape[0], -1).cpu().numpy().astype(np.float64)
        if pooling == "mean":
            return z.mean(dim=(2, 3)).cpu().numpy().astype(np.float64)
        raise ValueError(f"unknown pooling {pooling!r}")


def build_bundle(config: TrainConfig) -> ExplainerBundle:
    """Freshly initialized nets; parameter draw is fixed by the seed."""
    spec = ConditionSpec.from_delta(config.delta)
    torch.manual_seed(config.seed)
    encoder = Encoder(config.arch)
    generator = ConditionalGenerator(config.arch, spec.n_bins)
    discriminator = ProjectionDiscriminator(config.arch, spec.n_bins)
    manifest = _manifest_from_config(config, spec, training_step=0)
    return ExplainerBundle(encoder, generator, discriminator, spec, manifest)


def _manifest_from_config(config: TrainConfig, spec: ConditionSpec, training_step: int) -> dict:
    arch = config.arch
    return {
        "format_version": BUNDLE_FORMAT_VERSION,
        "delta": config.delta,
        "n_bins": spec.n_bins,
        "image_shape": list(arch.image_shape),
        "base_width": arch.base_width,
        "blocks": arch.blocks,
        "channel_multipliers": list(arch.channel_multipliers),
        "disc_width": arch.disc_width,
        "disc_blocks": arch.disc_blocks,
        "disc_channel_multipliers": list(arch.disc_channel_multipliers),
        "spectral_norm": arch.use_spectral_norm,
        "training_step": training_step,
        "seed": config.seed,
    }


class _MetricsWriter:
    """step,loss_name,value rows; one row per logged loss per step."""

    def __init__(self, path: Path | None):
        self.path = path
        self._fh = open(path, "w") if path is not None else None
        if self._fh is not None:
            self._fh.write("step,loss_name,value\n")

    def log(self, step: int, name: str, value: float):
        if self._fh is not None:
            self._fh.write(f"{step},{name},{value!r}\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def train_explainer(dataset: LabeledImageDataset, blackbox: BlackBoxClassifier,
                    config: TrainConfig, out_dir=None) -> ExplainerBundle:
    """Optimize encoder+generator against the discriminator.

    When ``out_dir`` is given, a ``metrics.csv`` file and periodic
    checkpoints (``checkpoints/step_<n>``) are written there.  Identical
    config and seed reproduce the metrics file byte for byte.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if tuple(config.arch.image_shape) != (dataset.image_shape[2],) + dataset.image_shape[:2]:
        raise ValueError(
            f"architecture image shape {config.arch.image_shape} does not match "
            f"dataset images {dataset.image_shape}"
        )

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    bundle = build_bundle(config)
    spec = bundle.spec
    enc, gen, disc = bundle.encoder, bundle.generator, bundle.discriminator
    enc.train(), gen.train(), disc.train()

    images = images_to_tensor(dataset.images)
    n = len(dataset)
    sampler = torch.Generator().manual_seed(config.seed)
    centers = torch.tensor(
        [(k + 0.5) / spec.n_bins for k in range(spec.n_bins)], dtype=torch.float32
    ).clamp(1e-4, 1 - 1e-4)

    g_params = list(enc.parameters()) + list(gen.parameters())
    d_opt = torch.optim.Adam(disc.parameters(), lr=config.d_lr, betas=config.betas)
    g_opt = torch.optim.Adam(g_params, lr=config.g_lr, betas=config.betas)

    metrics = _MetricsWriter(out_dir / "metrics.csv" if out_dir is not None else None)
    last_checkpoint: str | None = None

    def _guard(step: int, name: str, value: float):
        if not np.isfinite(value):
            metrics.close()
            raise TrainingDiverged(
                f"{name} became non-finite at step {step}"
                + (f"; last good checkpoint: {last_checkpoint}" if last_checkpoint else ""),
                step=step, last_checkpoint=last_checkpoint)
        if abs(value) > config.divergence_threshold:
            metrics.close()
            raise TrainingDiverged(
                f"{name}={value:.3g} exceeded divergence threshold "
                f"{config.divergence_threshold:g} at step {step}"
                + (f"; last good checkpoint: {last_checkpoint}" if last_checkpoint else ""),
                step=step, last_checkpoint=last_checkpoint)

    try:
        for step in range(1, config.total_steps + 1):
            idx = torch.randint(0, n, (config.batch_size,), generator=sampler)
            x = images[idx]
            with torch.no_grad():
                f_x = blackbox.posterior(x)
            k0 = torch.from_numpy(bin_index(f_x.numpy().astype(np.float64), spec))
            k = torch.randint(0, spec.n_bins, (config.batch_size,), generator=sampler)

            z = enc(x)
            fake = gen(z, k)

            d_loss = hinge_d_loss(disc(x, k0), disc(fake.detach(), k))
            d_opt.zero_grad()
            d_loss.backward(retain_graph=False)
            d_opt.step()
            _guard(step, "d_loss", d_loss.item())
            metrics.log(step, "d_loss", d_loss.item())

            if step % config.d_steps_per_g_step == 0:
                g_adv = hinge_g_loss(disc(fake, k))
                f_fake = blackbox.posterior(fake)
                kl = kl_compatibility(centers[k], f_fake, reverse=config.kl_reverse).mean()
                x_rec = gen(z, k0)
                rec = reconstruction_loss(x, x_rec)
                x_cyc = gen(enc(fake), k0)
                cyc = cycle_loss(x, x_cyc)
                total = total_generator_objective(
                    {"adversarial": g_adv, "compatibility": kl,
                     "reconstruction": rec, "cycle": cyc},
                    config.weights,
                )
                g_opt.zero_grad()
                total.backward()
                g_opt.step()
                for name, value in (("g_adv", g_adv), ("kl", kl), ("rec", rec),
                                    ("cyc", cyc), ("g_total", total)):
                    _guard(step, name, value.item())
                    metrics.log(step, name, value.item())

            if out_dir is not None and config.checkpoint_interval > 0 \
                    and step % config.checkpoint_interval == 0:
                bundle.manifest = _manifest_from_config(config, spec, training_step=step)
                ckpt = out_dir / "checkpoints" / f"step_{step:07d}"
                save_bundle(bundle, ckpt)
                last_checkpoint = str(ckpt)
                enc.train(), gen.train(), disc.train()
    finally:
        metrics.close()

    bundle.manifest = _manifest_from_config(config, spec, training_step=config.total_steps)
    if out_dir is not None:
        save_bundle(bundle, out_dir / "bundle")
    return bundle.eval_mode()


def save_bundle(bundle: ExplainerBundle, path) -> Path:
    """Checkpoint directory: weights blob + manifest.json, written atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / (path.name + ".tmp")
    if tmp.exists():
        import shutil

        shutil.rmtree(tmp)
    tmp.mkdir()
    torch.save(
        {
            "encoder": bundle.encoder.state_dict(),
            "generator": bundle.generator.state_dict(),
            "discriminator": bundle.discriminator.state_dict(),
        },
        tmp / "weights.pt",
    )
    (tmp / "manifest.json").write_text(json.dumps(bundle.manifest, indent=2, sort_keys=True))
    if path.exists():
        import shutil

        shutil.rmtree(path)
    os.replace(tmp, path)
    return path


_MANIFEST_FIELDS = (
    "format_version", "delta", "n_bins", "image_shape", "base_width", "blocks",
    "channel_multipliers", "disc_width", "disc_blocks", "disc_channel_multipliers",
    "spectral_norm", "training_step", "seed",
)


def load_bundle(path) -> ExplainerBundle:
    """Rebuild a bundle from ``save_bundle`` output; strict manifest checks."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise BundleFormatError(f"missing manifest.json under {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"manifest.json is not valid JSON: {exc}") from exc
    for name in _MANIFEST_FIELDS:
        if name not in manifest:
            raise BundleFormatError(f"bundle manifest missing field {name!r}")
    if manifest["format_version"] != BUNDLE_FORMAT_VERSION:
        raise BundleFormatError(
            f"bundle format_version {manifest['format_version']} != {BUNDLE_FORMAT_VERSION}"
        )
    arch = ArchitectureConfig(
        image_shape=tuple(manifest["image_shape"]),
        base_width=manifest["base_width"],
        blocks=manifest["blocks"],
        channel_multipliers=tuple(manifest["channel_multipliers"]),
        disc_width=manifest["disc_width"],
        disc_blocks=manifest["disc_blocks"],
        disc_channel_multipliers=tuple(manifest["disc_channel_multipliers"]),
        use_spectral_norm=manifest["spectral_norm"],
    )
    spec = ConditionSpec(delta=manifest["delta"], n_bins=manifest["n_bins"])
    encoder = Encoder(arch)
    generator = ConditionalGenerator(arch, spec.n_bins)
    discriminator = ProjectionDiscriminator(arch, spec.n_bins)
    state = torch.load(path / "weights.pt", weights_only=True)
    encoder.load_state_dict(state["encoder"])
    generator.load_state_dict(state["generator"])
    discriminator.load_state_dict(state["discriminator"])
    bundle = ExplainerBundle(encoder, generator, discriminator, spec, manifest)
    return bundle.eval_mode()
