"""Training losses: hinge adversarial pair, KL compatibility, L1 terms.

All reductions are means so the weight defaults transfer across image and
batch sizes.  Every function works on torch tensors and keeps the autograd
graph; plain Python floats are accepted and returned for the scalar ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from cfgan.conditioning import POSTERIOR_EPS


@dataclass(frozen=True)
class LossWeights:
    """Relative importance of the generator-side loss terms.

    The cycle term shares ``reconstruction``'s weight.
    """

    adversarial: float = 1.0
    compatibility: float = 1.0
    reconstruction: float = 100.0

    def __post_init__(self):
        for name in ("adversarial", "compatibility", "reconstruction"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name!r} must be non-negative")


def _as_tensor(x) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.get_default_dtype())


def hinge_d_loss(real_scores, fake_scores) -> torch.Tensor:
    """Discriminator hinge loss: ``mean(relu(1-real)) + mean(relu(1+fake))``."""
    real = _as_tensor(real_scores)
    fake = _as_tensor(fake_scores)
    if real.numel() == 0 or fake.numel() == 0:
        raise ValueError("hinge_d_loss needs non-empty score batches")
    return torch.relu(1.0 - real).mean() + torch.relu(1.0 + fake).mean()


def hinge_g_loss(fake_scores) -> torch.Tensor:
    """Generator hinge loss: negative mean of the fake scores."""
    fake = _as_tensor(fake_scores)
    if fake.numel() == 0:
        raise ValueError("hinge_g_loss needs a non-empty score batch")
    return -fake.mean()


def kl_compatibility(target, actual, reverse: bool = False):
    """Bernoulli KL divergence between a target and an actual posterior.

    Both sides are clamped to ``[eps, 1-eps]`` before evaluation, so exact
    0/1 posteriors cannot blow up the logs.  Written direction is
    ``KL(target || actual)``; ``reverse=True`` swaps the arguments.
    Elementwise over same-shape tensors; scalars in, float out.
    """
    scalar_in = not isinstance(target, torch.Tensor) and not isinstance(actual, torch.Tensor)
    if scalar_in:
        target = torch.as_tensor(target, dtype=torch.float64)
        actual = torch.as_tensor(actual, dtype=torch.float64)
    p = torch.clamp(_as_tensor(target), POSTERIOR_EPS, 1.0 - POSTERIOR_EPS)
    q = torch.clamp(_as_tensor(actual), POSTERIOR_EPS, 1.0 - POSTERIOR_EPS)
    if reverse:
        p, q = q, p
    kl = p * torch.log(p / q) + (1.0 - p) * torch.log((1.0 - p) / (1.0 - q))
    if scalar_in and kl.ndim == 0:
        return float(kl)
    return kl


def reconstruction_loss(x, x_rec) -> torch.Tensor:
    """Mean absolute pixel difference."""
    a, b = _as_tensor(x), _as_tensor(x_rec)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def cycle_loss(x, x_cyc) -> torch.Tensor:
    """Mean absolute difference between the query and its cycled image."""
    return reconstruction_loss(x, x_cyc)


def total_generator_objective(terms: dict, weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the generator-side terms.

    ``terms`` keys: ``adversarial``, ``compatibility``, ``reconstruction``,
    ``cycle``.  Reconstruction and cycle share one weight.
    """
    expected = {"adversarial", "compatibility", "reconstruction", "cycle"}
    if set(terms) != expected:
        raise ValueError(f"expected terms {sorted(expected)}, got {sorted(terms)}")
    return (
        weights.adversarial * _as_tensor(terms["adversarial"])
        + weights.compatibility * _as_tensor(terms["compatibility"])
        + weights.reconstruction * _as_tensor(terms["reconstruction"])
        + weights.reconstruction * _as_tensor(terms["cycle"])
    )
