"""Shared stubs and small builders for the test suite."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from cfgan.blackbox import BlackBoxClassifier, images_to_tensor
from cfgan.conditioning import ConditionSpec, bin_target_posterior


class ConstantNet(nn.Module):
    """Outputs one fixed posterior for every image."""

    def __init__(self, value: float, shape=(1, 8, 8)):
        super().__init__()
        self.value = value
        # a dummy parameter so gradient calls are well-defined (and zero)
        self.bias = nn.Parameter(torch.zeros(1))

    def forward(self, x):
        return torch.full((x.shape[0],), self.value) + 0.0 * x.sum(dim=(1, 2, 3)) + 0.0 * self.bias


class LinearLogitNet(nn.Module):
    """sigmoid(w . x): closed-form gradient sigma' * w."""

    def __init__(self, weights: torch.Tensor):
        super().__init__()
        self.w = nn.Parameter(weights.clone())

    def forward(self, x):
        logit = (x * self.w).sum(dim=(1, 2, 3))
        return torch.sigmoid(logit)


class MeanPixelNet(nn.Module):
    """Posterior equals the mean pixel value; handy for perfect stubs."""

    def __init__(self):
        super().__init__()
        self.bias = nn.Parameter(torch.zeros(1))

    def forward(self, x):
        return x.mean(dim=(1, 2, 3)) + 0.0 * self.bias


def constant_blackbox(value: float, shape=(1, 8, 8)) -> BlackBoxClassifier:
    return BlackBoxClassifier(ConstantNet(value, shape), shape)


def linear_blackbox(weights: np.ndarray) -> BlackBoxClassifier:
    t = torch.as_tensor(weights, dtype=torch.float32)
    if t.dim() == 3:
        t = t.permute(2, 0, 1)
    shape = tuple(t.shape)
    return BlackBoxClassifier(LinearLogitNet(t), shape)


def mean_pixel_blackbox(shape=(1, 8, 8)) -> BlackBoxClassifier:
    return BlackBoxClassifier(MeanPixelNet(), shape)


class StubBundle:
    """Duck-typed ExplainerBundle for evaluation tests."""

    def __init__(self, spec: ConditionSpec, image_shape=(1, 8, 8)):
        self.spec = spec
        self.image_shape = image_shape

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return x

    def generate(self, z: torch.Tensor, k) -> torch.Tensor:
        raise NotImplementedError

    def embed_images(self, images: np.ndarray, pooling: str = "flatten") -> np.ndarray:
        z = self.encode(images_to_tensor(images))
        if pooling == "mean":
            return z.mean(dim=(2, 3)).numpy().astype(np.float64)
        return z.reshape(z.shape[0], -1).numpy().astype(np.float64)


class IdentityStubBundle(StubBundle):
    """Returns the query unchanged for every condition."""

    def generate(self, z, k):
        return z.clone()


class ConstantImageBundle(StubBundle):
    """Returns one fixed image for everything."""

    def __init__(self, spec, image_shape=(1, 8, 8), fill=0.5):
        super().__init__(spec, image_shape)
        self.fill = fill

    def generate(self, z, k):
        return torch.full((z.shape[0],) + self.image_shape, self.fill)


class PerfectStubBundle(StubBundle):
    """Constant image at each bin's center; pair with mean_pixel_blackbox."""

    def generate(self, z, k):
        k = torch.as_tensor(k, dtype=torch.long)
        if k.dim() == 0:
            k = k.expand(z.shape[0])
        out = torch.empty((z.shape[0],) + self.image_shape)
        for i, ki in enumerate(k.tolist()):
            out[i] = bin_target_posterior(int(ki), self.spec)
        return out


def random_images(n: int, shape=(8, 8, 1), seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n,) + shape).astype(np.float32)
