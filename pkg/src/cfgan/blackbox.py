"""The frozen differentiable classifier contract and desk-scale trainers.

A black box here exposes exactly two things: the posterior value
``f(x) in [0,1]`` and its gradient with respect to the input.  Wrapped
models are frozen on construction; training a reference classifier, a
biased-split variant or a confounder oracle happens before wrapping.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from cfgan.synthdata import LabeledImageDataset

FORMAT_VERSION = 1


class ContractError(ValueError):
    """Input violates the classifier's shape or range contract."""


class UnsupportedCapabilityError(RuntimeError):
    """The wrapped model cannot provide the requested capability (e.g. gradients)."""


class TrainingError(RuntimeError):
    """Reference/oracle training could not produce a usable classifier."""


def images_to_tensor(images: np.ndarray) -> torch.Tensor:
    """(n,H,W,C) float arrays in [0,1] -> (n,C,H,W) float32 tensor."""
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def tensor_to_images(x: torch.Tensor) -> np.ndarray:
    """(n,C,H,W) tensor -> (n,H,W,C) float32 array."""
    return x.detach().cpu().numpy().transpose(0, 2, 3, 1).astype(np.float32)


class SmallConvNet(nn.Module):
    """3 conv blocks + global average pooling + sigmoid head."""

    def __init__(self, in_channels: int = 1, width: int = 16):
        super().__init__()
        w = width
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, w, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
            nn.Conv2d(w, 2 * w, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
            nn.Conv2d(2 * w, 2 * w, 3, padding=1), nn.ReLU(),
        )
        self.head = nn.Linear(2 * w, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x)
        h = h.mean(dim=(2, 3))
        return torch.sigmoid(self.head(h)).squeeze(1)


class BlackBoxClassifier:
    """Frozen posterior function with gradient access.

    ``net`` must map (n,C,H,W) to (n,) probabilities.  Parameters are
    frozen and the module switched to eval mode on wrapping; they never
    change afterwards.
    """

    def __init__(self, net: nn.Module, input_shape: tuple[int, int, int],
                 metadata: dict | None = None):
        self.net = net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.input_shape = tuple(input_shape)
        self.metadata = dict(metadata or {})

    def _check(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        if x.dim() != 4 or tuple(x.shape[1:]) != self.input_shape:
            raise ContractError(
                f"expected input shape (*, {self.input_shape}), got {tuple(x.shape)}"
            )
        with torch.no_grad():
            lo, hi = float(x.min()), float(x.max())
        if lo < -1e-6 or hi > 1.0 + 1e-6:
            raise ContractError(f"pixel values outside [0,1]: min={lo}, max={hi}")
        return x

    def posterior(self, x: torch.Tensor) -> torch.Tensor:
        """Posterior probabilities, shape (n,).  Keeps the autograd graph."""
        x = self._check(x)
        out = self.net(x)
        return out

    def predict_posterior(self, images) -> np.ndarray:
        """Posterior for numpy images (n,H,W,C) or a single (H,W,C)."""
        arr = np.asarray(images)
        single = arr.ndim == 3
        with torch.no_grad():
            p = self.posterior(images_to_tensor(arr))
        out = p.cpu().numpy().astype(np.float64)
        return float(out[0]) if single else out

    def gradient(self, x: torch.Tensor) -> torch.Tensor:
        """Gradient of the posterior w.r.t. the input, same shape as ``x``."""
        x = self._check(x).clone().requires_grad_(True)
        out = self.net(x)
        if not out.requires_grad:
            raise UnsupportedCapabilityError("wrapped model does not expose input gradients")
        grad = torch.autograd.grad(out.sum(), x)[0]
        return grad

    def posterior_gradient(self, images) -> np.ndarray:
        """Numpy-facing gradient: (n,H,W,C) in, same shape out."""
        arr = np.asarray(images)
        single = arr.ndim == 3
        g = self.gradient(images_to_tensor(arr))
        out = tensor_to_images(g)
        return out[0] if single else out

    def parameter_fingerprint(self) -> str:
        """SHA-256 over the frozen parameters; for frozen-contract checks."""
        h = hashlib.sha256()
        for name, tensor in sorted(self.net.state_dict().items()):
            h.update(name.encode())
            h.update(tensor.detach().cpu().numpy().tobytes())
        return h.hexdigest()


@dataclass
class OracleClassifier:
    """A black box dedicated to a confounding attribute."""

    classifier: BlackBoxClassifier
    attribute: str
    accuracy: float
    accuracy_floor: float = 0.95
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0,1), got {self.threshold}")

    def predict_attribute(self, images) -> np.ndarray:
        p = self.classifier.predict_posterior(images)
        return (np.atleast_1d(p) >= self.threshold).astype(np.uint8)


@dataclass(frozen=True)
class ClassifierTrainConfig:
    # Mild label smoothing keeps the posterior a smooth function of the
    # underlying factor instead of a hard step, which the explainer's
    # compatibility loss depends on.
    epochs: int = 5
    batch_size: int = 64
    lr: float = 1e-3
    width: int = 16
    seed: int = 0
    val_fraction: float = 0.1
    label_smoothing: float = 0.05


def _dataset_tensors(dataset: LabeledImageDataset, attribute: str):
    if attribute not in dataset.attributes:
        raise TrainingError(
            f"attribute {attribute!r} not in dataset; valid attributes: "
            f"{sorted(dataset.attributes)}"
        )
    x = images_to_tensor(dataset.images)
    y = torch.from_numpy(dataset.attributes[attribute].astype(np.float32))
    return x, y


def train_reference_classifier(dataset: LabeledImageDataset, attribute: str,
                               config: ClassifierTrainConfig = ClassifierTrainConfig(),
                               ) -> BlackBoxClassifier:
    """Train a small conv net on ``attribute`` and return it frozen.

    A held-out validation fraction measures accuracy, recorded in the
    wrapped classifier's metadata.
    """
    x, y = _dataset_tensors(dataset, attribute)
    classes = torch.unique(y)
    if len(classes) < 2:
        raise TrainingError(f"attribute {attribute!r} has a single class; cannot train")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(x))
    n_val = max(1, int(round(config.val_fraction * len(x))))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise TrainingError("dataset too small for the requested validation fraction")

    c, h, w = x.shape[1:]
    net = SmallConvNet(in_channels=c, width=config.width)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    eps = 1e-7
    for _ in range(config.epochs):
        perm = rng.permutation(train_idx)
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            if config.label_smoothing > 0:
                yb = yb * (1 - 2 * config.label_smoothing) + config.label_smoothing
            p = net(xb).clamp(eps, 1 - eps)
            loss = -(yb * p.log() + (1 - yb) * (1 - p).log()).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()

    net.eval()
    with torch.no_grad():
        val_pred = (net(x[val_idx]) >= 0.5).float()
    val_acc = float((val_pred == y[val_idx]).float().mean())
    return BlackBoxClassifier(net, (c, h, w), metadata={
        "architecture_id": f"smallconv-w{config.width}",
        "target_attribute": attribute,
        "validation_accuracy": val_acc,
        "seed": config.seed,
        "epochs": config.epochs,
    })


def build_biased_split(dataset: LabeledImageDataset, target: str,
                       confounder: str) -> LabeledImageDataset:
    """Subset in which every target-positive sample is confounder-positive.

    Target-negative samples keep whatever confounder values they had.
    Pixel data is untouched; only membership changes.
    """
    for attr in (target, confounder):
        if attr not in dataset.attributes:
            raise DatasetAttributeError(attr, sorted(dataset.attributes))
    t = dataset.attributes[target]
    c = dataset.attributes[confounder]
    keep = (t == 0) | ((t == 1) & (c == 1))
    if not ((t[keep] == 1).any() and (t[keep] == 0).any()):
        raise TrainingError("biased split would lose one of the target classes")
    idx = np.flatnonzero(keep)
    return dataset.subset(idx)


class DatasetAttributeError(TrainingError):
    def __init__(self, attribute: str, valid: list[str]):
        super().__init__(f"attribute {attribute!r} not in dataset; valid attributes: {valid}")
        self.attribute = attribute
        self.valid = valid


def train_oracle(dataset: LabeledImageDataset, confounder: str,
                 config: ClassifierTrainConfig = ClassifierTrainConfig(),
                 accuracy_floor: float = 0.95) -> OracleClassifier:
    """Train the confounder oracle; refuse if accuracy misses the floor."""
    bb = train_reference_classifier(dataset, confounder, config)
    acc = bb.metadata["validation_accuracy"]
    if acc < accuracy_floor:
        raise TrainingError(
            f"oracle accuracy {acc:.3f} below floor {accuracy_floor}; the "
            "confounding metric would be unreliable"
        )
    return OracleClassifier(classifier=bb, attribute=confounder, accuracy=acc,
                            accuracy_floor=accuracy_floor)


def save_classifier(bb: BlackBoxClassifier, path) -> Path:
    """Checkpoint directory: weights blob + manifest.json."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    torch.save(bb.net.state_dict(), path / "weights.pt")
    manifest = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(bb.input_shape),
        **bb.metadata,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_classifier(path) -> BlackBoxClassifier:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    for field_name in ("format_version", "input_shape", "architecture_id"):
        if field_name not in manifest:
            raise ContractError(f"classifier manifest missing field {field_name!r}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise ContractError(
            f"classifier format_version {manifest['format_version']} != {FORMAT_VERSION}"
        )
    arch = manifest["architecture_id"]
    if not arch.startswith("smallconv-w"):
        raise ContractError(f"unknown architecture_id {arch!r}")
    width = int(arch.split("smallconv-w")[1])
    shape = tuple(manifest["input_shape"])
    net = SmallConvNet(in_channels=shape[0], width=width)
    net.load_state_dict(torch.load(path / "weights.pt", weights_only=True))
    meta = {k: v for k, v in manifest.items() if k not in ("format_version", "input_shape")}
    return BlackBoxClassifier(net, shape, metadata=meta)
