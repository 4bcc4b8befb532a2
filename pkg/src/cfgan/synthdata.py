"""Labeled image folders and a desk-scale synthetic dataset generator.

The synthetic renderer draws a bright disc on a darker background; disc
radius is the controllable target factor (measurable after the fact) and
background intensity is the confounder factor.  Continuous factor values
are kept as metadata so correlation analyses can run against ground truth.

On-disk layout::

    <root>/images/*.png        8-bit grayscale or RGB
    <root>/attributes.csv      header ``filename,attr_1,...``; {0,1} cells
    <root>/factors.csv         header ``filename,<factor>,...``; real cells
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class DatasetError(Exception):
    """Raised for unreadable or contract-violating dataset inputs."""


@dataclass
class LabeledImageDataset:
    """In-memory image dataset with binary attributes.

    ``images``: (n, H, W, C) float32 in [0,1].
    ``attributes``: attribute name -> (n,) array of {0,1}.
    ``factors``: optional factor name -> (n,) float array (ground truth).
    """

    images: np.ndarray
    attributes: dict[str, np.ndarray]
    filenames: list[str]
    split: str = "train"
    factors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.images.ndim != 4:
            raise DatasetError(f"images must be (n,H,W,C), got shape {self.images.shape}")
        n = len(self.images)
        if len(self.filenames) != n:
            raise DatasetError("filenames length does not match image count")
        for name, values in self.attributes.items():
            if len(values) != n:
                raise DatasetError(f"attribute {name!r} has {len(values)} values for {n} images")
            bad = ~np.isin(values, (0, 1))
            if bad.any():
                row = int(np.argmax(bad))
                raise DatasetError(
                    f"attribute {name!r} must be 0/1, found {values[row]!r} at row {row}"
                )
        lo, hi = float(self.images.min(initial=0.0)), float(self.images.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise DatasetError(f"pixel values outside [0,1]: min={lo}, max={hi}")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices, split: str | None = None) -> "LabeledImageDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledImageDataset(
            images=self.images[idx],
            attributes={k: v[idx] for k, v in self.attributes.items()},
            filenames=[self.filenames[i] for i in idx],
            split=split if split is not None else self.split,
            factors={k: v[idx] for k, v in self.factors.items()},
        )


@dataclass(frozen=True)
class SynthFactorSpec:
    """Recipe for the synthetic disc dataset."""

    image_size: int = 32
    target_factor: str = "radius"
    target_range: tuple[float, float] = (4.0, 11.0)
    confounder_factor: str = "background"
    confounder_range: tuple[float, float] = (0.0, 0.4)
    correlation: str = "independent"  # or "fully-confounded"
    n_samples: int = 1000
    seed: int = 0
    center_jitter: float = 3.0
    disc_intensity: float = 1.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        for name, (lo, hi) in (
            ("target_range", self.target_range),
            ("confounder_range", self.confounder_range),
        ):
            if not hi > lo:
                raise ValueError(f"{name} must be non-degenerate, got ({lo}, {hi})")
        if self.correlation not in ("independent", "fully-confounded"):
            raise ValueError(f"unknown correlation mode {self.correlation!r}")


def render_disc(size: int, radius: float, center: tuple[float, float],
                background: float, disc_intensity: float = 1.0) -> np.ndarray:
    """Anti-aliased disc on a constant background, (size, size, 1) in [0,1]."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dist = np.sqrt((yy - center[0]) ** 2 + (xx - center[1]) ** 2)
    coverage = np.clip(radius - dist + 0.5, 0.0, 1.0)
    img = background + (disc_intensity - background) * coverage
    return np.clip(img, 0.0, 1.0).astype(np.float32)[..., None]


def generate_synthetic(spec: SynthFactorSpec) -> LabeledImageDataset:
    """Render the dataset described by ``spec``; pure function of the spec.

    Attribute ``target`` is 1 iff the target factor lies above its range
    midpoint, ``confounder`` likewise for the confounder factor.  In
    fully-confounded mode the two labels are identical on every sample
    (the confounder is resampled within the half-range matching the
    target's label).
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    t_lo, t_hi = spec.target_range
    c_lo, c_hi = spec.confounder_range
    t_mid = (t_lo + t_hi) / 2.0
    c_mid = (c_lo + c_hi) / 2.0

    target_vals = rng.uniform(t_lo, t_hi, size=n)
    target_labels = (target_vals > t_mid).astype(np.uint8)
    if spec.correlation == "independent":
        conf_vals = rng.uniform(c_lo, c_hi, size=n)
    else:
        # Sample the confounder within the half-range matching the target
        # label; the margin keeps label derivation exact at the boundary.
        margin = 1e-6 * (c_hi - c_lo)
        lo = np.where(target_labels == 1, c_mid + margin, c_lo)
        hi = np.where(target_labels == 1, c_hi, c_mid - margin)
        conf_vals = rng.uniform(lo, hi)
    conf_labels = (conf_vals > c_mid).astype(np.uint8)

    half = spec.image_size / 2.0
    centers = half + rng.uniform(-spec.center_jitter, spec.center_jitter, size=(n, 2))

    images = np.stack([
        render_disc(spec.image_size, target_vals[i], tuple(centers[i]),
                    conf_vals[i], spec.disc_intensity)
        for i in range(n)
    ])
    filenames = [f"img_{i:06d}.png" for i in range(n)]
    return LabeledImageDataset(
        images=images,
        attributes={"target": target_labels, "confounder": conf_labels},
        filenames=filenames,
        split="train",
        factors={
            spec.target_factor: target_vals.astype(np.float64),
            spec.confounder_factor: conf_vals.astype(np.float64),
            "center_y": centers[:, 0].astype(np.float64),
            "center_x": centers[:, 1].astype(np.float64),
        },
    )


@dataclass(frozen=True)
class FactorMeasurement:
    """Estimated disc radius; ``disc_found`` is False when nothing crossed threshold."""

    radius: float
    disc_found: bool


def measure_factor(image: np.ndarray, threshold: float = 0.65) -> FactorMeasurement:
    """Estimate disc radius in pixels from the thresholded bright area.

    ``radius = sqrt(area / pi)`` where ``area`` counts pixels above
    ``threshold``.  Works on rendered or generated images whose disc is
    brighter than the background.  All-dark images return radius 0 with
    ``disc_found=False``.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=-1)
    area = float((arr > threshold).sum())
    if area == 0.0:
        return FactorMeasurement(radius=0.0, disc_found=False)
    return FactorMeasurement(radius=float(np.sqrt(area / np.pi)), disc_found=True)


def _read_attribute_csv(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise DatasetError(f"attribute file {path} is empty")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0] != "filename":
        raise DatasetError(f"attribute file {path} must start with header 'filename,<attr>,...'")
    body = rows[1:]
    if not body:
        raise DatasetError(f"attribute file {path} has a header but no rows")
    names = header[1:]
    filenames, values = [], []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DatasetError(f"row {i + 1} of {path} has {len(row)} cells, expected {len(header)}")
        filenames.append(row[0].strip())
        cells = []
        for name, cell in zip(names, row[1:]):
            cell = cell.strip()
            if cell not in ("0", "1"):
                raise DatasetError(
                    f"attribute {name!r} at row {i + 1} ({row[0]}) must be 0 or 1, got {cell!r}"
                )
            cells.append(int(cell))
        values.append(cells)
    return names, filenames, np.asarray(values, dtype=np.uint8)


def load_dataset(root, image_size: int | None = None, strict: bool = True,
                 split: str = "train") -> LabeledImageDataset:
    """Load ``<root>/images/*.png`` plus ``<root>/attributes.csv``.

    Images are resized to ``image_size`` (square) when given.  Unreadable
    images raise when ``strict``, otherwise they are skipped with a
    warning.  ``factors.csv`` is picked up when present.
    """
    root = Path(root)
    attr_path = root / "attributes.csv"
    img_dir = root / "images"
    if not attr_path.is_file():
        raise DatasetError(f"missing attribute file: {attr_path}")
    if not img_dir.is_dir():
        raise DatasetError(f"missing image directory: {img_dir}")
    names, filenames, values = _read_attribute_csv(attr_path)

    images, kept = [], []
    for i, fname in enumerate(filenames):
        path = img_dir / fname
        try:
            with Image.open(path) as im:
                if image_size is not None and im.size != (image_size, image_size):
                    im = im.resize((image_size, image_size), Image.BILINEAR)
                arr = np.asarray(im, dtype=np.float32) / 255.0
        except (OSError, ValueError) as exc:
            if strict:
                raise DatasetError(f"unreadable image {path}: {exc}") from exc
            import warnings

            warnings.warn(f"skipping unreadable image {path}: {exc}", stacklevel=2)
            continue
        if arr.ndim == 2:
            arr = arr[..., None]
        images.append(arr)
        kept.append(i)

    if not images:
        raise DatasetError(f"no readable images under {img_dir}")
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise DatasetError(f"images disagree on shape: {sorted(shapes)}; pass image_size to resize")

    attributes = {name: values[kept, j] for j, name in enumerate(names)}
    ds = LabeledImageDataset(
        images=np.stack(images),
        attributes=attributes,
        filenames=[filenames[i] for i in kept],
        split=split,
    )

    factors_path = root / "factors.csv"
    if factors_path.is_file():
        with open(factors_path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
        header = [c.strip() for c in rows[0]]
        by_name = {row[0].strip(): row[1:] for row in rows[1:]}
        cols = {name: [] for name in header[1:]}
        if all(f in by_name for f in ds.filenames):
            for fname in ds.filenames:
                for name, cell in zip(header[1:], by_name[fname]):
                    cols[name].append(float(cell))
            ds.factors.update({k: np.asarray(v, dtype=np.float64) for k, v in cols.items()})
    return ds


def save_dataset(ds: LabeledImageDataset, root) -> Path:
    """Write the on-disk layout documented in the module docstring."""
    root = Path(root)
    img_dir = root / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    for fname, img in zip(ds.filenames, ds.images):
        arr = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
        if arr.shape[-1] == 1:
            arr = arr[..., 0]
        Image.fromarray(arr).save(img_dir / fname)

    attr_names = sorted(ds.attributes)
    with open(root / "attributes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename"] + attr_names)
        for i, fname in enumerate(ds.filenames):
            writer.writerow([fname] + [int(ds.attributes[a][i]) for a in attr_names])

    if ds.factors:
        factor_names = sorted(ds.factors)
        with open(root / "factors.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["filename"] + factor_names)
            for i, fname in enumerate(ds.filenames):
                writer.writerow([fname] + [repr(float(ds.factors[f][i])) for f in factor_names])
    return root


def split_dataset(ds: LabeledImageDataset, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Shuffle and split into (train, val, test) tagged datasets."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be 3 values summing to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ds))
    n_train = int(round(fractions[0] * len(ds)))
    n_val = int(round(fractions[1] * len(ds)))
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    tags = ("train", "val", "test")
    return tuple(ds.subset(idx, split=tag) for idx, tag in zip(parts, tags))
