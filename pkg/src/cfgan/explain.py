"""Inference-side explainer: perturb, sweep and extract saliency.

All operations are deterministic and read-only over a trained bundle.
Images cross this boundary as numpy (H,W,C) float arrays in [0,1]; the
torch conversion is internal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfgan.blackbox import BlackBoxClassifier, images_to_tensor, tensor_to_images
from cfgan.conditioning import bin_target_posterior, shift_condition
from cfgan.trainer import ExplainerBundle


@dataclass
class ExplanationSeries:
    """One generation per bin for a single query, in bin order."""

    query: np.ndarray
    query_posterior: float
    images: np.ndarray            # (N, H, W, C)
    actual_posteriors: np.ndarray  # (N,) f(x_k)
    condition_posteriors: np.ndarray  # (N,) bin centers

    def __post_init__(self):
        n = len(self.images)
        if not (len(self.actual_posteriors) == len(self.condition_posteriors) == n):
            raise ValueError("series arrays disagree on length")


@dataclass
class SaliencyMap:
    """Per-pixel relevance in [0,1]; ``degenerate`` flags a constant difference map."""

    values: np.ndarray  # (H, W)
    degenerate: bool = False


def _query_tensor(bundle: ExplainerBundle, x: np.ndarray):
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"query must be (H,W,C), got shape {arr.shape}")
    c, h, w = bundle.image_shape
    if arr.shape != (h, w, c):
        raise ValueError(f"query shape {arr.shape} does not match bundle {(h, w, c)}")
    return images_to_tensor(arr)


def explain(bundle: ExplainerBundle, blackbox: BlackBoxClassifier, x: np.ndarray,
            delta: float) -> tuple[np.ndarray, float]:
    """Generate the perturbed image for one query and one posterior shift.

    Returns ``(x_delta, f(x_delta))``.  The condition is the bin of
    ``clamp(f(x) + delta, 0, 1)``.
    """
    xt = _query_tensor(bundle, x)
    f_x = blackbox.predict_posterior(np.asarray(x, dtype=np.float32))
    k = shift_condition(f_x, delta, bundle.spec)
    out = bundle.generate(bundle.encode(xt), int(k))
    image = tensor_to_images(out)[0]
    actual = blackbox.predict_posterior(image)
    return image, float(actual)


def sweep(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
          x: np.ndarray) -> ExplanationSeries:
    """Generate the full progressive series: one image per bin, same latent."""
    xt = _query_tensor(bundle, x)
    n = bundle.spec.n_bins
    z = bundle.encode(xt)
    z_rep = z.repeat(n, 1, 1, 1)
    ks = np.arange(n)
    out = bundle.generate(z_rep, ks)
    images = tensor_to_images(out)
    actuals = np.atleast_1d(blackbox.predict_posterior(images)).astype(np.float64)
    conditions = bin_target_posterior(ks, bundle.spec)
    f_x = float(blackbox.predict_posterior(np.asarray(x, dtype=np.float32)))
    return ExplanationSeries(
        query=np.asarray(x, dtype=np.float32),
        query_posterior=f_x,
        images=images,
        actual_posteriors=actuals,
        condition_posteriors=np.asarray(conditions, dtype=np.float64),
    )


def sweep_many(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
               images: np.ndarray, chunk: int = 64) -> list[ExplanationSeries]:
    """Sweep a batch of queries, chunked to bound memory; order preserved."""
    images = np.asarray(images, dtype=np.float32)
    n_bins = bundle.spec.n_bins
    out: list[ExplanationSeries] = []
    for start in range(0, len(images), chunk):
        batch = images[start:start + chunk]
        xt = images_to_tensor(batch)
        z = bundle.encode(xt)
        f_x = np.atleast_1d(blackbox.predict_posterior(batch))
        gen_per_bin = []
        actual_per_bin = []
        for k in range(n_bins):
            gk = bundle.generate(z, k)
            imgs_k = tensor_to_images(gk)
            gen_per_bin.append(imgs_k)
            actual_per_bin.append(np.atleast_1d(blackbox.predict_posterior(imgs_k)))
        conditions = np.asarray(
            bin_target_posterior(np.arange(n_bins), bundle.spec), dtype=np.float64)
        for i in range(len(batch)):
            out.append(ExplanationSeries(
                query=batch[i],
                query_posterior=float(f_x[i]),
                images=np.stack([gen_per_bin[k][i] for k in range(n_bins)]),
                actual_posteriors=np.asarray(
                    [actual_per_bin[k][i] for k in range(n_bins)], dtype=np.float64),
                condition_posteriors=conditions,
            ))
    return out


def normalize_saliency(diff: np.ndarray) -> SaliencyMap:
    """Min-max normalize a difference map to [0,1]; constant maps degenerate to zeros."""
    lo, hi = float(diff.min()), float(diff.max())
    if hi - lo < 1e-12:
        return SaliencyMap(values=np.zeros_like(diff, dtype=np.float64), degenerate=True)
    return SaliencyMap(values=((diff - lo) / (hi - lo)).astype(np.float64), degenerate=False)


def saliency_from_extremes(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                           x: np.ndarray) -> SaliencyMap:
    """Absolute difference between the two extreme-bin generations.

    Channel-averaged and min-max normalized to [0,1].  Normalization is
    idempotent: applying it to an already-normalized map is a no-op.
    """
    xt = _query_tensor(bundle, x)
    z = bundle.encode(xt)
    extremes = bundle.generate(z.repeat(2, 1, 1, 1), np.array([0, bundle.spec.n_bins - 1]))
    imgs = tensor_to_images(extremes)
    diff = np.abs(imgs[0].astype(np.float64) - imgs[1].astype(np.float64)).mean(axis=-1)
    return normalize_saliency(diff)


def reconstruction_l1(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                      x: np.ndarray) -> float:
    """L1 between the query and its zero-shift generation (self-consistency)."""
    rec, _ = explain(bundle, blackbox, x, 0.0)
    return float(np.abs(np.asarray(x, dtype=np.float64) - rec.astype(np.float64)).mean())


def cycle_l1(bundle: ExplainerBundle, blackbox: BlackBoxClassifier, x: np.ndarray,
             delta: float) -> float:
    """L1 between the query and its there-and-back generation."""
    x_d, _ = explain(bundle, blackbox, x, delta)
    x_cyc, _ = explain(bundle, blackbox, x_d, -delta)
    return float(np.abs(np.asarray(x, dtype=np.float64) - x_cyc.astype(np.float64)).mean())
