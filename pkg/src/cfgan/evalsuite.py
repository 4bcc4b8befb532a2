"""Quantitative evaluation of trained explainers.

Covers compatibility curves, Frechet distance between feature
distributions, latent-space closeness, identity verification,
pixel-flip saliency scoring, confounder-flip (bias) detection, the
class-flip matrix and measurement correlation.  All metrics are pure over
frozen models; expensive generation sweeps can be computed once with
:func:`cfgan.explain.sweep_many` and shared across metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.stats
import torch
from torch import nn

from cfgan.blackbox import BlackBoxClassifier, OracleClassifier, images_to_tensor
from cfgan.explain import ExplanationSeries, SaliencyMap, sweep_many
from cfgan.synthdata import FactorMeasurement, LabeledImageDataset
from cfgan.trainer import ExplainerBundle

REPORT_SCHEMA_VERSION = 1

# Posterior boundaries for the "present"/"absent" groups.
GROUP_LOW = 0.1
GROUP_HIGH = 0.9


class EvalError(ValueError):
    """Raised when a metric's preconditions are violated."""


# ---------------------------------------------------------------------------
# compatibility


@dataclass
class CompatibilityResult:
    bin_centers: list[float]
    per_bin_mean: list[float]
    per_bin_std: list[float]
    spearman_rho: float
    mean_abs_deviation: float
    n_pairs: int


def compatibility_curve(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                        dataset: LabeledImageDataset,
                        series: list[ExplanationSeries] | None = None,
                        ) -> CompatibilityResult:
    """Actual posterior of each generation against its condition posterior.

    Aggregates (condition, actual) pairs over full sweeps of every query:
    per-bin mean/std of the actual posterior, global Spearman rank
    correlation, and the mean absolute deviation from the condition.
    """
    if len(dataset) == 0:
        raise EvalError("compatibility_curve needs a non-empty dataset")
    if series is None:
        series = sweep_many(bundle, blackbox, dataset.images)
    conditions = np.concatenate([s.condition_posteriors for s in series])
    actuals = np.concatenate([s.actual_posteriors for s in series])
    centers = series[0].condition_posteriors
    per_mean, per_std = [], []
    for c in centers:
        vals = actuals[conditions == c]
        per_mean.append(float(vals.mean()))
        per_std.append(float(vals.std()))
    if np.ptp(actuals) < 1e-12 or np.ptp(conditions) < 1e-12:
        rho = float("nan")
    else:
        rho = float(scipy.stats.spearmanr(conditions, actuals).statistic)
    return CompatibilityResult(
        bin_centers=[float(c) for c in centers],
        per_bin_mean=per_mean,
        per_bin_std=per_std,
        spearman_rho=rho,
        mean_abs_deviation=float(np.abs(actuals - conditions).mean()),
        n_pairs=int(len(actuals)),
    )


# ---------------------------------------------------------------------------
# self-consistency


@dataclass
class SelfConsistencyResult:
    reconstruction_l1: float
    cycle_l1: float
    delta: float
    n_queries: int


def self_consistency(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                     dataset: LabeledImageDataset, delta: float = 0.3,
                     ) -> SelfConsistencyResult:
    """Mean L1 of zero-shift reconstruction and of the there-and-back cycle."""
    from cfgan.explain import cycle_l1, reconstruction_l1

    if len(dataset) == 0:
        raise EvalError("self_consistency needs a non-empty dataset")
    recs = [reconstruction_l1(bundle, blackbox, x) for x in dataset.images]
    cycs = [cycle_l1(bundle, blackbox, x, delta) for x in dataset.images]
    return SelfConsistencyResult(
        reconstruction_l1=float(np.mean(recs)),
        cycle_l1=float(np.mean(cycs)),
        delta=delta,
        n_queries=len(dataset),
    )


# ---------------------------------------------------------------------------
# FID


def fid(real_features: np.ndarray, fake_features: np.ndarray, eps: float = 1e-6) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    ``|mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))`` on sample statistics.
    The matrix square root is taken symmetrically with eigenvalues clipped
    at zero; covariances get ``eps`` on the diagonal against singularity.
    """
    a = np.atleast_2d(np.asarray(real_features, dtype=np.float64))
    b = np.atleast_2d(np.asarray(fake_features, dtype=np.float64))
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise EvalError("fid needs at least 2 samples per feature set")
    if a.shape[1] != b.shape[1]:
        raise EvalError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    mu1, mu2 = a.mean(axis=0), b.mean(axis=0)
    s1 = np.cov(a, rowvar=False) + eps * np.eye(a.shape[1])
    s2 = np.cov(b, rowvar=False) + eps * np.eye(b.shape[1])
    s1 = np.atleast_2d(s1)
    s2 = np.atleast_2d(s2)

    # Tr((S1 S2)^(1/2)) via the symmetric form sqrt(S1) S2 sqrt(S1).
    w1, v1 = np.linalg.eigh(s1)
    sqrt_s1 = (v1 * np.sqrt(np.clip(w1, 0.0, None))) @ v1.T
    inner = sqrt_s1 @ s2 @ sqrt_s1
    w = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    trace_sqrt = float(np.sqrt(np.clip(w, 0.0, None)).sum())

    value = float(np.sum((mu1 - mu2) ** 2) + np.trace(s1) + np.trace(s2) - 2.0 * trace_sqrt)
    return max(value, 0.0)


class FrozenRandomEmbedder:
    """Fixed randomly initialized conv embedder with a frozen seed.

    A stand-in feature extractor for desk-scale FID: distances are
    internally comparable across runs with the same seed, but carry no
    absolute meaning.
    """

    def __init__(self, image_shape: tuple[int, int, int], dim: int = 64, seed: int = 1234):
        c, _, _ = image_shape
        self.seed = seed
        self.dim = dim
        torch.manual_seed(seed)
        self.net = nn.Sequential(
            nn.Conv2d(c, 16, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(32, dim, 3, stride=2, padding=1), nn.ReLU(),
        ).eval()
        for p in self.net.parameters():
            p.requires_grad_(False)

    def __call__(self, images: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            h = self.net(images_to_tensor(images))
        return h.mean(dim=(2, 3)).cpu().numpy().astype(np.float64)


@dataclass
class FidResult:
    present: float | None
    absent: float | None
    overall: float
    embedder: str
    note: str = "feature embedder is internal; FID values comparable only within this toolkit"


def data_consistency_fid(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                         dataset: LabeledImageDataset,
                         embedder=None,
                         series: list[ExplanationSeries] | None = None,
                         ) -> FidResult:
    """FID between real and generated images, grouped by posterior extreme.

    ``present`` compares reals with ``f(x) >= 0.9`` against fakes with
    ``f(x_d) >= 0.9``; ``absent`` uses the ``<= 0.1`` tail; ``overall``
    pools everything.  Groups without 2 samples on both sides come back
    as None.
    """
    if embedder is None:
        embedder = FrozenRandomEmbedder(bundle.image_shape)
    if series is None:
        series = sweep_many(bundle, blackbox, dataset.images)
    real_images = dataset.images
    real_post = np.atleast_1d(blackbox.predict_posterior(real_images))
    fake_images = np.concatenate([s.images for s in series])
    fake_post = np.concatenate([s.actual_posteriors for s in series])

    real_feat = embedder(real_images)
    fake_feat = embedder(fake_images)

    def group(mask_r, mask_f):
        if mask_r.sum() < 2 or mask_f.sum() < 2:
            return None
        return fid(real_feat[mask_r], fake_feat[mask_f])

    return FidResult(
        present=group(real_post >= GROUP_HIGH, fake_post >= GROUP_HIGH),
        absent=group(real_post <= GROUP_LOW, fake_post <= GROUP_LOW),
        overall=fid(real_feat, fake_feat),
        embedder=type(embedder).__name__,
    )


# ---------------------------------------------------------------------------
# latent closeness


def closeness_from_embeddings(query_emb: np.ndarray, expl_emb: np.ndarray) -> float:
    """Fraction of explanations strictly closest to their own query.

    For each row i: ``|q_i - e_i| < min_{j != i} |e_i - e_j|``.  Ties fail.
    """
    q = np.asarray(query_emb, dtype=np.float64)
    e = np.asarray(expl_emb, dtype=np.float64)
    if q.shape != e.shape or q.ndim != 2:
        raise EvalError("query and explanation embeddings must share shape (n, d)")
    n = q.shape[0]
    if n < 2:
        raise EvalError("latent closeness is undefined for fewer than 2 queries")
    own = np.linalg.norm(q - e, axis=1)
    diff = e[:, None, :] - e[None, :, :]
    dists = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dists, np.inf)
    others = dists.min(axis=1)
    return float(np.mean(own < others))


def latent_space_closeness(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                           dataset: LabeledImageDataset, deltas=(0.3, -0.3),
                           ) -> float:
    """Closeness fraction pooled over all requested posterior shifts."""
    from cfgan.explain import explain

    if len(dataset) < 2:
        raise EvalError("latent closeness is undefined for fewer than 2 queries")
    query_emb = bundle.embed_images(dataset.images, pooling="flatten")
    hits = []
    for delta in deltas:
        expl_images = np.stack([
            explain(bundle, blackbox, x, delta)[0] for x in dataset.images
        ])
        expl_emb = bundle.embed_images(expl_images, pooling="flatten")
        hits.append(closeness_from_embeddings(query_emb, expl_emb))
    return float(np.mean(hits))


# ---------------------------------------------------------------------------
# identity


@dataclass
class IdentityResult:
    mean_distance: float
    accuracy: float
    threshold: float
    n_pairs: int


def cosine_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rowwise ``1 - cos(a, b)``; zero-norm rows are an error."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise EvalError("zero-norm embedding in cosine distance")
    return 1.0 - np.sum(a * b, axis=1) / (na * nb)


def identity_verification(embedder, queries: np.ndarray, explanations: np.ndarray,
                          threshold: float = 0.5) -> IdentityResult:
    """Cosine distance between query/explanation embeddings; verified below threshold."""
    qa = embedder(np.asarray(queries))
    ea = embedder(np.asarray(explanations))
    d = cosine_distance(qa, ea)
    return IdentityResult(
        mean_distance=float(d.mean()),
        accuracy=float((d < threshold).mean()),
        threshold=threshold,
        n_pairs=int(len(d)),
    )


# ---------------------------------------------------------------------------
# pixel flip


@dataclass
class PixelFlipResult:
    fractions: list[float]
    accuracy: list[float]
    random_accuracy: list[float]
    base_accuracy: float
    seed: int

    def mean_gap(self) -> float:
        """Average accuracy advantage of the random baseline over the saliency curve."""
        return float(np.mean(np.asarray(self.random_accuracy) - np.asarray(self.accuracy)))


def _perturb(images: np.ndarray, orders: np.ndarray, n_replace: int,
             rng: np.random.Generator) -> np.ndarray:
    out = images.copy()
    if n_replace == 0:
        return out
    n, h, w, c = images.shape
    flat = out.reshape(n, h * w, c)
    for i in range(n):
        idx = orders[i, :n_replace]
        flat[i, idx, :] = rng.uniform(0.0, 1.0, size=(n_replace, c))
    return flat.reshape(n, h, w, c)


def pixel_flip_curve(saliency, dataset: LabeledImageDataset,
                     blackbox: BlackBoxClassifier, target_attribute: str,
                     fractions=None, seed: int = 0) -> PixelFlipResult:
    """Classifier accuracy as the most-salient pixels are noised out.

    ``saliency``: one SaliencyMap per image (or a single map applied to
    all).  For each fraction, that share of pixels (ranked by relevance)
    is replaced with fresh U(0,1) samples and accuracy against the
    dataset's labels is recomputed; a random-ranking baseline runs
    alongside.
    """
    if fractions is None:
        fractions = [round(0.05 * i, 2) for i in range(11)]
    fractions = [float(p) for p in fractions]
    if any(p < 0.0 or p > 1.0 for p in fractions):
        raise EvalError(f"fractions must lie in [0,1], got {fractions}")
    if target_attribute not in dataset.attributes:
        raise EvalError(
            f"attribute {target_attribute!r} not in dataset; valid: {sorted(dataset.attributes)}")

    images = dataset.images
    labels = dataset.attributes[target_attribute]
    n, h, w, _ = images.shape
    if isinstance(saliency, SaliencyMap):
        maps = [saliency] * n
    else:
        maps = list(saliency)
    if len(maps) != n:
        raise EvalError(f"need {n} saliency maps, got {len(maps)}")
    for m in maps:
        if m.values.shape != (h, w):
            raise EvalError(f"saliency shape {m.values.shape} does not match images {(h, w)}")

    rng = np.random.default_rng(seed)
    sal_orders = np.stack([np.argsort(-m.values.ravel(), kind="stable") for m in maps])
    rand_orders = np.stack([rng.permutation(h * w) for _ in range(n)])

    def accuracy(imgs):
        pred = (np.atleast_1d(blackbox.predict_posterior(imgs)) >= 0.5).astype(np.uint8)
        return float((pred == labels).mean())

    base = accuracy(images)
    acc_sal, acc_rand = [], []
    for p in fractions:
        n_replace = int(round(p * h * w))
        if n_replace == 0:
            acc_sal.append(base)
            acc_rand.append(base)
            continue
        acc_sal.append(accuracy(_perturb(images, sal_orders, n_replace, rng)))
        acc_rand.append(accuracy(_perturb(images, rand_orders, n_replace, rng)))
    return PixelFlipResult(fractions=fractions, accuracy=acc_sal,
                           random_accuracy=acc_rand, base_accuracy=base, seed=seed)


# ---------------------------------------------------------------------------
# confounding / bias


@dataclass
class ConfoundingResult:
    flip_fraction: float
    class_distribution: dict
    condition: str
    n_queries: int


def _extreme_images(bundle: ExplainerBundle, images: np.ndarray, k: int,
                    chunk: int = 128) -> np.ndarray:
    outs = []
    for start in range(0, len(images), chunk):
        xt = images_to_tensor(images[start:start + chunk])
        z = bundle.encode(xt)
        gen = bundle.generate(z, k)
        outs.append(gen.cpu().numpy().transpose(0, 2, 3, 1))
    return np.concatenate(outs).astype(np.float32)


def confounding_metric(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                       oracle: OracleClassifier, dataset: LabeledImageDataset,
                       target_condition: str = "present") -> ConfoundingResult:
    """Fraction of extreme counterfactuals whose oracle attribute flips.

    ``target_condition='present'`` drives every query to the top bin
    (posterior pushed above 0.9); ``'absent'`` to the bottom bin.  The
    oracle's prediction on each generation is compared against the
    query's true confounder attribute; the class distribution of the
    predictions is reported alongside.
    """
    if oracle.accuracy < oracle.accuracy_floor:
        raise EvalError(
            f"oracle accuracy {oracle.accuracy:.3f} below floor {oracle.accuracy_floor}; "
            "refusing to compute an unreliable confounding metric")
    if target_condition not in ("present", "absent"):
        raise EvalError(f"target_condition must be 'present' or 'absent', got {target_condition!r}")
    if oracle.attribute not in dataset.attributes:
        raise EvalError(f"dataset lacks confounder attribute {oracle.attribute!r}")
    k = bundle.spec.n_bins - 1 if target_condition == "present" else 0
    generated = _extreme_images(bundle, dataset.images, k)
    pred = oracle.predict_attribute(generated)
    true = dataset.attributes[oracle.attribute]
    flips = (pred != true).astype(np.float64)
    return ConfoundingResult(
        flip_fraction=float(flips.mean()),
        class_distribution={
            "positive": float((pred == 1).mean()),
            "negative": float((pred == 0).mean()),
        },
        condition=target_condition,
        n_queries=len(dataset),
    )


@dataclass
class FlipMatrix:
    targets: list[str]
    attributes: list[str]
    values: list[list[float]]  # rows follow targets, columns follow attributes


def class_flip_matrix(explainers: dict, oracles: dict,
                      dataset: LabeledImageDataset) -> FlipMatrix:
    """Attribute flips of cross-boundary counterfactuals, per explained target.

    ``explainers``: target name -> (bundle, blackbox).  Each query is
    pushed to the extreme opposite its current posterior; each column's
    oracle checks whether that source attribute flipped against the
    query's true value.
    """
    attributes = sorted(oracles)
    for attr in attributes:
        if attr not in dataset.attributes:
            raise EvalError(f"dataset lacks attribute {attr!r}")
    targets = sorted(explainers)
    rows = []
    for target in targets:
        bundle, blackbox = explainers[target]
        post = np.atleast_1d(blackbox.predict_posterior(dataset.images))
        k_ext = np.where(post >= 0.5, 0, bundle.spec.n_bins - 1)
        generated = np.empty_like(dataset.images)
        for k in np.unique(k_ext):
            mask = k_ext == k
            generated[mask] = _extreme_images(bundle, dataset.images[mask], int(k))
        row = []
        for attr in attributes:
            oracle = oracles[attr]
            if oracle.accuracy < oracle.accuracy_floor:
                raise EvalError(f"oracle for {attr!r} is below its accuracy floor")
            pred = oracle.predict_attribute(generated)
            row.append(float((pred != dataset.attributes[attr]).mean()))
        rows.append(row)
    return FlipMatrix(targets=targets, attributes=attributes, values=rows)


# ---------------------------------------------------------------------------
# measurement correlation


@dataclass
class MeasurementCorrelationResult:
    pearson_r: float
    p_value: float
    defined: bool
    group_means: dict
    paired_tests: dict
    two_sample_tests: dict
    n_queries: int


def _measure_value(measurement) -> float:
    if isinstance(measurement, FactorMeasurement):
        return measurement.radius
    return float(measurement)


def measurement_correlation(bundle: ExplainerBundle, blackbox: BlackBoxClassifier,
                            measure_fn, dataset: LabeledImageDataset,
                            series: list[ExplanationSeries] | None = None,
                            ) -> MeasurementCorrelationResult:
    """Correlate a post-hoc measurement of each generation with its condition.

    Also forms the four populations (real negatives/positives by query
    posterior, and their cross-boundary counterfactuals) and reports the
    paired t-test between queries and counterfactuals plus the two-sample
    t-test between real and generated same-label groups.
    """
    if series is None:
        series = sweep_many(bundle, blackbox, dataset.images)
    n_bins = bundle.spec.n_bins
    conditions, values = [], []
    measured = np.empty((len(series), n_bins), dtype=np.float64)
    for i, s in enumerate(series):
        for k in range(n_bins):
            measured[i, k] = _measure_value(measure_fn(s.images[k]))
        conditions.append(s.condition_posteriors)
        values.append(measured[i])
    conditions = np.concatenate(conditions)
    values = np.concatenate(values)

    if np.ptp(values) < 1e-12:
        return MeasurementCorrelationResult(
            pearson_r=float("nan"), p_value=float("nan"), defined=False,
            group_means={}, paired_tests={}, two_sample_tests={},
            n_queries=len(series))

    r, p = scipy.stats.pearsonr(conditions, values)

    query_post = np.asarray([s.query_posterior for s in series])
    query_measure = np.asarray([_measure_value(measure_fn(s.query)) for s in series])
    neg_mask = query_post <= GROUP_LOW
    pos_mask = query_post >= GROUP_HIGH

    groups, paired, two_sample = {}, {}, {}
    real_neg = query_measure[neg_mask]
    real_pos = query_measure[pos_mask]
    cf_pos = measured[neg_mask, n_bins - 1]   # negatives pushed positive
    cf_neg = measured[pos_mask, 0]            # positives pushed negative
    for name, vals in (("real_negative", real_neg), ("real_positive", real_pos),
                       ("counterfactual_positive", cf_pos), ("counterfactual_negative", cf_neg)):
        groups[name] = {"mean": float(vals.mean()) if len(vals) else None,
                        "std": float(vals.std()) if len(vals) else None,
                        "n": int(len(vals))}
    if len(real_neg) >= 2:
        t = scipy.stats.ttest_rel(real_neg, cf_pos)
        paired["negative_vs_counterfactual_positive"] = {
            "statistic": float(t.statistic), "p_value": float(t.pvalue)}
    if len(real_pos) >= 2:
        t = scipy.stats.ttest_rel(real_pos, cf_neg)
        paired["positive_vs_counterfactual_negative"] = {
            "statistic": float(t.statistic), "p_value": float(t.pvalue)}
    if len(real_neg) >= 2 and len(cf_neg) >= 2:
        t = scipy.stats.ttest_ind(real_neg, cf_neg)
        two_sample["negative_real_vs_generated"] = {
            "statistic": float(t.statistic), "p_value": float(t.pvalue)}
    if len(real_pos) >= 2 and len(cf_pos) >= 2:
        t = scipy.stats.ttest_ind(real_pos, cf_pos)
        two_sample["positive_real_vs_generated"] = {
            "statistic": float(t.statistic), "p_value": float(t.pvalue)}

    return MeasurementCorrelationResult(
        pearson_r=float(r), p_value=float(p), defined=True,
        group_means=groups, paired_tests=paired, two_sample_tests=two_sample,
        n_queries=len(series))


# ---------------------------------------------------------------------------
# report


@dataclass
class EvalReport:
    """Aggregated metrics; sections are None until computed."""

    compatibility: CompatibilityResult | None = None
    self_consistency: SelfConsistencyResult | None = None
    fid: FidResult | None = None
    closeness: float | None = None
    identity: IdentityResult | None = None
    pixel_flip: PixelFlipResult | None = None
    confounding: dict = field(default_factory=dict)
    flip_matrix: FlipMatrix | None = None
    measurement: MeasurementCorrelationResult | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def convert(value):
            if value is None or isinstance(value, (int, float, str, bool)):
                return value
            if isinstance(value, dict):
                return {k: convert(v) for k, v in value.items()}
            if isinstance(value, (list, tuple)):
                return [convert(v) for v in value]
            return convert(asdict(value))

        payload = {"schema_version": REPORT_SCHEMA_VERSION}
        for name in ("compatibility", "self_consistency", "fid", "closeness", "identity",
                     "pixel_flip", "confounding", "flip_matrix", "measurement", "notes"):
            payload[name] = convert(getattr(self, name))
        return payload

    def save(self, out_dir, plots: bool = True) -> Path:
        """Write report.json plus CSV curves and plot images."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(self.to_dict(), indent=2))
        if self.compatibility is not None:
            _write_csv(out_dir / "compatibility.csv",
                       ["bin_center", "mean_actual", "std_actual"],
                       zip(self.compatibility.bin_centers, self.compatibility.per_bin_mean,
                           self.compatibility.per_bin_std))
        if self.pixel_flip is not None:
            _write_csv(out_dir / "pixel_flip.csv",
                       ["fraction", "accuracy", "random_accuracy"],
                       zip(self.pixel_flip.fractions, self.pixel_flip.accuracy,
                           self.pixel_flip.random_accuracy))
        if plots:
            self._plot(out_dir)
        return out_dir

    def _plot(self, out_dir: Path):
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        if self.compatibility is not None:
            fig, ax = plt.subplots(figsize=(4, 4))
            c = self.compatibility
            ax.errorbar(c.bin_centers, c.per_bin_mean, yerr=c.per_bin_std,
                        marker="o", capsize=3, label="generated")
            ax.plot([0, 1], [0, 1], "k--", lw=1, label="ideal")
            ax.set_xlabel("condition posterior")
            ax.set_ylabel("actual posterior")
            ax.set_title(f"compatibility (rho={c.spearman_rho:.3f})")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out_dir / "compatibility.png", dpi=120)
            plt.close(fig)
        if self.pixel_flip is not None:
            fig, ax = plt.subplots(figsize=(4, 4))
            pf = self.pixel_flip
            ax.plot(pf.fractions, pf.accuracy, marker="o", label="saliency")
            ax.plot(pf.fractions, pf.random_accuracy, marker="s", label="random")
            ax.set_xlabel("fraction of pixels replaced")
            ax.set_ylabel("classifier accuracy")
            ax.set_title("pixel-flip evaluation")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out_dir / "pixel_flip.png", dpi=120)
            plt.close(fig)


def _write_csv(path: Path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(list(row))
