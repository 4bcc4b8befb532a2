"""Command-line surface tying the toolkit into reproducible runs.

Commands: ``synth-data``, ``train-classifier``, ``train-explainer``,
``explain``, ``evaluate``, ``bias-experiment``.  Every command resolves a
flat key=value config file plus ``--set key=value`` overrides, locks its
output directory, writes its artifacts atomically and records a run
manifest (resolved config, seeds, input hashes, outputs, wall clock).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from cfgan import config as cfgmod
from cfgan.blackbox import (BlackBoxClassifier, ClassifierTrainConfig,
                            build_biased_split, load_classifier, save_classifier,
                            train_oracle, train_reference_classifier)
from cfgan.config import ConfigError, get
from cfgan.losses import LossWeights
from cfgan.nets import ArchitectureConfig
from cfgan.synthdata import (LabeledImageDataset, SynthFactorSpec, generate_synthetic,
                             load_dataset, save_dataset)
from cfgan.trainer import TrainConfig, load_bundle, train_explainer

VALID_METRICS = ("compatibility", "self-consistency", "fid", "closeness",
                 "identity", "pixel-flip", "measurement", "confounding")


class CommandError(RuntimeError):
    """Fatal command failure with a one-line diagnostic."""


def _resolved_config(args) -> dict:
    conf = cfgmod.load_config(args.config) if getattr(args, "config", None) else {}
    return cfgmod.apply_overrides(conf, getattr(args, "set", None))


def _load_image(path, image_shape) -> np.ndarray:
    from PIL import Image

    c, h, w = image_shape
    with Image.open(path) as im:
        if c == 1:
            im = im.convert("L")
        if im.size != (w, h):
            im = im.resize((w, h), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr


def _save_strip(images: list[np.ndarray], path: Path, upscale: int = 4):
    from PIL import Image

    gap = np.ones((images[0].shape[0], 2, images[0].shape[2]), dtype=np.float32)
    cells = []
    for i, img in enumerate(images):
        if i:
            cells.append(gap)
        cells.append(img.astype(np.float32))
    strip = np.concatenate(cells, axis=1)
    arr = np.clip(np.round(strip * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[-1] == 1:
        arr = arr[..., 0]
    im = Image.fromarray(arr)
    if upscale > 1:
        im = im.resize((im.width * upscale, im.height * upscale), Image.NEAREST)
    im.save(path)


# ---------------------------------------------------------------------------
# commands


def cmd_synth_data(args) -> int:
    conf = _resolved_config(args)
    spec = SynthFactorSpec(
        image_size=get(conf, "data.image_size", 32),
        n_samples=get(conf, "data.n_samples", 1000),
        seed=get(conf, "data.seed", 0),
        correlation=get(conf, "data.correlation", "independent"),
        target_range=tuple(conf.get("data.target_range", (4.0, 11.0))),
        confounder_range=tuple(conf.get("data.confounder_range", (0.0, 0.4))),
    )
    started = time.time()
    out = cfgmod.resolve_output_dir(args.out)
    with cfgmod.output_lock(out):
        ds = generate_synthetic(spec)
        save_dataset(ds, out)
        cfgmod.write_run_manifest(out, "synth-data", conf, inputs={}, outputs=[out],
                                  started=started)
    print(f"wrote {len(ds)} images to {out}")
    return 0


def _classifier_config(conf) -> ClassifierTrainConfig:
    return ClassifierTrainConfig(
        epochs=get(conf, "classifier.epochs", 5),
        batch_size=get(conf, "classifier.batch_size", 64),
        lr=get(conf, "classifier.lr", 1e-3),
        width=get(conf, "classifier.width", 16),
        seed=get(conf, "classifier.seed", 0),
        val_fraction=get(conf, "classifier.val_fraction", 0.1),
        label_smoothing=get(conf, "classifier.label_smoothing", 0.0),
    )


def cmd_train_classifier(args) -> int:
    conf = _resolved_config(args)
    started = time.time()
    dataset = load_dataset(args.data)
    cfg = _classifier_config(conf)
    out = cfgmod.resolve_output_dir(args.out)
    with cfgmod.output_lock(out):
        if args.biased:
            if not args.confounder:
                raise CommandError("--biased requires --confounder")
            dataset = build_biased_split(dataset, args.target, args.confounder)
            print(f"biased split: {len(dataset)} samples")
        if args.oracle:
            oracle = train_oracle(dataset, args.target, cfg,
                                  accuracy_floor=get(conf, "classifier.accuracy_floor", 0.95))
            bb = oracle.classifier
            bb.metadata["oracle_threshold"] = oracle.threshold
            bb.metadata["oracle_accuracy_floor"] = oracle.accuracy_floor
        else:
            bb = train_reference_classifier(dataset, args.target, cfg)
        save_classifier(bb, out)
        cfgmod.write_run_manifest(out, "train-classifier", conf,
                                  inputs={"data": args.data}, outputs=[out],
                                  started=started)
    print(f"validation accuracy {bb.metadata['validation_accuracy']:.4f} -> {out}")
    return 0


def _train_config(conf, image_shape) -> TrainConfig:
    arch = ArchitectureConfig(
        image_shape=image_shape,
        base_width=get(conf, "train.base_width", 24),
        blocks=get(conf, "train.blocks", 3),
        channel_multipliers=tuple(conf.get("train.channel_multipliers", (1, 2, 2))),
        disc_width=get(conf, "train.disc_width", 24),
        disc_blocks=get(conf, "train.disc_blocks", 3),
        disc_channel_multipliers=tuple(conf.get("train.disc_channel_multipliers", (1, 2, 2))),
        use_spectral_norm=get(conf, "train.spectral_norm", True),
    )
    weights = LossWeights(
        adversarial=get(conf, "train.weight_adversarial", 1.0),
        compatibility=get(conf, "train.weight_compatibility", 1.0),
        reconstruction=get(conf, "train.weight_reconstruction", 100.0),
    )
    return TrainConfig(
        delta=get(conf, "train.delta", 0.1),
        weights=weights,
        arch=arch,
        g_lr=get(conf, "train.g_lr", 2e-4),
        d_lr=get(conf, "train.d_lr", 4e-4),
        betas=tuple(conf.get("train.betas", (0.0, 0.9))),
        batch_size=get(conf, "train.batch_size", 32),
        d_steps_per_g_step=get(conf, "train.d_steps_per_g_step", 1),
        total_steps=get(conf, "train.total_steps", 3500),
        seed=get(conf, "train.seed", 0),
        checkpoint_interval=get(conf, "train.checkpoint_interval", 500),
        divergence_threshold=get(conf, "train.divergence_threshold", 1e4),
    )


def cmd_train_explainer(args) -> int:
    conf = _resolved_config(args)
    started = time.time()
    dataset = load_dataset(args.data)
    blackbox = load_classifier(args.classifier)
    h, w, c = dataset.image_shape
    runs = cfgmod.expand_sweeps(conf)
    out = cfgmod.resolve_output_dir(args.out)
    with cfgmod.output_lock(out):
        for i, run_conf in enumerate(runs):
            run_out = out if len(runs) == 1 else out / f"run_{i:03d}"
            cfg = _train_config(run_conf, (c, h, w))
            train_explainer(dataset, blackbox, cfg, out_dir=run_out)
            cfgmod.write_run_manifest(
                run_out, "train-explainer", run_conf,
                inputs={"data": args.data, "classifier": args.classifier},
                outputs=[run_out / "bundle", run_out / "metrics.csv"],
                started=started)
            print(f"trained explainer ({cfg.total_steps} steps) -> {run_out}")
    return 0


def cmd_explain(args) -> int:
    from cfgan.explain import explain, saliency_from_extremes, sweep

    conf = _resolved_config(args)
    started = time.time()
    bundle = load_bundle(Path(args.bundle) / "bundle" if (Path(args.bundle) / "bundle").is_dir()
                         else args.bundle)
    blackbox = load_classifier(args.classifier)
    if tuple(bundle.image_shape) != tuple(blackbox.input_shape):
        raise CommandError(
            f"bundle image shape {bundle.image_shape} does not match classifier "
            f"{blackbox.input_shape}")
    x = _load_image(args.image, bundle.image_shape)
    out = cfgmod.resolve_output_dir(args.out)
    with cfgmod.output_lock(out):
        rows = [("bin", "condition_posterior", "actual_posterior")]
        if args.sweep:
            series = sweep(bundle, blackbox, x)
            strip = [x] + [series.images[k] for k in range(len(series.images))]
            for k in range(len(series.images)):
                rows.append((k, series.condition_posteriors[k], series.actual_posteriors[k]))
        else:
            from cfgan.conditioning import bin_target_posterior, shift_condition

            x_d, actual = explain(bundle, blackbox, x, args.delta)
            f_x = blackbox.predict_posterior(x)
            k = shift_condition(f_x, args.delta, bundle.spec)
            strip = [x, x_d]
            rows.append((int(k), bin_target_posterior(int(k), bundle.spec), actual))
        _save_strip(strip, out / "strip.png")
        with open(out / "series.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        outputs = [out / "strip.png", out / "series.csv"]
        if args.saliency:
            sal = saliency_from_extremes(bundle, blackbox, x)
            _save_strip([sal.values[..., None]], out / "saliency.png")
            np.savetxt(out / "saliency_values.csv", sal.values, delimiter=",")
            outputs += [out / "saliency.png", out / "saliency_values.csv"]
        cfgmod.write_run_manifest(
            out, "explain", conf,
            inputs={"bundle": args.bundle, "classifier": args.classifier,
                    "image": args.image},
            outputs=outputs, started=started)
    print(f"wrote {out / 'strip.png'}")
    return 0


def cmd_evaluate(args) -> int:
    from cfgan import evalsuite
    from cfgan.explain import saliency_from_extremes, sweep_many

    conf = _resolved_config(args)
    started = time.time()
    metrics = [m.strip() for m in args.metrics.split(",")] if args.metrics else ["compatibility"]
    bad = [m for m in metrics if m not in VALID_METRICS]
    if bad:
        raise CommandError(
            f"unknown metric(s) {', '.join(bad)}; valid metrics: {', '.join(VALID_METRICS)}")

    bundle_path = Path(args.bundle)
    bundle = load_bundle(bundle_path / "bundle" if (bundle_path / "bundle").is_dir()
                         else bundle_path)
    blackbox = load_classifier(args.classifier)
    dataset = load_dataset(args.data)
    max_queries = get(conf, "evaluate.max_queries", 200)
    if max_queries and len(dataset) > max_queries:
        dataset = dataset.subset(np.arange(max_queries))

    out = cfgmod.resolve_output_dir(args.out)
    with cfgmod.output_lock(out):
        report = evalsuite.EvalReport()
        needs_series = {"compatibility", "fid", "measurement"} & set(metrics)
        series = sweep_many(bundle, blackbox, dataset.images) if needs_series else None
        if "compatibility" in metrics:
            report.compatibility = evalsuite.compatibility_curve(
                bundle, blackbox, dataset, series=series)
        if "self-consistency" in metrics:
            report.self_consistency = evalsuite.self_consistency(
                bundle, blackbox, dataset, delta=get(conf, "evaluate.cycle_delta", 0.3))
        if "fid" in metrics:
            report.fid = evalsuite.data_consistency_fid(bundle, blackbox, dataset, series=series)
        if "closeness" in metrics:
            report.closeness = evalsuite.latent_space_closeness(bundle, blackbox, dataset)
        if "identity" in metrics:
            expl = np.stack([
                s.images[-1] for s in (series or sweep_many(bundle, blackbox, dataset.images))
            ])
            embedder = lambda imgs: bundle.embed_images(imgs, pooling="mean")
            report.identity = evalsuite.identity_verification(
                embedder, dataset.images, expl,
                threshold=get(conf, "evaluate.identity_threshold", 0.5))
        if "pixel-flip" in metrics:
            target = blackbox.metadata.get("target_attribute", "target")
            maps = [saliency_from_extremes(bundle, blackbox, x) for x in dataset.images]
            report.pixel_flip = evalsuite.pixel_flip_curve(
                maps, dataset, blackbox, target,
                seed=get(conf, "evaluate.seed", 0))
        if "measurement" in metrics:
            from cfgan.synthdata import measure_factor

            report.measurement = evalsuite.measurement_correlation(
                bundle, blackbox, measure_factor, dataset, series=series)
        if "confounding" in metrics:
            if not args.oracle:
                raise CommandError("metric 'confounding' requires --oracle")
            oracle_bb = load_classifier(args.oracle)
            from cfgan.blackbox import OracleClassifier

            oracle = OracleClassifier(
                classifier=oracle_bb,
                attribute=oracle_bb.metadata["target_attribute"],
                accuracy=oracle_bb.metadata["validation_accuracy"],
                accuracy_floor=oracle_bb.metadata.get("oracle_accuracy_floor", 0.95),
                threshold=oracle_bb.metadata.get("oracle_threshold", 0.5),
            )
            report.confounding = {
                cond: vars(evalsuite.confounding_metric(bundle, blackbox, oracle,
                                                        dataset, cond))
                for cond in ("present", "absent")
            }
        report.save(out)
        cfgmod.write_run_manifest(
            out, "evaluate", conf,
            inputs={"bundle": args.bundle, "classifier": args.classifier, "data": args.data},
            outputs=[out / "report.json"], started=started)
    print(f"wrote {out / 'report.json'}")
    return 0


def cmd_bias_experiment(args) -> int:
    from cfgan.experiments import run_bias_experiment

    conf = _resolved_config(args)
    started = time.time()
    out = cfgmod.resolve_output_dir(args.out)
    with cfgmod.output_lock(out):
        artifacts = run_bias_experiment(
            n_samples=get(conf, "bias.n_samples", 3000),
            eval_queries=get(conf, "bias.eval_queries", 200),
            image_size=get(conf, "bias.image_size", 32),
            explainer_steps=get(conf, "bias.explainer_steps", 1200),
            seed=get(conf, "bias.seed", 0),
            classifier_config=_classifier_config(conf),
            train_overrides={
                "total_steps": get(conf, "bias.explainer_steps", 1200),
                "seed": get(conf, "bias.seed", 0),
            },
            oracle_floor=get(conf, "bias.oracle_floor", 0.95),
            out_dir=out,
        )
        cfgmod.write_run_manifest(out, "bias-experiment", conf, inputs={},
                                  outputs=[out / "bias_summary.json",
                                           out / "comparison_table.csv"],
                                  started=started)
    r = artifacts.result
    print(f"biased flip fraction {r.biased_overall:.3f} vs unbiased "
          f"{r.unbiased_overall:.3f} (ratio {r.ratio:.2f}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfgan",
        description="Train and evaluate generative counterfactual explainers "
                    "for binary image classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth-data", help="generate the synthetic disc dataset")
    add_common(p)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train-classifier", help="train a frozen reference classifier")
    add_common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--target", required=True, help="attribute to classify")
    p.add_argument("--oracle", action="store_true",
                   help="train as a confounder oracle (enforces the accuracy floor)")
    p.add_argument("--biased", action="store_true",
                   help="train on the biased split (target=1 implies confounder=1)")
    p.add_argument("--confounder", help="confounder attribute for --biased")
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("train-explainer", help="train the generative explainer")
    add_common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--classifier", required=True, help="classifier checkpoint directory")
    p.set_defaults(func=cmd_train_explainer)

    p = sub.add_parser("explain", help="explain one query image")
    add_common(p)
    p.add_argument("--bundle", required=True, help="explainer checkpoint directory")
    p.add_argument("--classifier", required=True)
    p.add_argument("--image", required=True, help="query image path")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--delta", type=float, help="single posterior shift")
    group.add_argument("--sweep", action="store_true", help="full progressive series")
    p.add_argument("--saliency", action="store_true",
                   help="also write the extreme-difference saliency map")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="run evaluation metrics")
    add_common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metrics", help=f"comma-separated subset of: {', '.join(VALID_METRICS)}")
    p.add_argument("--oracle", help="oracle checkpoint (for the confounding metric)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bias-experiment",
                       help="paired biased/unbiased explainer comparison")
    add_common(p)
    p.set_defaults(func=cmd_bias_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CommandError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - single-line diagnostic per contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
