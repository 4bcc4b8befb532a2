#!/usr/bin/env python3
"""End-to-end desk experiment on the synthetic disc dataset.

Generates data, trains the reference classifier and the explainer, then
runs the full evaluation suite and writes a report with plots.  Takes
roughly half an hour of CPU time at the default settings.

Usage::

    python scripts/run_desk_experiment.py --out runs/desk [--steps 3500]
"""

import argparse
import time
from pathlib import Path

import numpy as np
import torch

from cfgan.blackbox import ClassifierTrainConfig, save_classifier, train_reference_classifier
from cfgan.evalsuite import (EvalReport, compatibility_curve, data_consistency_fid,
                             identity_verification, latent_space_closeness,
                             measurement_correlation, pixel_flip_curve, self_consistency)
from cfgan.explain import saliency_from_extremes, sweep_many
from cfgan.experiments import desk_synth_spec, desk_train_config
from cfgan.synthdata import generate_synthetic, measure_factor, save_dataset
from cfgan.trainer import train_explainer


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--samples", type=int, default=5000)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--steps", type=int, default=3500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    torch.set_num_threads(torch.get_num_threads())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    full = generate_synthetic(desk_synth_spec(args.samples + args.queries, seed=args.seed))
    train_ds = full.subset(np.arange(args.samples))
    held = full.subset(np.arange(args.samples, len(full)), split="test")
    save_dataset(held, out / "heldout_data")

    blackbox = train_reference_classifier(train_ds, "target",
                                          ClassifierTrainConfig(seed=args.seed))
    save_classifier(blackbox, out / "classifier")
    print(f"[{time.time()-t0:7.0f}s] classifier accuracy "
          f"{blackbox.metadata['validation_accuracy']:.3f}")

    cfg = desk_train_config(total_steps=args.steps, seed=args.seed)
    bundle = train_explainer(train_ds, blackbox, cfg, out_dir=out / "explainer")
    print(f"[{time.time()-t0:7.0f}s] explainer trained ({args.steps} steps)")

    series = sweep_many(bundle, blackbox, held.images)
    report = EvalReport()
    report.compatibility = compatibility_curve(bundle, blackbox, held, series=series)
    report.self_consistency = self_consistency(bundle, blackbox,
                                               held.subset(np.arange(50)))
    report.fid = data_consistency_fid(bundle, blackbox, held, series=series)
    report.closeness = latent_space_closeness(bundle, blackbox,
                                              held.subset(np.arange(50)))
    embedder = lambda imgs: bundle.embed_images(imgs, pooling="mean")
    report.identity = identity_verification(
        embedder, held.images, np.stack([s.images[-1] for s in series]))
    maps = [saliency_from_extremes(bundle, blackbox, x) for x in held.images]
    report.pixel_flip = pixel_flip_curve(maps, held, blackbox, "target", seed=args.seed)
    report.measurement = measurement_correlation(bundle, blackbox, measure_factor,
                                                 held, series=series)
    report.save(out / "report")

    c = report.compatibility
    print(f"[{time.time()-t0:7.0f}s] rho={c.spearman_rho:.3f} "
          f"dev={c.mean_abs_deviation:.3f} "
          f"recon={report.self_consistency.reconstruction_l1:.4f} "
          f"cycle={report.self_consistency.cycle_l1:.4f} "
          f"pearson_r={report.measurement.pearson_r:.3f} "
          f"pixel-flip gap={report.pixel_flip.mean_gap():.3f}")
    print(f"report written to {out / 'report'}")


if __name__ == "__main__":
    main()
