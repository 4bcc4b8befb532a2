#!/usr/bin/env python3
"""Loss-weight ablation sweep via list-valued config keys.

Writes one config file with a swept weight, expands it into runs through
the CLI machinery, trains each variant and prints a compact comparison.

Usage::

    python scripts/run_ablation.py --out runs/ablation --steps 800 \
        --sweep adversarial --values 0 1 10 100
"""

import argparse
import json
from pathlib import Path

import numpy as np

from cfgan.blackbox import ClassifierTrainConfig, train_reference_classifier
from cfgan.config import expand_sweeps
from cfgan.evalsuite import compatibility_curve, self_consistency
from cfgan.experiments import desk_synth_spec, desk_train_config
from cfgan.losses import LossWeights
from cfgan.synthdata import generate_synthetic
from cfgan.trainer import train_explainer


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--samples", type=int, default=3000)
    parser.add_argument("--queries", type=int, default=100)
    parser.add_argument("--steps", type=int, default=800)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sweep", choices=("adversarial", "compatibility",
                                            "reconstruction"), default="compatibility")
    parser.add_argument("--values", type=float, nargs="+", default=[0.0, 1.0, 10.0])
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    full = generate_synthetic(desk_synth_spec(args.samples + args.queries, seed=args.seed))
    train_ds = full.subset(np.arange(args.samples))
    held = full.subset(np.arange(args.samples, len(full)), split="test")
    blackbox = train_reference_classifier(train_ds, "target",
                                          ClassifierTrainConfig(seed=args.seed))

    base = {"adversarial": 1.0, "compatibility": 1.0, "reconstruction": 100.0,
            args.sweep: list(args.values)}
    rows = []
    for i, run in enumerate(expand_sweeps(base)):
        weights = LossWeights(**run)
        cfg = desk_train_config(total_steps=args.steps, seed=args.seed, weights=weights)
        bundle = train_explainer(train_ds, blackbox, cfg, out_dir=out / f"run_{i:03d}")
        comp = compatibility_curve(bundle, blackbox, held)
        sc = self_consistency(bundle, blackbox, held.subset(np.arange(30)))
        rows.append({"weights": vars(weights), "spearman_rho": comp.spearman_rho,
                     "mean_abs_deviation": comp.mean_abs_deviation,
                     "reconstruction_l1": sc.reconstruction_l1,
                     "cycle_l1": sc.cycle_l1})
        print(f"{run[args.sweep]:8g}  rho={comp.spearman_rho:.3f}  "
              f"dev={comp.mean_abs_deviation:.3f}  rec={sc.reconstruction_l1:.4f}")
    (out / "ablation.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
