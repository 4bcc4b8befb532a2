"""Reusable desk-scale experiment recipes.

These functions wire the modules together for the standard synthetic-disc
experiments: train a classifier and explainer on controllable data, then
run the evaluation suite.  The bias experiment trains a confounded and an
unconfounded classifier/explainer pair and compares their confounder-flip
fractions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from cfgan.blackbox import (BlackBoxClassifier, ClassifierTrainConfig,
                            OracleClassifier, train_oracle,
                            train_reference_classifier)
from cfgan.evalsuite import ConfoundingResult, confounding_metric
from cfgan.nets import ArchitectureConfig
from cfgan.synthdata import LabeledImageDataset, SynthFactorSpec, generate_synthetic
from cfgan.trainer import ExplainerBundle, TrainConfig, train_explainer


def desk_synth_spec(n_samples: int = 5000, seed: int = 0, image_size: int = 32,
                    correlation: str = "independent") -> SynthFactorSpec:
    """The default synthetic-disc recipe used across the desk experiments."""
    return SynthFactorSpec(
        image_size=image_size,
        n_samples=n_samples,
        seed=seed,
        correlation=correlation,
    )


def desk_train_config(image_size: int = 32, total_steps: int = 3500, seed: int = 0,
                      **overrides) -> TrainConfig:
    """Default explainer training configuration for 32x32 synthetic data."""
    arch = overrides.pop("arch", ArchitectureConfig(image_shape=(1, image_size, image_size)))
    return TrainConfig(arch=arch, total_steps=total_steps, seed=seed, **overrides)


@dataclass
class BiasExperimentResult:
    biased: dict            # condition -> ConfoundingResult
    unbiased: dict
    biased_overall: float
    unbiased_overall: float

    @property
    def ratio(self) -> float:
        if self.unbiased_overall == 0:
            return float("inf") if self.biased_overall > 0 else 1.0
        return self.biased_overall / self.unbiased_overall

    def to_dict(self) -> dict:
        def conf(d):
            return {cond: {"flip_fraction": r.flip_fraction,
                           "class_distribution": r.class_distribution,
                           "n_queries": r.n_queries}
                    for cond, r in d.items()}

        return {
            "biased": conf(self.biased),
            "unbiased": conf(self.unbiased),
            "biased_overall": self.biased_overall,
            "unbiased_overall": self.unbiased_overall,
            "ratio": self.ratio,
        }

    def comparison_rows(self) -> list[list]:
        rows = [["classifier", "condition", "flip_fraction",
                 "predicted_positive", "predicted_negative"]]
        for name, results in (("biased", self.biased), ("unbiased", self.unbiased)):
            for cond, r in sorted(results.items()):
                rows.append([name, cond, r.flip_fraction,
                             r.class_distribution["positive"],
                             r.class_distribution["negative"]])
        rows.append(["biased", "overall", self.biased_overall, "", ""])
        rows.append(["unbiased", "overall", self.unbiased_overall, "", ""])
        return rows


@dataclass
class BiasExperimentArtifacts:
    classifier_biased: BlackBoxClassifier
    classifier_unbiased: BlackBoxClassifier
    oracle: OracleClassifier
    bundle_biased: ExplainerBundle
    bundle_unbiased: ExplainerBundle
    eval_set: LabeledImageDataset
    result: BiasExperimentResult


def run_bias_experiment(n_samples: int = 3000, eval_queries: int = 200,
                        image_size: int = 32, explainer_steps: int = 1200,
                        seed: int = 0,
                        classifier_config: ClassifierTrainConfig | None = None,
                        train_overrides: dict | None = None,
                        oracle_floor: float = 0.95,
                        out_dir=None) -> BiasExperimentArtifacts:
    """Confounded vs independent training, compared on one validation set.

    One classifier learns the target on fully-confounded data (the
    confounder predicts the label perfectly), the other on independent
    data; each gets its own explainer trained on the same data it saw.
    The confounding metric then counts oracle-detected confounder flips
    in extreme counterfactuals over a shared independent evaluation set.
    """
    classifier_config = classifier_config or ClassifierTrainConfig(seed=seed)
    train_overrides = dict(train_overrides or {})

    confounded = generate_synthetic(desk_synth_spec(
        n_samples, seed=seed, image_size=image_size, correlation="fully-confounded"))
    independent = generate_synthetic(desk_synth_spec(
        n_samples, seed=seed + 1, image_size=image_size, correlation="independent"))
    eval_set = generate_synthetic(desk_synth_spec(
        eval_queries, seed=seed + 2, image_size=image_size, correlation="independent"))

    f_biased = train_reference_classifier(confounded, "target", classifier_config)
    f_unbiased = train_reference_classifier(independent, "target", classifier_config)
    oracle = train_oracle(independent, "confounder", classifier_config,
                          accuracy_floor=oracle_floor)

    cfg = desk_train_config(image_size=image_size, total_steps=explainer_steps,
                            seed=seed, **train_overrides)
    out_dir = Path(out_dir) if out_dir is not None else None
    bundle_biased = train_explainer(
        confounded, f_biased, cfg,
        out_dir=None if out_dir is None else out_dir / "explainer_biased")
    bundle_unbiased = train_explainer(
        independent, f_unbiased, cfg,
        out_dir=None if out_dir is None else out_dir / "explainer_unbiased")

    def both_conditions(bundle, blackbox) -> dict[str, ConfoundingResult]:
        return {
            cond: confounding_metric(bundle, blackbox, oracle, eval_set, cond)
            for cond in ("present", "absent")
        }

    biased = both_conditions(bundle_biased, f_biased)
    unbiased = both_conditions(bundle_unbiased, f_unbiased)
    result = BiasExperimentResult(
        biased=biased,
        unbiased=unbiased,
        biased_overall=sum(r.flip_fraction for r in biased.values()) / len(biased),
        unbiased_overall=sum(r.flip_fraction for r in unbiased.values()) / len(unbiased),
    )

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bias_summary.json").write_text(json.dumps(result.to_dict(), indent=2))
        import csv

        with open(out_dir / "comparison_table.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(result.comparison_rows())

    return BiasExperimentArtifacts(
        classifier_biased=f_biased,
        classifier_unbiased=f_unbiased,
        oracle=oracle,
        bundle_biased=bundle_biased,
        bundle_unbiased=bundle_unbiased,
        eval_set=eval_set,
        result=result,
    )
