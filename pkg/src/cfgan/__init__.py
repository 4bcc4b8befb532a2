"""Counterfactual explanation of black-box image classifiers.

Trains a conditional generative explainer (encoder + condition-driven
generator + projection discriminator with an ordinal condition head)
against a frozen differentiable classifier, so that generated variants of
a query image shift the classifier's posterior by a chosen amount while
staying realistic and identity-preserving.  Ships the matching evaluation
suite: compatibility curves, FID, latent closeness, identity verification,
pixel-flip saliency scoring, confounding detection and class-flip analysis.
"""

__version__ = "0.1.0"

from cfgan.conditioning import ConditionSpec, bin_index, bin_target_posterior, shift_condition
from cfgan.losses import LossWeights

__all__ = [
    "ConditionSpec",
    "LossWeights",
    "bin_index",
    "bin_target_posterior",
    "shift_condition",
    "__version__",
]
