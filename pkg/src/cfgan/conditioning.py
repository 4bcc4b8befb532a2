"""Posterior binning: discrete generator conditions from (posterior, delta).

The classifier's output range [0,1] is cut into ``N = floor(1/delta)``
equally sized bins.  A requested posterior change ``delta`` is expressed as
moving from the bin of ``f(x)`` to the bin of ``f(x) + delta``; the bin
index is the condition fed to the generator and discriminator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Posteriors are clamped away from exact 0/1 before they feed log-based
# losses; bin centers share the same guard.
POSTERIOR_EPS = 1e-4


@dataclass(frozen=True)
class ConditionSpec:
    """Step size and the derived bin grid."""

    delta: float
    n_bins: int

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0,1), got {self.delta}")
        if self.n_bins < 2:
            raise ValueError(f"need at least 2 bins, got n_bins={self.n_bins} (delta={self.delta})")
        if self.n_bins * self.delta > 1.0 + 1e-9:
            raise ValueError(f"n_bins * delta must not exceed 1 (got {self.n_bins * self.delta})")

    @classmethod
    def from_delta(cls, delta: float) -> "ConditionSpec":
        # The 1e-9 nudge keeps floor() stable when 1/delta lands a hair
        # below an integer due to binary rounding.
        return cls(delta=float(delta), n_bins=int(math.floor(1.0 / float(delta) + 1e-9)))


def bin_index(p, spec: ConditionSpec):
    """Bin index of posterior ``p``: ``min(floor(p*N), N-1)``.

    Bins are ``[k/N, (k+1)/N)`` with the last bin closed at 1.  Accepts a
    scalar or an array; out-of-range values raise.
    """
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"posterior outside [0,1]: {p}")
    k = np.minimum(np.floor(arr * spec.n_bins), spec.n_bins - 1).astype(np.int64)
    if np.isscalar(p) or arr.ndim == 0:
        return int(k)
    return k


def shift_condition(f_x, delta, spec: ConditionSpec):
    """Condition for shifting posterior ``f_x`` by ``delta``.

    The shifted posterior is clamped to [0,1] before binning, so overshoot
    past either end of the scale saturates at the extreme bins.
    """
    shifted = np.clip(np.asarray(f_x, dtype=np.float64) + delta, 0.0, 1.0)
    return bin_index(shifted if shifted.ndim else float(shifted), spec)


def bin_target_posterior(k, spec: ConditionSpec):
    """Representative posterior of bin ``k``: its center, clamped to (0,1)."""
    arr = np.asarray(k)
    if np.any(arr < 0) or np.any(arr > spec.n_bins - 1):
        raise ValueError(f"bin index outside [0, {spec.n_bins - 1}]: {k}")
    center = (arr.astype(np.float64) + 0.5) / spec.n_bins
    center = np.clip(center, POSTERIOR_EPS, 1.0 - POSTERIOR_EPS)
    if np.isscalar(k) or arr.ndim == 0:
        return float(center)
    return center
