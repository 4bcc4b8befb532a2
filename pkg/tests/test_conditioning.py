import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfgan.conditioning import (ConditionSpec, bin_index, bin_target_posterior,
                                shift_condition)


def test_spec_from_delta():
    spec = ConditionSpec.from_delta(0.1)
    assert spec.n_bins == 10
    assert ConditionSpec.from_delta(0.07).n_bins == 14
    assert ConditionSpec.from_delta(1 / 3).n_bins == 3


def test_spec_invariants():
    with pytest.raises(ValueError):
        ConditionSpec(delta=0.6, n_bins=1)
    with pytest.raises(ValueError):
        ConditionSpec(delta=0.3, n_bins=4)  # N * delta > 1
    with pytest.raises(ValueError):
        ConditionSpec(delta=0.0, n_bins=10)


def test_bin_index_examples():
    spec = ConditionSpec.from_delta(0.1)
    assert bin_index(0.23, spec) == 2
    assert bin_index(1.0, spec) == 9  # last bin closed
    assert bin_index(0.0, spec) == 0


def test_bin_index_rejects_out_of_range():
    spec = ConditionSpec.from_delta(0.1)
    with pytest.raises(ValueError):
        bin_index(-0.01, spec)
    with pytest.raises(ValueError):
        bin_index(1.01, spec)


def test_bin_index_vectorized():
    spec = ConditionSpec.from_delta(0.25)
    ks = bin_index(np.array([0.0, 0.24, 0.25, 0.99, 1.0]), spec)
    assert ks.tolist() == [0, 0, 1, 3, 3]


def test_shift_condition_examples():
    spec = ConditionSpec.from_delta(0.1)
    assert shift_condition(0.23, 0.3, spec) == 5
    assert shift_condition(0.95, 0.2, spec) == 9  # clamped
    assert shift_condition(0.4, 0.0, spec) == bin_index(0.4, spec) == 4
    assert shift_condition(0.1, -0.5, spec) == 0  # clamped below


def test_bin_target_posterior_examples():
    spec = ConditionSpec.from_delta(0.1)
    assert bin_target_posterior(5, spec) == pytest.approx(0.55)
    assert bin_target_posterior(0, spec) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        bin_target_posterior(10, spec)


@given(st.integers(min_value=2, max_value=100))
def test_center_round_trip(n_bins):
    spec = ConditionSpec(delta=1.0 / n_bins, n_bins=n_bins)
    for k in range(n_bins):
        assert bin_index(bin_target_posterior(k, spec), spec) == k


@given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0),
       st.integers(min_value=2, max_value=50))
def test_bin_index_monotone(p1, p2, n_bins):
    spec = ConditionSpec(delta=1.0 / n_bins, n_bins=n_bins)
    lo, hi = sorted((p1, p2))
    assert bin_index(lo, spec) <= bin_index(hi, spec)


@given(st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=-1.0, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0))
def test_shift_condition_monotone_in_delta(f_x, d1, d2):
    spec = ConditionSpec.from_delta(0.1)
    lo, hi = sorted((d1, d2))
    assert shift_condition(f_x, lo, spec) <= shift_condition(f_x, hi, spec)


def test_closed_form_grid():
    # bin arithmetic matches the closed-form definition across (p, delta)
    rng = np.random.default_rng(42)
    for _ in range(1000):
        p = float(rng.uniform(0, 1))
        delta = float(rng.uniform(0.01, 0.5))
        spec = ConditionSpec.from_delta(delta)
        n = spec.n_bins
        assert bin_index(p, spec) == min(math.floor(p * n), n - 1)
