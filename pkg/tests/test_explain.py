import numpy as np
import pytest
import torch

from helpers import (ConstantImageBundle, IdentityStubBundle, PerfectStubBundle,
                     mean_pixel_blackbox, random_images)

from cfgan.conditioning import ConditionSpec, bin_target_posterior
from cfgan.explain import (cycle_l1, explain, normalize_saliency, reconstruction_l1,
                           saliency_from_extremes, sweep, sweep_many)
from cfgan.nets import ArchitectureConfig
from cfgan.synthdata import LabeledImageDataset
from cfgan.trainer import TrainConfig, train_explainer

SPEC = ConditionSpec.from_delta(0.1)


@pytest.fixture(scope="module")
def bb():
    return mean_pixel_blackbox(shape=(1, 8, 8))


@pytest.fixture(scope="module")
def untrained_bundle(bb):
    arch = ArchitectureConfig(image_shape=(1, 8, 8), base_width=4, blocks=1,
                              channel_multipliers=(1,), disc_width=4, disc_blocks=1,
                              disc_channel_multipliers=(1,))
    imgs = random_images(16, shape=(8, 8, 1), seed=2)
    ds = LabeledImageDataset(images=imgs, attributes={}, filenames=[str(i) for i in range(16)])
    return train_explainer(ds, bb, TrainConfig(arch=arch, total_steps=0, batch_size=4))


def test_explain_identity_stub_returns_query(bb):
    bundle = IdentityStubBundle(SPEC)
    x = random_images(1)[0]
    out, actual = explain(bundle, bb, x, 0.3)
    assert np.allclose(out, x, atol=1e-6)
    assert actual == pytest.approx(float(x.mean()), abs=1e-6)


def test_explain_untrained_bundle_valid_range(untrained_bundle, bb):
    x = random_images(1)[0]
    out, actual = explain(untrained_bundle, bb, x, 0.4)
    assert out.shape == x.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert 0.0 <= actual <= 1.0


def test_explain_deterministic(untrained_bundle, bb):
    x = random_images(1)[0]
    a, pa = explain(untrained_bundle, bb, x, 0.2)
    b, pb = explain(untrained_bundle, bb, x, 0.2)
    assert np.array_equal(a, b) and pa == pb


def test_explain_shape_mismatch(bb):
    bundle = IdentityStubBundle(SPEC, image_shape=(1, 8, 8))
    with pytest.raises(ValueError, match="shape"):
        explain(bundle, bb, random_images(1, shape=(4, 4, 1))[0], 0.1)


def test_sweep_series_structure(untrained_bundle, bb):
    x = random_images(1)[0]
    series = sweep(untrained_bundle, bb, x)
    assert len(series.images) == SPEC.n_bins
    assert np.array_equal(series.condition_posteriors,
                          [bin_target_posterior(k, SPEC) for k in range(SPEC.n_bins)])
    assert np.all(np.diff(series.condition_posteriors) > 0)
    again = sweep(untrained_bundle, bb, x)
    assert np.array_equal(series.images, again.images)


def test_sweep_perfect_stub_matches_conditions(bb):
    bundle = PerfectStubBundle(SPEC)
    series = sweep(bundle, bb, random_images(1)[0])
    assert np.allclose(series.actual_posteriors, series.condition_posteriors, atol=1e-6)


def test_sweep_many_matches_single(untrained_bundle, bb):
    imgs = random_images(5, seed=9)
    many = sweep_many(untrained_bundle, bb, imgs, chunk=2)
    assert len(many) == 5
    single = sweep(untrained_bundle, bb, imgs[3])
    assert np.allclose(many[3].images, single.images, atol=1e-6)
    assert np.allclose(many[3].actual_posteriors, single.actual_posteriors, atol=1e-6)


def test_saliency_identical_extremes_degenerate(bb):
    bundle = IdentityStubBundle(SPEC)
    sal = saliency_from_extremes(bundle, bb, random_images(1)[0])
    assert sal.degenerate
    assert np.all(sal.values == 0.0)


def test_saliency_normalization_contract(untrained_bundle, bb):
    sal = saliency_from_extremes(untrained_bundle, bb, random_images(1)[0])
    if not sal.degenerate:
        assert sal.values.min() == pytest.approx(0.0)
        assert sal.values.max() == pytest.approx(1.0)
    renorm = normalize_saliency(sal.values)
    assert np.allclose(renorm.values, sal.values)


def test_reconstruction_and_cycle_on_identity_stub(bb):
    bundle = IdentityStubBundle(SPEC)
    x = random_images(1)[0]
    assert reconstruction_l1(bundle, bb, x) == pytest.approx(0.0, abs=1e-6)
    assert cycle_l1(bundle, bb, x, 0.3) == pytest.approx(0.0, abs=1e-6)


def test_constant_bundle_cycle(bb):
    bundle = ConstantImageBundle(SPEC, fill=0.5)
    x = np.full((8, 8, 1), 0.25, dtype=np.float32)
    assert cycle_l1(bundle, bb, x, 0.3) == pytest.approx(0.25, abs=1e-6)
