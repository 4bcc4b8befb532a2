import numpy as np
import pytest
import torch

from helpers import constant_blackbox, linear_blackbox, random_images

from cfgan.blackbox import (BlackBoxClassifier, ClassifierTrainConfig, ContractError,
                            TrainingError, build_biased_split, load_classifier,
                            save_classifier, train_oracle, train_reference_classifier)
from cfgan.synthdata import SynthFactorSpec, generate_synthetic


@pytest.fixture(scope="module")
def disc_ds():
    return generate_synthetic(SynthFactorSpec(n_samples=1500, seed=0))


@pytest.fixture(scope="module")
def trained(disc_ds):
    return train_reference_classifier(disc_ds, "target",
                                      ClassifierTrainConfig(epochs=5, seed=0))


def test_constant_stub_posterior():
    bb = constant_blackbox(0.7)
    x = random_images(5)
    assert np.allclose(bb.predict_posterior(x), 0.7)
    assert bb.predict_posterior(x[0]) == pytest.approx(0.7)


def test_posterior_range_fuzz(trained, disc_ds):
    rng = np.random.default_rng(0)
    fuzz = rng.uniform(0, 1, size=(16,) + disc_ds.image_shape).astype(np.float32)
    p = trained.predict_posterior(fuzz)
    assert np.all(p >= 0.0) and np.all(p <= 1.0)


def test_batched_matches_single(trained, disc_ds):
    imgs = disc_ds.images[:6]
    batched = trained.predict_posterior(imgs)
    singles = np.array([trained.predict_posterior(im) for im in imgs])
    assert np.allclose(batched, singles, atol=1e-6)


def test_shape_contract():
    bb = constant_blackbox(0.5, shape=(1, 8, 8))
    with pytest.raises(ContractError, match="shape"):
        bb.predict_posterior(np.zeros((4, 4, 1), dtype=np.float32))
    with pytest.raises(ContractError, match="outside"):
        bb.predict_posterior(np.full((8, 8, 1), 2.0, dtype=np.float32))


def test_linear_logit_gradient_closed_form():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(4, 4, 1)).astype(np.float32)
    bb = linear_blackbox(w)
    x = rng.uniform(0, 1, size=(4, 4, 1)).astype(np.float32)
    p = bb.predict_posterior(x)
    grad = bb.posterior_gradient(x)
    assert np.allclose(grad, p * (1 - p) * w, atol=1e-5)


def test_constant_stub_zero_gradient():
    bb = constant_blackbox(0.3)
    g = bb.posterior_gradient(random_images(1)[0])
    assert np.allclose(g, 0.0)


def test_non_differentiable_model_rejected():
    import torch
    from torch import nn

    from cfgan.blackbox import UnsupportedCapabilityError

    class Detached(nn.Module):
        def forward(self, x):
            return torch.sigmoid(x.detach().sum(dim=(1, 2, 3)))

    bb = BlackBoxClassifier(Detached(), (1, 8, 8))
    with pytest.raises(UnsupportedCapabilityError, match="gradients"):
        bb.posterior_gradient(random_images(1)[0] * 0.1)


def test_gradient_matches_finite_differences():
    # central differences (step 1e-4) on a small stub, in double precision
    torch.manual_seed(4)
    from cfgan.blackbox import SmallConvNet

    net = SmallConvNet(in_channels=1, width=4).double().eval()
    bb = BlackBoxClassifier(net, (1, 8, 8))
    rng = np.random.default_rng(1)
    x = torch.from_numpy(rng.uniform(0.05, 0.95, size=(1, 1, 8, 8)))
    analytic = bb.gradient(x)[0, 0].numpy()
    h = 1e-4
    for _ in range(10):
        i, j = rng.integers(0, 8), rng.integers(0, 8)
        xp, xm = x.clone(), x.clone()
        xp[0, 0, i, j] += h
        xm[0, 0, i, j] -= h
        with torch.no_grad():
            fd = float((bb.posterior(xp) - bb.posterior(xm)) / (2 * h))
        denom = max(abs(fd), abs(analytic[i, j]), 1e-8)
        assert abs(fd - analytic[i, j]) / denom < 1e-3


def test_reference_classifier_accuracy(trained):
    assert trained.metadata["validation_accuracy"] >= 0.95


def test_training_deterministic(disc_ds):
    cfg = ClassifierTrainConfig(epochs=2, seed=5)
    a = train_reference_classifier(disc_ds, "target", cfg)
    b = train_reference_classifier(disc_ds, "target", cfg)
    assert a.metadata["validation_accuracy"] == b.metadata["validation_accuracy"]
    assert a.parameter_fingerprint() == b.parameter_fingerprint()


def test_missing_attribute_error(disc_ds):
    with pytest.raises(TrainingError, match="valid attributes"):
        train_reference_classifier(disc_ds, "smile")


def test_single_class_error(disc_ds):
    ones = np.flatnonzero(disc_ds.attributes["target"] == 1)
    with pytest.raises(TrainingError, match="single class"):
        train_reference_classifier(disc_ds.subset(ones), "target")


def test_biased_split(disc_ds):
    biased = build_biased_split(disc_ds, "target", "confounder")
    t, c = biased.attributes["target"], biased.attributes["confounder"]
    assert (c[t == 1] == 1).all()
    frac = (c[t == 0] == 1).mean()
    assert abs(frac - 0.5) < 0.1
    # membership only: every kept image is byte-identical to its source
    src = {f: i for i, f in enumerate(disc_ds.filenames)}
    for i, fname in enumerate(biased.filenames[:20]):
        assert np.array_equal(biased.images[i], disc_ds.images[src[fname]])


def test_biased_split_missing_attribute(disc_ds):
    with pytest.raises(TrainingError, match="gender"):
        build_biased_split(disc_ds, "target", "gender")


def test_oracle_training(disc_ds):
    oracle = train_oracle(disc_ds, "confounder", ClassifierTrainConfig(epochs=5, seed=0))
    assert oracle.accuracy >= 0.95
    assert oracle.threshold == 0.5
    pred = oracle.predict_attribute(disc_ds.images[:32])
    assert set(np.unique(pred)) <= {0, 1}


def test_oracle_floor_refusal(disc_ds):
    with pytest.raises(TrainingError, match="floor"):
        train_oracle(disc_ds, "confounder", ClassifierTrainConfig(epochs=0, seed=0),
                     accuracy_floor=0.999999)


def test_checkpoint_round_trip(tmp_path, trained, disc_ds):
    save_classifier(trained, tmp_path / "clf")
    back = load_classifier(tmp_path / "clf")
    assert back.metadata["target_attribute"] == "target"
    assert back.parameter_fingerprint() == trained.parameter_fingerprint()
    x = disc_ds.images[:4]
    assert np.allclose(back.predict_posterior(x), trained.predict_posterior(x))


def test_checkpoint_bad_manifest(tmp_path, trained):
    save_classifier(trained, tmp_path / "clf")
    manifest = (tmp_path / "clf" / "manifest.json")
    manifest.write_text(manifest.read_text().replace('"format_version": 1',
                                                     '"format_version": 99'))
    with pytest.raises(ContractError, match="format_version"):
        load_classifier(tmp_path / "clf")
