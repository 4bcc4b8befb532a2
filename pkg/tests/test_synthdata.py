import numpy as np
import pytest

from cfgan.synthdata import (DatasetError, FactorMeasurement, LabeledImageDataset,
                             SynthFactorSpec, generate_synthetic, load_dataset,
                             measure_factor, render_disc, save_dataset, split_dataset)


@pytest.fixture(scope="module")
def small_ds():
    return generate_synthetic(SynthFactorSpec(n_samples=60, seed=7))


def test_generate_deterministic(small_ds):
    again = generate_synthetic(SynthFactorSpec(n_samples=60, seed=7))
    assert np.array_equal(small_ds.images, again.images)
    for key in small_ds.attributes:
        assert np.array_equal(small_ds.attributes[key], again.attributes[key])


def test_generate_shapes_and_labels(small_ds):
    assert small_ds.images.shape == (60, 32, 32, 1)
    assert small_ds.images.min() >= 0.0 and small_ds.images.max() <= 1.0
    lo, hi = SynthFactorSpec().target_range
    mid = (lo + hi) / 2
    expected = (small_ds.factors["radius"] > mid).astype(np.uint8)
    assert np.array_equal(small_ds.attributes["target"], expected)


def test_fully_confounded_labels_identical():
    ds = generate_synthetic(SynthFactorSpec(n_samples=300, seed=3,
                                            correlation="fully-confounded"))
    assert np.array_equal(ds.attributes["target"], ds.attributes["confounder"])
    corr = np.corrcoef(ds.attributes["target"].astype(float),
                       ds.attributes["confounder"].astype(float))[0, 1]
    assert corr == pytest.approx(1.0)


def test_independent_labels_uncorrelated():
    ds = generate_synthetic(SynthFactorSpec(n_samples=10000, seed=11))
    corr = np.corrcoef(ds.attributes["target"].astype(float),
                       ds.attributes["confounder"].astype(float))[0, 1]
    assert abs(corr) < 0.05


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthFactorSpec(n_samples=0)
    with pytest.raises(ValueError):
        SynthFactorSpec(target_range=(5.0, 5.0))
    with pytest.raises(ValueError):
        SynthFactorSpec(correlation="sideways")


def test_measure_factor_round_trip():
    for r in (4.0, 8.0, 10.0):
        img = render_disc(32, r, (16.0, 16.0), background=0.2)
        m = measure_factor(img)
        assert m.disc_found
        assert m.radius == pytest.approx(r, abs=0.5)


def test_measure_factor_monotone():
    radii = np.linspace(4, 12, 9)
    measured = [measure_factor(render_disc(32, r, (16, 16), 0.1)).radius for r in radii]
    assert all(a < b for a, b in zip(measured, measured[1:]))


def test_measure_factor_no_disc():
    m = measure_factor(np.zeros((32, 32, 1)))
    assert m == FactorMeasurement(radius=0.0, disc_found=False)


def test_save_load_round_trip(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path)
    back = load_dataset(tmp_path)
    # first save quantizes to 8 bits; load(save(.)) is exact afterwards
    quantized = np.round(small_ds.images * 255) / 255
    assert np.allclose(back.images, quantized, atol=1e-7)
    assert np.array_equal(back.attributes["target"], small_ds.attributes["target"])
    assert np.allclose(back.factors["radius"], small_ds.factors["radius"])
    save_dataset(back, tmp_path / "again")
    twice = load_dataset(tmp_path / "again")
    assert np.array_equal(twice.images, back.images)


def test_load_dataset_small_csv(tmp_path):
    ds = generate_synthetic(SynthFactorSpec(n_samples=3, seed=1))
    save_dataset(ds, tmp_path)
    loaded = load_dataset(tmp_path)
    assert len(loaded) == 3
    assert set(loaded.attributes) == {"target", "confounder"}


def test_load_missing_attribute_file(tmp_path):
    with pytest.raises(DatasetError, match="missing attribute file"):
        load_dataset(tmp_path)


def test_load_empty_attribute_body(tmp_path):
    (tmp_path / "images").mkdir()
    (tmp_path / "attributes.csv").write_text("filename,target\n")
    with pytest.raises(DatasetError, match="no rows"):
        load_dataset(tmp_path)


def test_load_rejects_non_binary_cell(tmp_path):
    ds = generate_synthetic(SynthFactorSpec(n_samples=2, seed=1))
    save_dataset(ds, tmp_path)
    lines = (tmp_path / "attributes.csv").read_text().splitlines()
    lines[1] = lines[1].rsplit(",", 1)[0] + ",2"
    (tmp_path / "attributes.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError, match="row 1"):
        load_dataset(tmp_path)


def test_load_unreadable_image_strict_vs_lenient(tmp_path):
    ds = generate_synthetic(SynthFactorSpec(n_samples=3, seed=1))
    save_dataset(ds, tmp_path)
    (tmp_path / "images" / ds.filenames[1]).write_bytes(b"not a png")
    with pytest.raises(DatasetError, match="unreadable"):
        load_dataset(tmp_path, strict=True)
    with pytest.warns(UserWarning, match="skipping"):
        loaded = load_dataset(tmp_path, strict=False)
    assert len(loaded) == 2


def test_dataset_invariant_checks():
    imgs = np.zeros((2, 4, 4, 1), dtype=np.float32)
    with pytest.raises(DatasetError, match="0/1"):
        LabeledImageDataset(images=imgs, attributes={"a": np.array([0, 2])},
                            filenames=["x.png", "y.png"])
    with pytest.raises(DatasetError, match="outside"):
        LabeledImageDataset(images=imgs + 2.0, attributes={"a": np.array([0, 1])},
                            filenames=["x.png", "y.png"])


def test_split_dataset_proportions(small_ds):
    train, val, test = split_dataset(small_ds, (0.8, 0.1, 0.1), seed=0)
    assert len(train) == 48 and len(val) == 6 and len(test) == 6
    assert (train.split, val.split, test.split) == ("train", "val", "test")
    all_names = sorted(train.filenames + val.filenames + test.filenames)
    assert all_names == sorted(small_ds.filenames)
