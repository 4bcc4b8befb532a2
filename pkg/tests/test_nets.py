import numpy as np
import pytest
import torch

from cfgan.nets import (ArchitectureConfig, ConditionalBatchNorm2d,
                        ConditionalGenerator, Encoder, ProjectionDiscriminator,
                        ShapeError, count_parameters)

N_BINS = 10


@pytest.fixture(scope="module")
def arch():
    return ArchitectureConfig(image_shape=(1, 16, 16), base_width=8, blocks=2,
                              channel_multipliers=(1, 2), disc_width=8, disc_blocks=2,
                              disc_channel_multipliers=(1, 2))


@pytest.fixture(scope="module")
def nets(arch):
    torch.manual_seed(0)
    e = Encoder(arch).eval()
    g = ConditionalGenerator(arch, N_BINS).eval()
    d = ProjectionDiscriminator(arch, N_BINS).eval()
    return e, g, d


def test_config_validation():
    with pytest.raises(ValueError, match="divisible"):
        ArchitectureConfig(image_shape=(1, 30, 30))
    with pytest.raises(ValueError, match="multipliers"):
        ArchitectureConfig(blocks=2, channel_multipliers=(1, 2, 2))


def test_latent_shape(arch, nets):
    e, _, _ = nets
    x = torch.rand(3, 1, 16, 16)
    z = e(x)
    assert tuple(z.shape) == (3,) + arch.latent_shape
    assert torch.isfinite(z).all()


def test_encode_deterministic(nets):
    e, _, _ = nets
    x = torch.rand(2, 1, 16, 16)
    assert torch.equal(e(x), e(x))


def test_encode_batch_matches_single(nets):
    e, _, _ = nets
    x = torch.rand(4, 1, 16, 16)
    batched = e(x)
    singles = torch.cat([e(x[i:i + 1]) for i in range(4)])
    assert torch.allclose(batched, singles, atol=1e-6)


def test_encode_rejects_nan(nets):
    e, _, _ = nets
    x = torch.full((1, 1, 16, 16), float("nan"))
    with pytest.raises(ShapeError, match="non-finite"):
        e(x)


def test_encode_rejects_wrong_shape(nets):
    e, _, _ = nets
    with pytest.raises(ShapeError):
        e(torch.rand(1, 1, 8, 8))


def test_generate_range_and_shape(arch, nets):
    _, g, _ = nets
    z = torch.randn(5, *arch.latent_shape)
    img = g(z, torch.randint(0, N_BINS, (5,)))
    assert tuple(img.shape) == (5, 1, 16, 16)
    assert float(img.min()) >= 0.0 and float(img.max()) <= 1.0


def test_generate_deterministic(arch, nets):
    _, g, _ = nets
    z = torch.randn(2, *arch.latent_shape)
    k = torch.tensor([1, 7])
    assert torch.equal(g(z, k), g(z, k))


def test_generate_rejects_bad_bin(arch, nets):
    _, g, _ = nets
    z = torch.randn(1, *arch.latent_shape)
    with pytest.raises(ShapeError, match="bin index"):
        g(z, torch.tensor([N_BINS]))
    with pytest.raises(ShapeError, match="bin index"):
        g(z, torch.tensor([-1]))


def test_condition_path_isolation(arch):
    # zeroing every condition embedding removes all dependence on k
    torch.manual_seed(1)
    g = ConditionalGenerator(arch, N_BINS).eval()
    with torch.no_grad():
        for m in g.modules():
            if isinstance(m, ConditionalBatchNorm2d):
                m.embed.weight.zero_()
    z = torch.randn(3, *arch.latent_shape)
    assert torch.equal(g(z, torch.tensor([0, 0, 0])), g(z, torch.tensor([9, 5, 2])))


def test_ordinal_ratio_zero_at_k0(nets):
    _, _, d = nets
    phi = torch.randn(4, d.feature_dim)
    assert torch.equal(d.ordinal_ratio(phi, torch.zeros(4, dtype=torch.long)),
                       torch.zeros(4))


def test_ordinal_ratio_all_ones():
    arch = ArchitectureConfig(image_shape=(1, 16, 16), base_width=8, blocks=2,
                              channel_multipliers=(1, 2), disc_width=8, disc_blocks=2,
                              disc_channel_multipliers=(1, 2))
    d = ProjectionDiscriminator(arch, N_BINS)
    with torch.no_grad():
        d.ordinal.fill_(0.0)
        d.ordinal[:, 0] = 1.0
    phi = torch.zeros(1, d.feature_dim)
    phi[0, 0] = 1.0
    # all inner products are 1, so r(k=3) telescopes to 3
    assert float(d.ordinal_ratio(phi, torch.tensor([3]))) == pytest.approx(3.0)


def test_telescoping_identity(nets):
    _, _, d = nets
    torch.manual_seed(2)
    phi = torch.randn(6, d.feature_dim, dtype=torch.double)
    d64 = d.double()
    for k in range(N_BINS - 1):
        kk = torch.full((6,), k)
        lhs = d64.ordinal_ratio(phi, kk + 1) - d64.ordinal_ratio(phi, kk)
        rhs = phi @ d64.ordinal[k]
        assert torch.allclose(lhs, rhs, atol=1e-6)
    d.float()


def test_discriminate_psi_cancels(nets):
    _, _, d = nets
    x = torch.rand(3, 1, 16, 16)
    k = torch.tensor([4, 7, 2])
    diff = d(x, k) - d(x, torch.zeros(3, dtype=torch.long))
    assert torch.allclose(diff, d.ordinal_ratio(d.features(x), k), atol=1e-5)


def test_discriminate_finite_on_random(nets):
    _, _, d = nets
    scores = d(torch.rand(8, 1, 16, 16), torch.randint(0, N_BINS, (8,)))
    assert torch.isfinite(scores).all()


def test_zeroed_ordinal_vectors_condition_independent(arch):
    torch.manual_seed(3)
    d = ProjectionDiscriminator(arch, N_BINS).eval()
    with torch.no_grad():
        d.ordinal.zero_()
    x = torch.rand(2, 1, 16, 16)
    assert torch.equal(d(x, torch.tensor([0, 0])), d(x, torch.tensor([9, 9])))


def test_ordinal_vector_count(nets):
    _, _, d = nets
    assert d.ordinal.shape == (N_BINS - 1, d.feature_dim)


def test_parameter_counts_are_config_pure(arch):
    torch.manual_seed(0)
    counts_a = [count_parameters(m) for m in
                (Encoder(arch), ConditionalGenerator(arch, N_BINS),
                 ProjectionDiscriminator(arch, N_BINS))]
    torch.manual_seed(99)
    counts_b = [count_parameters(m) for m in
                (Encoder(arch), ConditionalGenerator(arch, N_BINS),
                 ProjectionDiscriminator(arch, N_BINS))]
    assert counts_a == counts_b
    # golden shapes for this config
    assert counts_a == [4960, 3937, 5041]


def test_spectral_norm_flag(arch):
    d = ProjectionDiscriminator(arch, N_BINS)
    assert any("parametrizations" in name for name, _ in d.named_modules())
    plain_arch = ArchitectureConfig(image_shape=(1, 16, 16), base_width=8, blocks=2,
                                    channel_multipliers=(1, 2), disc_width=8,
                                    disc_blocks=2, disc_channel_multipliers=(1, 2),
                                    use_spectral_norm=False)
    d_plain = ProjectionDiscriminator(plain_arch, N_BINS)
    assert not any("parametrizations" in name for name, _ in d_plain.named_modules())
