import numpy as np, torch, time
torch.set_num_threads(2)
from cfgan.synthdata import SynthFactorSpec, generate_synthetic, measure_factor
from cfgan.blackbox import train_reference_classifier, ClassifierTrainConfig
from cfgan.trainer import load_bundle
from cfgan.explain import sweep_many, saliency_from_extremes
from cfgan.evalsuite import (measurement_correlation, pixel_flip_curve,
                             latent_space_closeness, data_consistency_fid,
                             identity_verification)

full = generate_synthetic(SynthFactorSpec(n_samples=5200, seed=0))
train = full.subset(np.arange(5000))
held = full.subset(np.arange(5000, 5200), split="test")
bb = train_reference_classifier(train, 'target', ClassifierTrainConfig(seed=0))
bundle = load_bundle('.pilot/run2/bundle')
series = sweep_many(bundle, bb, held.images)

res = measurement_correlation(bundle, bb, measure_factor, held, series=series)
print('pearson r', round(res.pearson_r, 4))
for name, t in res.paired_tests.items():
    print('  paired', name, 'p =', t['p_value'])
for name, t in res.two_sample_tests.items():
    print('  two-sample', name, 'p =', t['p_value'])
print('  groups', {k: (None if v['mean'] is None else round(v['mean'],2), v['n']) for k,v in res.group_means.items()})

maps = [saliency_from_extremes(bundle, bb, x) for x in held.images]
pf = pixel_flip_curve(maps, held, bb, 'target', seed=0)
print('pixel flip base acc', pf.base_accuracy)
print('  saliency ', np.round(pf.accuracy, 3))
print('  random   ', np.round(pf.random_accuracy, 3))
print('  mean gap ', round(pf.mean_gap(), 4))

sub = held.subset(np.arange(50))
print('closeness', latent_space_closeness(bundle, bb, sub))
fid_res = data_consistency_fid(bundle, bb, held, series=series)
print('fid', fid_res.present, fid_res.absent, fid_res.overall)
emb = lambda im: bundle.embed_images(im, pooling='mean')
idv = identity_verification(emb, held.images, np.stack([s.images[-1] for s in series]))
print('identity', round(idv.mean_distance,4), idv.accuracy)
