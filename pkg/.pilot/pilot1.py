import torch, numpy as np, time, json
torch.set_num_threads(2)
from cfgan.synthdata import SynthFactorSpec, generate_synthetic, split_dataset
from cfgan.blackbox import train_reference_classifier, ClassifierTrainConfig
from cfgan.trainer import TrainConfig, train_explainer, save_bundle
from cfgan.explain import sweep_many
from cfgan.evalsuite import compatibility_curve, self_consistency

t0 = time.time()
full = generate_synthetic(SynthFactorSpec(n_samples=5200, seed=0))
train = full.subset(np.arange(5000))
held = full.subset(np.arange(5000, 5200), split="test")
bb = train_reference_classifier(train, 'target', ClassifierTrainConfig(seed=0))
print('classifier acc', bb.metadata['validation_accuracy'], f'{time.time()-t0:.0f}s', flush=True)

cfg = TrainConfig(total_steps=2000, seed=0, checkpoint_interval=500)
bundle = train_explainer(train, bb, cfg, out_dir='.pilot/run1')
print(f'trained in {time.time()-t0:.0f}s', flush=True)

series = sweep_many(bundle, bb, held.images)
comp = compatibility_curve(bundle, bb, held, series=series)
print('spearman rho', comp.spearman_rho)
print('mean abs deviation', comp.mean_abs_deviation)
print('per-bin mean', np.round(comp.per_bin_mean, 3))
sc = self_consistency(bundle, bb, held.subset(np.arange(50)), delta=0.3)
print('recon L1', sc.reconstruction_l1, 'cycle L1', sc.cycle_l1)
print(f'total {time.time()-t0:.0f}s')
