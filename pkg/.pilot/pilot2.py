import torch, numpy as np, time
torch.set_num_threads(2)
from cfgan.synthdata import SynthFactorSpec, generate_synthetic
from cfgan.blackbox import train_reference_classifier, ClassifierTrainConfig
from cfgan.trainer import TrainConfig, train_explainer, load_bundle
from cfgan.explain import sweep_many
from cfgan.evalsuite import compatibility_curve, self_consistency

t0 = time.time()
full = generate_synthetic(SynthFactorSpec(n_samples=5200, seed=0))
train = full.subset(np.arange(5000))
held = full.subset(np.arange(5000, 5200), split="test")
bb = train_reference_classifier(train, 'target', ClassifierTrainConfig(seed=0))
print('classifier acc', bb.metadata['validation_accuracy'], flush=True)

cfg = TrainConfig(total_steps=3500, seed=0, checkpoint_interval=500, g_lr=2e-4)
bundle = train_explainer(train, bb, cfg, out_dir='.pilot/run2')
print(f'trained in {time.time()-t0:.0f}s', flush=True)

import pathlib
for ckpt in sorted(pathlib.Path('.pilot/run2/checkpoints').iterdir()):
    b = load_bundle(ckpt)
    series = sweep_many(b, bb, held.images)
    comp = compatibility_curve(b, bb, held, series=series)
    print(f'{ckpt.name}: rho={comp.spearman_rho:.3f} dev={comp.mean_abs_deviation:.3f}', flush=True)
    if ckpt.name == 'step_0003500':
        print('  per-bin', np.round(comp.per_bin_mean, 3))
        sc = self_consistency(b, bb, held.subset(np.arange(50)), delta=0.3)
        print('  recon', round(sc.reconstruction_l1,4), 'cycle', round(sc.cycle_l1,4))
print(f'total {time.time()-t0:.0f}s')
