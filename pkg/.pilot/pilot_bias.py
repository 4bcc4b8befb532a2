import torch, time
torch.set_num_threads(2)
from cfgan.experiments import run_bias_experiment
t0 = time.time()
art = run_bias_experiment(n_samples=3000, eval_queries=200, explainer_steps=1200, seed=0)
r = art.result
print('oracle acc', art.oracle.accuracy)
print('biased acc', art.classifier_biased.metadata['validation_accuracy'],
      'unbiased acc', art.classifier_unbiased.metadata['validation_accuracy'])
for cond in ('present', 'absent'):
    print(f'{cond}: biased={r.biased[cond].flip_fraction:.3f} unbiased={r.unbiased[cond].flip_fraction:.3f}')
    print('   biased class dist', r.biased[cond].class_distribution)
    print('   unbiased class dist', r.unbiased[cond].class_distribution)
print('overall ratio', r.ratio, f'({time.time()-t0:.0f}s)')
