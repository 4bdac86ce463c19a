"""
Transferring a linearization mask
=================================

Linearizes a network, then retrains fresh networks with the learned mask
as is, shuffled within each layer, and shuffled across the whole network.
All three keep the same number of active units.

    python demos/04_mask_transfer.py [out_dir]
"""

import sys
from pathlib import Path

from nonlinadv.harness import desk_config, gen_dataset, run_experiment
from nonlinadv.transfer import comparison_csv, extract_mask, retrain_compare, save_mask

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/transfer")
out.mkdir(parents=True, exist_ok=True)

cfg = desk_config(seed=1, **{"linearize.target": 0.8})
data = gen_dataset(cfg.dataset)
res = run_experiment(cfg, data=data)
mask = extract_mask(res.state, res.net)
save_mask(mask, out / "mask.json")
print(f"learned mask keeps {mask.active_count}/{mask.total} units active:")
print(*mask.to_strings(), sep="\n  ")

arch = cfg.architecture.build_config(data.input_shape, data.classes)
rows, summary = retrain_compare(mask, arch, data, cfg.train, seeds=3,
                                linearized_accuracy=res.record.last["test_acc"])
(out / "permute_retrain.csv").write_text(comparison_csv(rows))

print(f"linearized network: test acc {res.record.last['test_acc']:.3f}")
for mode, s in summary["modes"].items():
    print(f"{mode:>9}: {s['mean']:.3f} +- {s['std']:.3f} over {s['n']} retrains")
