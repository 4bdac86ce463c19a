"""
Early versus late linearization
===============================

Starts the regularizer at different points of training on a 10-class
spirals task. Each run trains for the given number of epochs, then
linearizes to 80% inactive with the same budget. Networks that trained
longer with all nonlinearities keep more accuracy.

Takes about a minute per seed.

    python demos/03_late_vs_early.py [seeds]
"""

import sys

import numpy as np

from nonlinadv.harness import (
    ArchitectureSpec,
    DatasetSpec,
    ExperimentConfig,
    LinearizePhaseConfig,
    PhaseConfig,
    sweep,
)

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
grid = [0, 30, 60]

base = ExperimentConfig(
    name="late-vs-early",
    architecture=ArchitectureSpec(blocks=4, width=32),
    train=PhaseConfig(epochs=60, lr=0.1, milestones=(30, 45), batch_size=64),
    linearize=LinearizePhaseConfig(epochs=20, milestones=None, omega=0.03, target=0.8, batch_size=64),
    dataset=DatasetSpec(kind="spirals", classes=10, samples_per_class=200, noise=0.02, turns=1.5),
)

acc = {g: [] for g in grid}
for s in range(seeds):
    _, rows = sweep("linearize-at-epoch", grid, base.replace(**{"dataset.seed": s}), seeds=[s])
    for r in rows:
        acc[r["value"]].append(r["final_test_acc"])
    print(f"seed {s}:", "  ".join(f"start {r['value']:2d} -> {r['final_test_acc']:.3f}" for r in rows))

for g in grid:
    print(f"start at epoch {g:2d}: mean final test accuracy {np.mean(acc[g]):.3f}")
