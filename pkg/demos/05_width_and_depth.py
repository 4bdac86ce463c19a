"""
Width and depth under a fixed regularization weight
===================================================

With a free-running regularizer, wider networks end with a lower active
fraction but about the same number of active units per layer (ENW).
Deeper networks settle at similar NAPL values.

    python demos/05_width_and_depth.py [out_dir]
"""

import sys
from pathlib import Path

from nonlinadv.harness import desk_config, emit_report, sweep

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/width_depth")
cfg = desk_config(seed=0, **{"linearize.omega": 0.02})

points, rows = sweep("width", [0.5, 1, 2], cfg, out_dir=out / "width")
print("width factor | active fraction | 1/active | ENW")
for r in rows:
    print(f"{r['value']:12} | {r['final_active_fraction']:15.3f} | {r['inverse_active_fraction']:8.2f} | {r['final_enw']:.2f}")
emit_report([p.record for p in points], out / "width_report", summary_rows=rows)

points, rows = sweep("depth", [2, 4, 6], cfg, out_dir=out / "depth")
print("blocks | NAPL | test acc")
for r in rows:
    print(f"{r['value']:6} | {r['final_napl']:.3f} | {r['final_test_acc']:.3f}")
emit_report([p.record for p in points], out / "depth_report", summary_rows=rows)
