"""Grid sweeps over start epoch, regularization weight, width and depth.

Every grid point is an independent run with its own seeded generator and
output directory, so points can run in any order or on a process pool.
A failing point is recorded in the summary and the sweep carries on.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidSpec
from ..records import ExperimentRecord, fmt
from .config import ExperimentConfig
from .experiment import run_experiment

SWEEP_KINDS = ("linearize-at-epoch", "omega", "width", "depth")
DEFAULT_TARGET = 0.80

SUMMARY_COLUMNS = ("kind", "value", "seed", "status", "final_test_acc", "final_active_fraction",
                   "inverse_active_fraction", "final_enw", "final_apl", "final_napl",
                   "final_omega", "converged", "error")


@dataclass
class SweepPoint:
    kind: str
    value: float
    seed: int
    record: ExperimentRecord | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def point_config(kind, value, config: ExperimentConfig, seed, omega_overrides=None):
    """Config of one grid point."""
    changes = {"seed": seed}
    if kind == "linearize-at-epoch":
        changes["linearize_at_epoch"] = int(value)
        if config.linearize.target is None:
            changes["linearize.target"] = DEFAULT_TARGET
    elif kind == "omega":
        changes["linearize.omega"] = float(value)
        changes["linearize.target"] = None
    elif kind == "width":
        changes["architecture.width_factor"] = float(value)
    elif kind == "depth":
        changes["architecture.blocks"] = int(value)
    else:
        raise InvalidSpec(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    if omega_overrides and value in omega_overrides:
        changes["linearize.omega"] = float(omega_overrides[value])
    return config.replace(**changes).validate()


def _run_point(args):
    kind, value, seed, cfg, out = args
    try:
        res = run_experiment(cfg, out_dir=out)
        return SweepPoint(kind, value, seed, res.record)
    except Exception as exc:  # recorded, not fatal
        return SweepPoint(kind, value, seed, None, f"{type(exc).__name__}: {exc}")


def sweep(kind, grid, config: ExperimentConfig, seeds=None, out_dir=None, workers=1,
          omega_overrides=None):
    """Run every (grid value, seed) pair; returns ``(points, summary_rows)``.

    ``omega_overrides`` maps grid values to a per-point regularization
    weight. Summary CSV and per-point outputs go under ``out_dir``.
    """
    grid = list(grid)
    if not grid:
        raise InvalidSpec("sweep grid is empty")
    if kind not in SWEEP_KINDS:
        raise InvalidSpec(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    seeds = [config.seed] if seeds is None else list(seeds)
    jobs = []
    for value in grid:
        for seed in seeds:
            cfg = point_config(kind, value, config, seed, omega_overrides)
            out = None if out_dir is None else Path(out_dir) / f"{kind}_{value}_s{seed}"
            jobs.append((kind, value, seed, cfg, out))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_run_point, jobs))
    else:
        points = [_run_point(j) for j in jobs]
    rows = summarize(points)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "summary.csv").write_text(summary_csv(rows))
    return points, rows


def summarize(points):
    """One summary row per point, computed from its record alone."""
    rows = []
    for p in points:
        row = dict.fromkeys(SUMMARY_COLUMNS, "")
        row.update(kind=p.kind, value=p.value, seed=p.seed)
        if not p.ok:
            row.update(status="failed", error=p.error)
        else:
            last = p.record.last
            frac = last["active_fraction"]
            ctl = p.record.manifest.get("controller")
            row.update(status="ok", final_test_acc=last["test_acc"],
                       final_active_fraction=frac,
                       inverse_active_fraction=1.0 / frac if frac else float("inf"),
                       final_enw=last["enw"], final_apl=last["apl"], final_napl=last["napl"],
                       final_omega=last["omega"],
                       converged="" if ctl is None else ctl["converged"])
        rows.append(row)
    return rows


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()
