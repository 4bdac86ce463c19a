"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import yaml

from ..errors import InvalidSpec, OracleMismatch
from ..metrics import structure_metrics
from ..pathgraph import (
    NORMALIZED,
    UNNORMALIZED,
    apl,
    load_dag,
    max_effective_depth,
    sink_histogram,
)
from ..records import ExperimentRecord
from ..tensornet.checkpoint import load_checkpoint
from ..tensornet.export import CHANNEL, NEURON, network_mask, network_to_dag
from ..transfer import MODES, apply_mask, comparison_csv, load_mask, retrain_compare
from .config import desk_config, load_config
from .datasets import gen_dataset
from .experiment import run_experiment, run_linearize_only, run_train_only
from .oracle_check import oracle_check
from .report import emit_report
from .sweep import SWEEP_KINDS, summary_csv, sweep

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_ORACLE = 0, 1, 2, 3
REPORT_FORMATS = {"csv": "csv", "json": "json-manifest", "svg": "svg-lines"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p, config=True):
    if config:
        p.add_argument("--config", help="experiment config (YAML or JSON)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes (sweeps)")
    p.add_argument("--format", choices=("csv", "json", "svg"), action="append",
                   help="output format; may be repeated")


def build_parser():
    ap = _Parser(prog="nonlinadv", description="Path-length analysis and PReLU linearization.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="training phase then linearization phase")
    _common(p)
    p = sub.add_parser("train", help="conventional training phase only")
    _common(p)
    p = sub.add_parser("linearize", help="linearization phase on a saved checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("analyze", help="histogram/APL/NAPL/ENW of a graph file or checkpoint")
    _common(p, config=False)
    p.add_argument("path", help="graph .json or checkpoint .npz")
    p.add_argument("--mask", help="mask file applied to a checkpoint")
    p.add_argument("--granularity", choices=(CHANNEL, NEURON), default=CHANNEL)

    p = sub.add_parser("permute-retrain", help="retrain fresh networks under a transferred mask")
    _common(p)
    p.add_argument("--mask", required=True)
    p.add_argument("--modes", default=",".join(MODES), help="comma-separated subset of exact,layerwise,global")
    p.add_argument("--seeds", type=int, default=5, help="retraining runs per mode")

    p = sub.add_parser("sweep", help="grid sweep over one experimental variable")
    _common(p)
    p.add_argument("--kind", required=True, choices=SWEEP_KINDS)
    p.add_argument("--grid", required=True, help="comma-separated grid values")
    p.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    p.add_argument("--omega-override", action="append", default=[], metavar="VALUE=OMEGA",
                   help="per-grid-point regularization weight")

    p = sub.add_parser("report", help="CSV/JSON/SVG report of finished runs")
    _common(p, config=False)
    p.add_argument("runs", nargs="+", help="run or sweep output directories")

    p = sub.add_parser("oracle-check", help="cross-check the histogram recursion")
    _common(p, config=False)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-nodes", type=int, default=14)
    return ap


def _config(args):
    cfg = load_config(args.config) if args.config else desk_config()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    changes["threads"] = args.threads
    return cfg.replace(**changes).validate()


def _emit(doc, fmt):
    if fmt == "csv" and isinstance(doc, dict):
        w = csv.writer(sys.stdout, lineterminator="\n")
        flat = {k: v for k, v in doc.items() if not isinstance(v, (dict, list))}
        w.writerow(flat.keys())
        w.writerow(flat.values())
    else:
        print(json.dumps(doc, indent=1, sort_keys=True, default=str))


def _fmt(args, default="json"):
    return (args.format or [default])[0]


def _run_summary(res):
    last = res.record.last
    return {"epochs": last["epoch"], "test_acc": last["test_acc"], "active_fraction": last["active_fraction"],
            "enw": last["enw"], "apl": last["apl"], "napl": last["napl"],
            "controller": res.record.manifest.get("controller")}


def cmd_run(args):
    cfg = _config(args)
    _emit(_run_summary(run_experiment(cfg)), _fmt(args))


def cmd_train(args):
    cfg = _config(args)
    _emit(_run_summary(run_train_only(cfg, cfg.out_dir)), _fmt(args))


def cmd_linearize(args):
    cfg = _config(args)
    _emit(_run_summary(run_linearize_only(cfg, args.checkpoint, cfg.out_dir)), _fmt(args))


def _histogram_doc(dag):
    doc = {}
    for mode in (UNNORMALIZED, NORMALIZED):
        h = sink_histogram(dag, mode)
        doc[f"{mode}_histogram"] = h.to_records()
    doc["apl"] = apl(sink_histogram(dag, UNNORMALIZED))
    doc["napl"] = apl(sink_histogram(dag, NORMALIZED))
    doc["max_effective_depth"] = max_effective_depth(dag)
    return doc


def cmd_analyze(args):
    path = Path(args.path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.suffix == ".npz":
        net, _ = load_checkpoint(path)
        if args.mask:
            apply_mask(net, load_mask(args.mask))
        dag = network_to_dag(net, network_mask(net), args.granularity)
        doc = _histogram_doc(dag)
        doc.update({k: v for k, v in structure_metrics(net, granularity=args.granularity).items()
                    if k in ("enw", "active_fraction")})
    else:
        if args.mask:
            raise InvalidSpec("--mask applies to checkpoints only")
        doc = _histogram_doc(load_dag(path))
    _emit(doc, _fmt(args))


def cmd_permute_retrain(args):
    cfg = _config(args)
    mask = load_mask(args.mask)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if not modes or set(modes) - set(MODES):
        raise InvalidSpec(f"modes must be drawn from {MODES}")
    data = gen_dataset(cfg.dataset)
    arch = cfg.architecture.build_config(data.input_shape, data.classes)
    rows, summary = retrain_compare(mask, arch, data, cfg.train, modes, args.seeds, cfg.seed)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "permute_retrain.csv").write_text(comparison_csv(rows))
        (out / "permute_retrain.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    if _fmt(args) == "csv":
        sys.stdout.write(comparison_csv(rows))
    else:
        _emit(summary, "json")


def _number(s):
    v = float(s)
    return int(v) if v.is_integer() and "." not in s else v


def cmd_sweep(args):
    cfg = _config(args)
    grid = [_number(v) for v in args.grid.split(",") if v.strip()]
    seeds = None if not args.seeds else [int(s) for s in args.seeds.split(",")]
    overrides = {}
    for item in args.omega_override:
        key, sep, val = item.partition("=")
        if not sep:
            raise InvalidSpec(f"--omega-override expects VALUE=OMEGA, got {item!r}")
        overrides[_number(key)] = float(val)
    points, rows = sweep(args.kind, grid, cfg, seeds, cfg.out_dir, cfg.threads, overrides)
    sys.stdout.write(summary_csv(rows))
    if not any(p.ok for p in points):
        raise RuntimeError("every sweep point failed")


def _load_run(d):
    rec = ExperimentRecord.from_csv((d / "metrics.csv").read_text())
    mpath = d / "manifest.json"
    if mpath.exists():
        rec.manifest = json.loads(mpath.read_text())
    rec.manifest.setdefault("label", d.name)
    return rec


def cmd_report(args):
    if not args.out:
        raise InvalidSpec("report needs --out")
    records, summary = [], None
    for run in args.runs:
        d = Path(run)
        if not d.is_dir():
            raise FileNotFoundError(d)
        if (d / "metrics.csv").exists():
            records.append(_load_run(d))
        else:
            records += [_load_run(s) for s in sorted(d.iterdir()) if (s / "metrics.csv").exists()]
        if (d / "summary.csv").exists():
            with open(d / "summary.csv", newline="") as fh:
                summary = list(csv.DictReader(fh))
    formats = [REPORT_FORMATS[f] for f in (args.format or ["csv", "json", "svg"])]
    for path in emit_report(records, args.out, formats, summary):
        print(path)


def cmd_oracle_check(args):
    report = oracle_check(args.trials, args.max_nodes, 0 if args.seed is None else args.seed)
    report.pop("fixtures", None)
    _emit(report, _fmt(args))


COMMANDS = {"run": cmd_run, "train": cmd_train, "linearize": cmd_linearize, "analyze": cmd_analyze,
            "permute-retrain": cmd_permute_retrain, "sweep": cmd_sweep, "report": cmd_report,
            "oracle-check": cmd_oracle_check}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        COMMANDS[args.command](args)
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        if exc.counterexample is not None:
            print(json.dumps(exc.counterexample, default=str), file=sys.stderr)
        return EXIT_ORACLE
    except (InvalidSpec, ValueError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
