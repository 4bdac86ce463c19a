"""Per-epoch experiment timelines and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

COLUMNS = ("epoch", "phase", "lr", "train_loss", "train_acc", "test_acc",
           "active_fraction", "enw", "apl", "napl", "omega")


def fmt(v):
    """Stable text form: repr for floats (round-trips exactly), str otherwise."""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class ExperimentRecord:
    rows: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def add(self, **row):
        missing = [c for c in COLUMNS if c not in row]
        if missing:
            raise ValueError(f"record row is missing {missing}")
        if self.rows and row["epoch"] <= self.rows[-1]["epoch"]:
            raise ValueError("epochs must be strictly increasing")
        self.rows.append({c: row[c] for c in COLUMNS})

    @property
    def last(self):
        return self.rows[-1]

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text, manifest=None):
        rec = cls(manifest=dict(manifest or {}))
        for r in csv.DictReader(io.StringIO(text)):
            row = {}
            for c in COLUMNS:
                v = r[c]
                row[c] = v if c == "phase" else (int(v) if c == "epoch" else float(v))
            rec.rows.append(row)
        return rec
