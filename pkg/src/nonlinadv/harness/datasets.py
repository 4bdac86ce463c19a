"""Synthetic and file-backed classification datasets.

Spirals and Gaussian blobs stand in for image benchmarks of graded
difficulty: more classes and more spiral turns make the task harder.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidSpec

KINDS = ("spirals", "gaussian-blobs", "csv-file", "idx-images")


@dataclass
class DatasetSpec:
    kind: str = "spirals"
    classes: int = 3
    samples_per_class: int = 200
    noise: float = 0.0
    turns: float = 1.0
    overlap: float = 0.1
    test_fraction: float = 0.25
    seed: int = 0
    path: str | None = None
    label_path: str | None = None

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown dataset kind {self.kind!r}")
        if self.kind in ("spirals", "gaussian-blobs"):
            if self.classes < 2 or self.samples_per_class < 2:
                raise InvalidSpec("need >= 2 classes and >= 2 samples per class")
            if self.noise < 0 or self.overlap < 0:
                raise InvalidSpec("noise and overlap must be non-negative")
        elif self.path is None:
            raise InvalidSpec(f"{self.kind} needs a path")
        if not 0 < self.test_fraction < 1:
            raise InvalidSpec("test_fraction must lie in (0, 1)")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    classes: int

    @property
    def input_shape(self):
        return tuple(self.x_train.shape[1:])


def spirals(classes, samples_per_class, turns=1.0, noise=0.0, rng=None):
    """Interleaved spiral arms, one per class, in the plane."""
    rng = np.random.default_rng(0) if rng is None else rng
    r = np.linspace(0.05, 1.0, samples_per_class)
    xs, ys = [], []
    for c in range(classes):
        theta = 2 * np.pi * turns * r + 2 * np.pi * c / classes
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        xs.append(pts + noise * rng.standard_normal(pts.shape))
        ys.append(np.full(samples_per_class, c))
    return np.concatenate(xs), np.concatenate(ys)


def gaussian_blobs(classes, samples_per_class, overlap=0.1, rng=None, dim=2):
    """Isotropic blobs with centers on a circle; ``overlap`` is the blob
    standard deviation relative to the distance between neighboring centers."""
    rng = np.random.default_rng(0) if rng is None else rng
    angles = 2 * np.pi * np.arange(classes) / classes
    centers = np.zeros((classes, dim))
    centers[:, 0], centers[:, 1] = np.cos(angles), np.sin(angles)
    spacing = 2 * np.sin(np.pi / classes)
    xs, ys = [], []
    for c in range(classes):
        xs.append(centers[c] + overlap * spacing * rng.standard_normal((samples_per_class, dim)))
        ys.append(np.full(samples_per_class, c))
    return np.concatenate(xs), np.concatenate(ys)


def load_csv(path):
    """Comma-separated numeric rows, label in the last column. A header row
    is skipped if it does not parse as numbers."""
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    try:
        [float(v) for v in lines[0].split(",")]
    except ValueError:
        lines = lines[1:]
    arr = np.array([[float(v) for v in l.split(",")] for l in lines])
    return arr[:, :-1], arr[:, -1].astype(np.int64)


_IDX_TYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def load_idx(path):
    """Read an IDX file (magic 0x0000, type byte, rank byte, big-endian dims)."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise InvalidSpec(f"{path}: bad IDX magic number")
    dtype, ndim = raw[2], raw[3]
    if dtype not in _IDX_TYPES:
        raise InvalidSpec(f"{path}: unknown IDX element type 0x{dtype:02x}")
    dims = struct.unpack(">" + "I" * ndim, raw[4:4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=_IDX_TYPES[dtype], offset=4 + 4 * ndim)
    if data.size != int(np.prod(dims)):
        raise InvalidSpec(f"{path}: IDX payload does not match header dims {dims}")
    return data.reshape(dims).astype(np.float64 if dtype >= 0x0D else np.int64)


def write_idx(path, array):
    array = np.asarray(array)
    code = {np.dtype("uint8"): 0x08, np.dtype("int8"): 0x09, np.dtype("int16"): 0x0B,
            np.dtype("int32"): 0x0C, np.dtype("float32"): 0x0D, np.dtype("float64"): 0x0E}[array.dtype]
    header = bytes([0, 0, code, array.ndim]) + struct.pack(">" + "I" * array.ndim, *array.shape)
    Path(path).write_bytes(header + array.astype(array.dtype.newbyteorder(">")).tobytes())


def _split(x, y, test_fraction, rng):
    """Stratified split: each class contributes the same test share."""
    train_idx, test_idx = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        n_test = max(1, int(round(len(idx) * test_fraction)))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    tr, te = np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))
    return x[tr], y[tr], x[te], y[te]


def gen_dataset(spec: DatasetSpec) -> Dataset:
    """Deterministically build and split a dataset; features are standardized
    with training-set statistics."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "spirals":
        x, y = spirals(spec.classes, spec.samples_per_class, spec.turns, spec.noise, rng)
    elif spec.kind == "gaussian-blobs":
        x, y = gaussian_blobs(spec.classes, spec.samples_per_class, spec.overlap, rng)
    elif spec.kind == "csv-file":
        x, y = load_csv(spec.path)
    else:
        if spec.label_path is None:
            raise InvalidSpec("idx-images needs label_path")
        x = load_idx(spec.path).astype(np.float64)
        y = load_idx(spec.label_path).astype(np.int64).ravel()
        if x.ndim == 3:
            x = x[:, None]
        if len(x) != len(y):
            raise InvalidSpec("image and label counts differ")
    classes = int(y.max()) + 1
    xtr, ytr, xte, yte = _split(x, y, spec.test_fraction, rng)
    axes = (0,) if xtr.ndim == 2 else (0, 2, 3)
    mean = xtr.mean(axis=axes, keepdims=True)
    std = xtr.std(axis=axes, keepdims=True)
    std[std == 0] = 1.0
    return Dataset((xtr - mean) / std, ytr, (xte - mean) / std, yte, classes)
