"""Dataset file I/O: sparse LibSVM text and dense CSV.

LibSVM lines look like ``label idx:val idx:val ...`` with 1-based feature
indices; ``#`` starts a comment.  Values are written with full precision
(repr), so parse -> serialize -> parse is a fixed point.
"""
from __future__ import annotations

import numpy as np

from .errors import DataFormatError
from .learner import LabeledDataset


def parse_libsvm(path, n_features: int | None = None) -> LabeledDataset:
    labels = []
    rows = []
    max_idx = 0
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                if label != int(label):
                    raise ValueError("non-integer label")
                entries = []
                for tok in parts[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError(f"feature index {idx} must be >= 1")
                    entries.append((idx, float(val_s)))
            except ValueError as e:
                raise DataFormatError(f"{path}: line {ln}: {e}") from None
            labels.append(int(label))
            rows.append(entries)
            if entries:
                max_idx = max(max_idx, max(i for i, _ in entries))
    d = n_features if n_features is not None else max_idx
    points = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for idx, val in entries:
            if idx > d:
                raise DataFormatError(
                    f"{path}: feature index {idx} exceeds declared dimension {d}"
                )
            points[r, idx - 1] = val
    if len(rows) == 0:
        points = points.reshape(0, d if d else 0)
    return LabeledDataset(points, np.asarray(labels, dtype=np.int64))


def write_libsvm(path, data: LabeledDataset) -> None:
    with open(path, "w") as fh:
        for x, y in zip(data.points, data.labels):
            toks = [str(int(y))]
            toks += [f"{j + 1}:{repr(float(v))}" for j, v in enumerate(x) if v != 0.0]
            fh.write(" ".join(toks) + "\n")


def parse_csv(path) -> LabeledDataset:
    """Dense rows ``label,x1,...,xd``; a non-numeric first row is skipped
    as a header."""
    labels = []
    rows = []
    width = None
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if ln == 1:
                    continue  # header
                raise DataFormatError(
                    f"{path}: line {ln}: non-numeric field"
                ) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataFormatError(
                    f"{path}: line {ln}: expected {width} fields, got {len(values)}"
                )
            if values[0] != int(values[0]):
                raise DataFormatError(f"{path}: line {ln}: non-integer label")
            labels.append(int(values[0]))
            rows.append(values[1:])
    if not rows:
        return LabeledDataset(np.zeros((0, 0)), np.zeros(0, dtype=np.int64))
    return LabeledDataset(np.asarray(rows), np.asarray(labels, dtype=np.int64))


def write_csv(path, data: LabeledDataset) -> None:
    with open(path, "w") as fh:
        for x, y in zip(data.points, data.labels):
            fh.write(",".join([str(int(y))] + [repr(float(v)) for v in x]) + "\n")


def load_dataset(path, fmt: str = "libsvm") -> LabeledDataset:
    if fmt == "libsvm":
        return parse_libsvm(path)
    if fmt == "csv":
        return parse_csv(path)
    raise ValueError(f"unknown format {fmt!r}")
