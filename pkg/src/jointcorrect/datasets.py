"""Synthetic Gaussian blobs, noisy-label datasets and the CSV format.

CSV layout: an optional ``# num_classes=C`` comment line, then the header
``f0,f1,...,f{d-1},label[,clean_label]`` and one example per row.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, FormatError, ParseError
from .noise import TransitionMatrix, apply_noise

_CLASSES_RE = re.compile(r"^#\s*num_classes\s*=\s*(\d+)\s*$")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass
class LabeledDataset:
    """Features with current, original-noisy and (optionally) clean labels.

    ``current_labels`` is the only mutable field; it starts as a copy of the
    noisy labels. ``clean_labels`` is for evaluation only.
    """

    features: np.ndarray
    current_labels: np.ndarray
    original_noisy_labels: np.ndarray
    clean_labels: np.ndarray | None
    num_classes: int

    def __post_init__(self):
        self.features = _frozen(self.features, np.float64)
        if self.features.ndim != 2:
            raise DimensionError(f"features must be a matrix, got shape {self.features.shape}")
        N = self.features.shape[0]
        self.original_noisy_labels = _frozen(self.original_noisy_labels, np.int64)
        self.current_labels = np.array(self.current_labels, dtype=np.int64, copy=True)
        if self.clean_labels is not None:
            self.clean_labels = _frozen(self.clean_labels, np.int64)
        for name in ("current_labels", "original_noisy_labels", "clean_labels"):
            lab = getattr(self, name)
            if lab is None:
                continue
            if lab.shape != (N,):
                raise DimensionError(f"{name} has shape {lab.shape}, expected ({N},)")
            if N and (lab.min() < 0 or lab.max() >= self.num_classes):
                raise IndexError(f"{name} outside [0, {self.num_classes})")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def label_accuracy(self) -> float | None:
        """Fraction of current labels equal to the clean ones, or None."""
        if self.clean_labels is None:
            return None
        if len(self) == 0:
            return None
        return float(np.mean(self.current_labels == self.clean_labels))

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(
            self.features, labels, self.original_noisy_labels, self.clean_labels, self.num_classes
        )

    def to_csv(self, path):
        save_csv(self, path)


def gen_gaussian_blobs(num_classes, per_class, dim, separation, spread, seed):
    """Isotropic Gaussian clusters, one per class.

    Centers are drawn from N(0, s^2 I) with s = separation / sqrt(2 * dim),
    so the expected distance between two centers is about ``separation``.
    Points are ``center + spread * N(0, I)``. Rows are grouped by class.
    """
    if num_classes < 2 or per_class < 1 or dim < 2:
        raise ConfigError("need num_classes >= 2, per_class >= 1 and dim >= 2")
    if separation <= 0 or spread < 0:
        raise ConfigError("separation must be positive and spread non-negative")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(num_classes, dim)) * (separation / np.sqrt(2.0 * dim))
    labels = np.repeat(np.arange(num_classes), per_class)
    features = centers[labels] + spread * rng.normal(size=(labels.size, dim))
    return features, labels.astype(np.int64)


def make_noisy_dataset(features, clean_labels, q: TransitionMatrix, seed) -> LabeledDataset:
    features = np.asarray(features, dtype=np.float64)
    clean = np.asarray(clean_labels, dtype=np.int64)
    if features.ndim != 2 or clean.shape != (features.shape[0],):
        raise DimensionError(
            f"{features.shape[0] if features.ndim else 0} feature rows vs {clean.shape} labels"
        )
    noisy = apply_noise(clean, q, seed)
    return LabeledDataset(features, noisy, noisy, clean, q.num_classes)


def save_csv(dataset: LabeledDataset, path):
    d = dataset.dim
    header = [f"f{j}" for j in range(d)] + ["label"]
    has_clean = dataset.clean_labels is not None
    if has_clean:
        header.append("clean_label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# num_classes={dataset.num_classes}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(dataset)):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(str(int(dataset.current_labels[i])))
            if has_clean:
                row.append(str(int(dataset.clean_labels[i])))
            writer.writerow(row)


def load_csv(path) -> LabeledDataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    declared = None
    pos = 0
    if lines and lines[0].startswith("#"):
        m = _CLASSES_RE.match(lines[0])
        if m is None:
            raise FormatError(f"unrecognized comment {lines[0]!r}", line=1)
        declared = int(m.group(1))
        pos = 1
    if pos >= len(lines):
        raise FormatError(f"{path.name}: missing header", line=pos + 1)

    header = next(csv.reader([lines[pos]]))
    header_line = pos + 1
    has_clean = header[-1] == "clean_label"
    n_feat = len(header) - (2 if has_clean else 1)
    expected = [f"f{j}" for j in range(n_feat)] + ["label"] + (["clean_label"] if has_clean else [])
    if n_feat < 1 or header != expected:
        raise FormatError(f"header must be f0,...,f{{d-1}},label[,clean_label]; got {header}", line=header_line)

    feats, labels, cleans = [], [], []
    for lineno, row in enumerate(csv.reader(lines[pos + 1:]), start=header_line + 1):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            feats.append([float(v) for v in row[:n_feat]])
            labels.append(int(row[n_feat]))
            if has_clean:
                cleans.append(int(row[n_feat + 1]))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        for lab in (labels[-1],) + ((cleans[-1],) if has_clean else ()):
            if lab < 0 or (declared is not None and lab >= declared):
                bound = declared if declared is not None else "inf"
                raise FormatError(f"label {lab} outside [0, {bound})", line=lineno)

    features = np.array(feats, dtype=np.float64).reshape(len(feats), n_feat)
    labels = np.array(labels, dtype=np.int64)
    clean = np.array(cleans, dtype=np.int64) if has_clean else None
    if declared is not None:
        C = declared
    else:
        C = int(max(labels.max(initial=-1), -1 if clean is None else clean.max(initial=-1))) + 1
    return LabeledDataset(features, labels, labels, clean, max(C, 2))


def split(dataset: LabeledDataset, test_fraction, seed):
    """Seeded shuffle split.

    Returns ``(train, (test_features, test_clean_labels))``. Train keeps
    its noisy labels; the test side uses the clean labels as targets.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if dataset.clean_labels is None:
        raise ConfigError("splitting needs clean labels to evaluate the test side")
    N = len(dataset)
    n_test = int(round(test_fraction * N))
    perm = np.random.default_rng(seed).permutation(N)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    train = LabeledDataset(
        dataset.features[train_idx],
        dataset.current_labels[train_idx],
        dataset.original_noisy_labels[train_idx],
        dataset.clean_labels[train_idx],
        dataset.num_classes,
    )
    test = (np.array(dataset.features[test_idx]), np.array(dataset.clean_labels[test_idx]))
    return train, test
