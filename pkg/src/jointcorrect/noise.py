"""Label transition matrices and label corruption.

``q[i, j]`` is the probability that an example of clean class ``i`` is
observed with label ``j``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

ROW_TOL = 1e-9

# Class order of CIFAR-10.
CIFAR10_CLASSES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)


def _idx(name):
    return CIFAR10_CLASSES.index(name)


# truck -> automobile, deer -> horse, bird -> airplane, cat <-> dog
CIFAR10_PAIRS = (
    (_idx("truck"), _idx("automobile")),
    (_idx("deer"), _idx("horse")),
    (_idx("bird"), _idx("airplane")),
    (_idx("cat"), _idx("dog")),
    (_idx("dog"), _idx("cat")),
)


@dataclass
class TransitionMatrix:
    q: np.ndarray
    tau: float

    @property
    def num_classes(self) -> int:
        return self.q.shape[0]

    def flip_mass(self) -> float:
        """Expected fraction of flipped labels under uniform class priors."""
        return float(1.0 - np.trace(self.q) / self.num_classes)

    def is_row_stochastic(self, tol=ROW_TOL) -> bool:
        return bool(
            np.all(self.q >= 0) and np.all(self.q <= 1)
            and np.all(np.abs(self.q.sum(axis=1) - 1.0) <= tol)
        )

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for row in self.q:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, tau=float("nan")) -> "TransitionMatrix":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise FormatError(str(exc), line=lineno) from None
        q = np.array(rows, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise FormatError(f"{Path(path).name}: transition matrix must be square, got {q.shape}")
        return cls(q, tau)


def _check_tau(tau):
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")


def _check_classes(num_classes):
    if num_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")


def symmetric_q(num_classes: int, tau: float) -> TransitionMatrix:
    _check_classes(num_classes)
    _check_tau(tau)
    q = np.full((num_classes, num_classes), tau / (num_classes - 1))
    np.fill_diagonal(q, 1.0 - tau)
    return TransitionMatrix(q, float(tau))


def pairmap_q(num_classes: int, pairs, tau: float) -> TransitionMatrix:
    _check_classes(num_classes)
    _check_tau(tau)
    q = np.eye(num_classes)
    seen = set()
    for src, dst in pairs:
        if src in seen:
            raise ConfigError(f"class {src} appears as a source more than once")
        if not (0 <= src < num_classes and 0 <= dst < num_classes):
            raise ConfigError(f"pair ({src}, {dst}) out of range for {num_classes} classes")
        if src == dst:
            raise ConfigError(f"pair ({src}, {dst}) maps a class to itself")
        seen.add(src)
        q[src, src] = 1.0 - tau
        q[src, dst] = tau
    return TransitionMatrix(q, float(tau))


def circular_q(num_classes: int, superclass_size: int, tau: float) -> TransitionMatrix:
    """Each class flips to the next one, wrapping, inside contiguous blocks."""
    _check_classes(num_classes)
    _check_tau(tau)
    s = superclass_size
    if s < 1 or num_classes % s:
        raise ConfigError(f"superclass size {s} does not divide {num_classes} classes")
    q = np.zeros((num_classes, num_classes))
    for i in range(num_classes):
        start = (i // s) * s
        nxt = start + (i - start + 1) % s
        q[i, i] += 1.0 - tau
        q[i, nxt] += tau
    return TransitionMatrix(q, float(tau))


def apply_noise(clean_labels, q: TransitionMatrix, seed) -> np.ndarray:
    """Draw each noisy label independently from the row of its clean class."""
    labels = np.asarray(clean_labels, dtype=np.int64)
    C = q.num_classes
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise IndexError(f"labels must lie in [0, {C})")
    rng = np.random.default_rng(seed)
    u = rng.random(labels.size)
    cum = np.cumsum(q.q, axis=1)
    noisy = (u[:, None] >= cum[labels]).sum(axis=1)
    return np.minimum(noisy, C - 1).astype(np.int64)


def empirical_flip_rate(clean, noisy) -> float:
    clean, noisy = np.asarray(clean), np.asarray(noisy)
    if clean.shape != noisy.shape:
        raise ValueError(f"label vectors differ in length: {clean.shape} vs {noisy.shape}")
    if clean.size == 0:
        return 0.0
    return float(np.mean(clean != noisy))


def make_q(kind: str, num_classes: int, tau: float, superclass_size: int = 5) -> TransitionMatrix:
    """Build a matrix by name: ``symmetric``, ``pairmap`` or ``circular``.

    ``pairmap`` uses the CIFAR-10 pairs and therefore needs 10 classes.
    """
    if kind == "symmetric":
        return symmetric_q(num_classes, tau)
    if kind == "pairmap":
        if num_classes != len(CIFAR10_CLASSES):
            raise ConfigError("pairmap noise uses the CIFAR-10 pairs and needs num_classes=10")
        return pairmap_q(num_classes, CIFAR10_PAIRS, tau)
    if kind == "circular":
        return circular_q(num_classes, superclass_size, tau)
    raise ConfigError(f"unknown noise kind {kind!r}")
