"""Small-loss selection, correction-set selection and noise-rate bookkeeping.

Every ranking breaks ties by the lower index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

# Slack for rate * count products such as 0.29 * 100 = 28.999999999999996.
_ROUND_SLACK = 1e-9


@dataclass
class Schedules:
    tau0: float = 0.5
    T_k: int = 10
    lambda_start: float = 0.9
    lambda_end: float = 0.7
    T_update: int = 10
    C_restart: float = 0.05
    # Alternatives to the default schedule semantics.
    rates_use_initial_tau: bool = False
    tau_counts_changed_only: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("tau0", "lambda_start", "lambda_end", "C_restart"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name.lower()} out of [0,1]: {v}")
        if self.lambda_start < self.lambda_end:
            raise ConfigError("lambda_start must be >= lambda_end")
        if self.T_k < 1:
            raise ConfigError(f"t_k must be a positive integer, got {self.T_k}")
        if self.T_update < 1:
            raise ConfigError(f"t_update must be a positive integer, got {self.T_update}")


@dataclass
class CorrectionOutcome:
    correction_set: np.ndarray
    changed: np.ndarray
    new_tau: float
    labels: np.ndarray
    confident: np.ndarray | None = None
    noisy: np.ndarray | None = None
    rate: float = 0.0


def floor_count(rate, n) -> int:
    return int(math.floor(rate * n + _ROUND_SLACK))


def ceil_count(rate, n) -> int:
    return int(math.ceil(rate * n - _ROUND_SLACK))


def selection_rate(t, T_k, tau_current) -> float:
    """Fraction of a mini-batch kept at epoch ``t``: 1 - min(t/T_k * tau, tau)."""
    if t < 0:
        raise ValueError(f"epoch index must be non-negative, got {t}")
    return 1.0 - min(t / T_k * tau_current, tau_current)


def small_loss_select(per_example_joint, rate) -> np.ndarray:
    """Mask of the floor(rate * B) smallest losses (at least one)."""
    losses = np.asarray(per_example_joint, dtype=np.float64)
    B = losses.size
    if B == 0:
        raise ValueError("cannot select from an empty batch")
    if not 0.0 < rate <= 1.0:
        raise ConfigError(f"selection rate must lie in (0, 1], got {rate}")
    k = max(1, floor_count(rate, B))
    order = np.argsort(losses, kind="stable")
    mask = np.zeros(B, dtype=bool)
    mask[order[:k]] = True
    return mask


def correction_rate(k, tau_prev) -> float:
    """tau / (2k) for the k-th correction event."""
    if k < 1:
        raise ValueError(f"correction counter starts at 1, got {k}")
    return tau_prev / (2.0 * k)


def select_correction_set(agr, sup, rate):
    """Return ``(confident, noisy, correction)`` as sorted index arrays.

    confident: the ceil(rate * N) examples with the smallest agreement loss.
    noisy: the floor(rate * N) examples with the largest supervised loss.
    correction: their intersection.
    """
    agr = np.asarray(agr, dtype=np.float64)
    sup = np.asarray(sup, dtype=np.float64)
    if agr.shape != sup.shape or agr.ndim != 1:
        raise DimensionError(f"loss vectors differ: {agr.shape} vs {sup.shape}")
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"correction rate must lie in [0, 1], got {rate}")
    N = agr.size
    n_conf = min(N, ceil_count(rate, N))
    n_noisy = min(N, floor_count(rate, N))
    confident = np.sort(np.argsort(agr, kind="stable")[:n_conf])
    # Stable sort on the negated loss keeps lower indices first among ties.
    noisy = np.sort(np.argsort(-sup, kind="stable")[:n_noisy])
    correction = np.intersect1d(confident, noisy, assume_unique=True)
    return confident, noisy, correction


def apply_correction(current_labels, correction, pred1, pred2):
    """Relabel members of ``correction`` on which both networks agree.

    Returns ``(labels, changed)``: a new label vector and the sorted indices
    whose label actually changed.
    """
    labels = np.array(current_labels, dtype=np.int64, copy=True)
    pred1 = np.asarray(pred1, dtype=np.int64)
    pred2 = np.asarray(pred2, dtype=np.int64)
    idx = np.asarray(correction, dtype=np.int64)
    if pred1.shape != labels.shape or pred2.shape != labels.shape:
        raise DimensionError("predictions must cover every training example")
    if idx.size and (idx.min() < 0 or idx.max() >= labels.size):
        raise IndexError(f"correction index out of range for {labels.size} examples")
    agree = pred1[idx] == pred2[idx]
    differs = pred1[idx] != labels[idx]
    changed = np.sort(idx[agree & differs])
    labels[changed] = pred1[changed]
    return labels, changed


def update_tau(tau_prev, correction_set_size, N) -> float:
    """tau_k = tau_{k-1} - |D_correction| / N, clamped to [0, 1]."""
    if not 0 <= correction_set_size <= N:
        raise ValueError(f"correction set size {correction_set_size} not in [0, {N}]")
    return min(1.0, max(0.0, tau_prev - correction_set_size / N))
