"""Two-stage training: alternating network/label updates, then fine-tuning.

Stage 1 repeats ``T_update`` epochs of joint training with small-loss
selection followed by one label-correction event; a large correction
rate restarts both networks from scratch. Stage 2 trains with the labels
frozen while the learning rate ramps linearly to zero.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .backbone import AdamState, NetParams, adam_step, backprop, forward, init_params
from .datasets import LabeledDataset
from .errors import ConfigError, NumericError
from .metrics import MetricsRecord
from .selection import (
    CorrectionOutcome,
    Schedules,
    apply_correction,
    correction_rate,
    select_correction_set,
    selection_rate,
    small_loss_select,
    update_tau,
)

log = logging.getLogger(__name__)

MODES = (
    "method",
    "standard_baseline",
    "joint_only_baseline",
    "continuous_update_ablation",
    "no_retrain_ablation",
)


@dataclass
class RunConfig:
    schedules: Schedules = field(default_factory=Schedules)
    stage1_epochs: int = 60
    finetune_epochs: int = 20
    batch_size: int = 128
    lr_stage1: float = 1e-3
    lr_finetune_start: float = 1e-3
    mode: str = "method"
    seed: int = 0
    hidden_dims: tuple[int, ...] = (256, 256)
    record_timing: bool = False

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if self.stage1_epochs < 1:
            raise ConfigError(f"stage1_epochs must be positive, got {self.stage1_epochs}")
        if self.finetune_epochs < 0:
            raise ConfigError(f"finetune_epochs must be non-negative, got {self.finetune_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_stage1 <= 0 or self.lr_finetune_start < 0:
            raise ConfigError("learning rates must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden_dims}")
        self.schedules.validate()

    @property
    def planned_corrections(self) -> int:
        return max(1, self.stage1_epochs // self.schedules.T_update)


@dataclass
class TwinState:
    params1: NetParams
    params2: NetParams | None
    adam1: AdamState
    adam2: AdamState | None
    epoch: int = 0  # t: epochs since the networks were last initialized
    k: int = 0
    tau_current: float = 0.0
    lambda_current: float = 0.9
    generation: int = 0  # number of restarts so far
    total_epochs: int = 0

    @property
    def is_twin(self) -> bool:
        return self.params2 is not None


def _net_seed(config: RunConfig, k: int, which: int):
    return [config.seed, k, which]


def _layer_dims(config: RunConfig, dim: int, num_classes: int):
    return [dim, *config.hidden_dims, num_classes]


def init_state(config: RunConfig, dim: int, num_classes: int) -> TwinState:
    dims = _layer_dims(config, dim, num_classes)
    p1 = init_params(dims, _net_seed(config, 0, 1))
    twin = config.mode != "standard_baseline"
    p2 = init_params(dims, _net_seed(config, 0, 2)) if twin else None
    return TwinState(
        params1=p1,
        params2=p2,
        adam1=AdamState.zeros_like(p1),
        adam2=AdamState.zeros_like(p2) if twin else None,
        tau_current=config.schedules.tau0,
        lambda_current=config.schedules.lambda_start,
    )


def _rate_tau(state: TwinState, config: RunConfig) -> float:
    s = config.schedules
    return s.tau0 if s.rates_use_initial_tau else state.tau_current


def _shuffle(config: RunConfig, state: TwinState, n: int) -> np.ndarray:
    rng = np.random.default_rng([config.seed, state.total_epochs, state.generation])
    return rng.permutation(n)


def train_epoch(state: TwinState, dataset: LabeledDataset, config: RunConfig,
                lr: float | None = None, rate: float | None = None) -> TwinState:
    """One pass over ``dataset`` in a seeded shuffle order.

    Twin states train on the joint loss of the small-loss fraction of each
    batch; a single-network state trains on plain cross-entropy over every
    example. ``lr`` and ``rate`` default to the stage-1 values.
    """
    N = len(dataset)
    if N == 0:
        raise ValueError("cannot train on an empty dataset")
    lr = config.lr_stage1 if lr is None else lr
    if rate is None:
        rate = selection_rate(state.epoch, config.schedules.T_k, _rate_tau(state, config))
    lam = state.lambda_current
    X, Y = dataset.features, dataset.current_labels

    p1, p2, a1, a2 = state.params1, state.params2, state.adam1, state.adam2
    order = _shuffle(config, state, N)
    for b, start in enumerate(range(0, N, config.batch_size)):
        idx = order[start:start + config.batch_size]
        xb, yb = X[idx], Y[idx]
        try:
            probs1, cache1 = forward(p1, xb)
            if p2 is None:
                g1 = backprop(p1, cache1, losses.ce_grad(probs1, yb))
                p1, a1 = adam_step(p1, g1, a1, lr)
                continue
            probs2, cache2 = forward(p2, xb)
            per_ex = losses.joint_losses(probs1, probs2, yb, lam)
            mask = small_loss_select(per_ex.joint, rate)
            d1, d2 = losses.joint_loss_grad(probs1, probs2, yb, lam, mask)
            g1 = backprop(p1, cache1, d1)
            g2 = backprop(p2, cache2, d2)
            p1, a1 = adam_step(p1, g1, a1, lr)
            p2, a2 = adam_step(p2, g2, a2, lr)
        except NumericError as exc:
            raise NumericError(f"batch {b}: {exc}", layer=exc.layer, batch=b) from exc

    return replace(
        state, params1=p1, params2=p2, adam1=a1, adam2=a2,
        epoch=state.epoch + 1, total_epochs=state.total_epochs + 1,
    )


def correction_step(state: TwinState, dataset: LabeledDataset, config: RunConfig):
    """Relabel confident-but-noisy examples on which both networks agree.

    Returns ``(dataset, state, outcome)`` with a new dataset carrying the
    corrected current labels, ``k`` advanced and the noise estimate updated.
    """
    if not state.is_twin:
        raise ConfigError("label correction needs two networks")
    k = state.k + 1
    rate = correction_rate(k, _rate_tau(state, config))
    probs1, _ = forward(state.params1, dataset.features)
    probs2, _ = forward(state.params2, dataset.features)
    per_ex = losses.joint_losses(probs1, probs2, dataset.current_labels, state.lambda_current)
    confident, noisy, corr = select_correction_set(per_ex.agr, per_ex.sup, rate)
    new_labels, changed = apply_correction(
        dataset.current_labels, corr, probs1.argmax(axis=1), probs2.argmax(axis=1)
    )
    counted = changed.size if config.schedules.tau_counts_changed_only else corr.size
    new_tau = update_tau(state.tau_current, counted, len(dataset))
    outcome = CorrectionOutcome(
        correction_set=corr, changed=changed, new_tau=new_tau, labels=new_labels,
        confident=confident, noisy=noisy, rate=rate,
    )
    log.debug("correction k=%d rate=%.4f |D_corr|=%d changed=%d tau=%.4f",
              k, rate, corr.size, changed.size, new_tau)
    return dataset.with_labels(new_labels), replace(state, k=k, tau_current=new_tau), outcome


def maybe_retrain(state: TwinState, correction_rate_used: float, config: RunConfig) -> TwinState:
    """Restart both networks when the last correction rate exceeds C_restart.

    Labels are untouched (they live in the dataset). In the continuous
    update ablation only the first correction may trigger a restart.
    """
    if config.mode == "no_retrain_ablation":
        return state
    if config.mode == "continuous_update_ablation" and state.k != 1:
        return state
    if not correction_rate_used > config.schedules.C_restart:
        return state
    dims = state.params1.layer_dims
    p1 = init_params(dims, _net_seed(config, state.k, 1))
    p2 = init_params(dims, _net_seed(config, state.k, 2))
    return replace(
        state, params1=p1, params2=p2,
        adam1=AdamState.zeros_like(p1), adam2=AdamState.zeros_like(p2),
        epoch=0, generation=state.generation + 1,
    )


def lambda_at(k: int, config: RunConfig) -> float:
    s = config.schedules
    K = config.planned_corrections
    if k >= K:
        return s.lambda_end
    return max(s.lambda_end, s.lambda_start - k * (s.lambda_start - s.lambda_end) / K)


def lambda_step(state: TwinState, config: RunConfig) -> TwinState:
    return replace(state, lambda_current=lambda_at(state.k, config))


def finetune_lr(epoch_index: int, config: RunConfig) -> float:
    """Linear ramp: start * (F - e) / F for e = 0..F-1, so the last epoch
    runs one ramp step above zero."""
    F = config.finetune_epochs
    return config.lr_finetune_start * (F - epoch_index) / F


def fine_tune(state: TwinState, dataset: LabeledDataset, config: RunConfig, on_epoch=None) -> TwinState:
    """Train ``finetune_epochs`` more epochs with the labels frozen.

    Twin states use lambda_end and the clamped selection rate 1 - tau.
    ``on_epoch(state, e)`` is called after every epoch.
    """
    if state.is_twin:
        state = replace(state, lambda_current=config.schedules.lambda_end)
    rate = 1.0 - _rate_tau(state, config) if state.is_twin else None
    for e in range(config.finetune_epochs):
        state = train_epoch(state, dataset, config, lr=finetune_lr(e, config), rate=rate)
        if on_epoch is not None:
            on_epoch(state, e)
    return state


def evaluate(state: TwinState, test_features, test_labels):
    """Return ``(acc1, acc2, mean_acc, disagreement_rate)``.

    ``acc2`` and the disagreement rate are None for a single network.
    """
    y = np.asarray(test_labels)
    if y.size == 0:
        raise ValueError("empty test set")
    pred1 = forward(state.params1, test_features)[0].argmax(axis=1)
    acc1 = float(np.mean(pred1 == y))
    if not state.is_twin:
        return acc1, None, acc1, None
    pred2 = forward(state.params2, test_features)[0].argmax(axis=1)
    acc2 = float(np.mean(pred2 == y))
    return acc1, acc2, (acc1 + acc2) / 2.0, float(np.mean(pred1 != pred2))


def _is_correction_epoch(total_epochs: int, config: RunConfig) -> bool:
    T = config.schedules.T_update
    if config.mode == "continuous_update_ablation":
        return total_epochs >= T
    return total_epochs % T == 0


def run_experiment(config: RunConfig, train_dataset: LabeledDataset, test_dataset):
    """Run the configured mode end to end; one ``MetricsRecord`` per epoch.

    ``test_dataset`` is a ``(features, clean_labels)`` pair.
    """
    config.validate()
    test_x, test_y = test_dataset
    dataset = train_dataset
    state = init_state(config, dataset.dim, dataset.num_classes)
    twin = state.is_twin
    records: list[MetricsRecord] = []
    clock = time.perf_counter()

    def emit(stage, corrected=0, retrained=False):
        nonlocal clock
        acc1, acc2, mean_acc, dis = evaluate(state, test_x, test_y)
        wall = None
        if config.record_timing:
            now = time.perf_counter()
            wall, clock = round((now - clock) * 1000.0, 3), now
        records.append(MetricsRecord(
            epoch=state.total_epochs, stage=stage, mode=config.mode, k=state.k,
            tau_est=state.tau_current, lambda_=state.lambda_current if twin else None,
            acc1=acc1, acc2=acc2, mean_acc=mean_acc, disagreement_rate=dis,
            label_acc=dataset.label_accuracy(), num_corrected_this_event=corrected,
            retrained=retrained, wall_ms=wall,
        ))

    for _ in range(config.stage1_epochs):
        state = train_epoch(state, dataset, config)
        corrected, retrained = 0, False
        if twin and _is_correction_epoch(state.total_epochs, config):
            if config.mode == "joint_only_baseline":
                # Same event clock as the method, minus the relabelling.
                state = replace(state, k=state.k + 1)
                state = lambda_step(state, config)
            else:
                dataset, state, outcome = correction_step(state, dataset, config)
                corrected = int(outcome.changed.size)
                state = lambda_step(state, config)
                generation = state.generation
                state = maybe_retrain(state, outcome.rate, config)
                retrained = state.generation != generation
        emit("iterative", corrected, retrained)

    def after_finetune_epoch(s, e):
        nonlocal state
        state = s
        emit("finetune")

    state = fine_tune(state, dataset, config, on_epoch=after_finetune_epoch)
    return records
