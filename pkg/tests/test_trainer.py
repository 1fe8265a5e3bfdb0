from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from jointcorrect import losses
from jointcorrect.backbone import forward
from jointcorrect.datasets import gen_gaussian_blobs, make_noisy_dataset, split
from jointcorrect.errors import ConfigError
from jointcorrect.noise import symmetric_q
from jointcorrect.selection import Schedules
from jointcorrect.trainer import (
    RunConfig, correction_step, evaluate, fine_tune, finetune_lr, init_state, lambda_at,
    lambda_step, maybe_retrain, run_experiment, train_epoch,
)

import oracles


def small_cfg(**kw):
    sched = kw.pop("schedules", Schedules(tau0=0.3, T_k=3, T_update=2))
    base = dict(stage1_epochs=6, finetune_epochs=2, batch_size=32, hidden_dims=(16,), seed=3)
    base.update(kw)
    return RunConfig(schedules=sched, **base)


def small_data(tau=0.3, C=3, per_class=60, seed=0):
    X, y = gen_gaussian_blobs(C, per_class, 4, 6.0, 1.0, seed=[seed, 0])
    ds = make_noisy_dataset(X, y, symmetric_q(C, tau), seed=[seed, 1])
    return split(ds, 0.25, seed=[seed, 2])


def test_run_config_rejects_bad_mode():
    with pytest.raises(ConfigError, match="mode"):
        RunConfig(mode="bogus")


def test_init_state_twin_and_single():
    twin = init_state(small_cfg(), 4, 3)
    assert twin.is_twin and twin.k == 0 and twin.tau_current == 0.3
    assert not np.array_equal(twin.params1.weights[0], twin.params2.weights[0])
    single = init_state(small_cfg(mode="standard_baseline"), 4, 3)
    assert not single.is_twin and single.adam2 is None


def test_train_epoch_is_deterministic():
    cfg = small_cfg()
    train, _ = small_data()
    a = train_epoch(init_state(cfg, 4, 3), train, cfg)
    b = train_epoch(init_state(cfg, 4, 3), train, cfg)
    for x, y in zip(a.params1.arrays() + a.params2.arrays(), b.params1.arrays() + b.params2.arrays()):
        assert x.tobytes() == y.tobytes()
    assert a.epoch == 1 and a.total_epochs == 1


def test_train_epoch_reduces_loss_on_clean_two_class_data():
    X, y = gen_gaussian_blobs(2, 100, 4, 6.0, 1.0, seed=1)
    ds = make_noisy_dataset(X, y, symmetric_q(2, 0.0), seed=2)
    cfg = small_cfg(schedules=Schedules(tau0=0.0), lr_stage1=1e-2)
    state = init_state(cfg, 4, 2)

    def loss(s):
        p1, _ = forward(s.params1, ds.features)
        p2, _ = forward(s.params2, ds.features)
        return losses.mean_joint_loss(p1, p2, ds.current_labels, s.lambda_current, np.ones(len(ds), bool))

    before = loss(state)
    after = loss(train_epoch(state, ds, cfg))
    assert after < before


def test_tau_zero_selects_everything(monkeypatch):
    import jointcorrect.trainer as tr

    seen = []
    real = tr.small_loss_select

    def spy(values, rate):
        seen.append(rate)
        return real(values, rate)

    monkeypatch.setattr(tr, "small_loss_select", spy)
    cfg = small_cfg(schedules=Schedules(tau0=0.0, T_k=2))
    train, _ = small_data(tau=0.0)
    state = init_state(cfg, 4, 3)
    for _ in range(3):
        state = train_epoch(state, train, cfg)
    assert seen and all(r == 1.0 for r in seen)


def test_correction_step_matches_oracle():
    cfg = small_cfg()
    train, _ = small_data(tau=0.4)
    state = init_state(cfg, 4, 3)
    for _ in range(4):
        state = train_epoch(state, train, cfg)
    new_ds, new_state, out = correction_step(state, train, cfg)

    p1, _ = forward(state.params1, train.features)
    p2, _ = forward(state.params2, train.features)
    per = losses.joint_losses(p1, p2, train.current_labels, state.lambda_current)
    rate = 0.3 / 2
    N = len(train)
    conf = oracles.sort_select_smallest(list(per.agr), oracles.ceil_count(rate, N))
    noisy = oracles.sort_select_largest(list(per.sup), oracles.floor_count(rate, N))
    assert set(out.correction_set) == conf & noisy
    expected = train.current_labels.copy()
    a1, a2 = p1.argmax(axis=1), p2.argmax(axis=1)
    for i in conf & noisy:
        if a1[i] == a2[i]:
            expected[i] = a1[i]
    npt.assert_array_equal(new_ds.current_labels, expected)
    assert new_state.k == 1
    assert new_state.tau_current == pytest.approx(0.3 - len(conf & noisy) / N, abs=1e-12)
    # the input dataset is left alone
    npt.assert_array_equal(train.current_labels, train.original_noisy_labels)


def test_correction_step_rate_zero_changes_nothing():
    cfg = small_cfg(schedules=Schedules(tau0=0.0))
    train, _ = small_data(tau=0.0)
    state = init_state(cfg, 4, 3)
    new_ds, new_state, out = correction_step(state, train, cfg)
    assert out.correction_set.size == 0 and out.changed.size == 0
    npt.assert_array_equal(new_ds.current_labels, train.current_labels)
    assert new_state.tau_current == 0.0


def test_maybe_retrain_cases():
    cfg = small_cfg()
    state = replace(init_state(cfg, 4, 3), k=2, epoch=5)
    kept = maybe_retrain(state, 0.05, small_cfg(schedules=Schedules(C_restart=0.05)))
    assert kept is state  # not strictly greater
    fresh = maybe_retrain(state, 0.06, small_cfg(schedules=Schedules(C_restart=0.05)))
    assert fresh.generation == 1 and fresh.epoch == 0 and fresh.k == 2
    assert fresh.adam1.step == 0
    assert not np.array_equal(fresh.params1.weights[0], state.params1.weights[0])
    assert maybe_retrain(state, 0.9, small_cfg(mode="no_retrain_ablation")) is state
    cont = small_cfg(mode="continuous_update_ablation")
    assert maybe_retrain(state, 0.9, cont) is state
    assert maybe_retrain(replace(state, k=1), 0.9, cont).generation == 1


def test_lambda_schedule_endpoints():
    cfg = small_cfg(stage1_epochs=60, schedules=Schedules(T_update=10))
    assert lambda_at(0, cfg) == pytest.approx(0.9)
    assert lambda_at(3, cfg) == pytest.approx(0.8)
    assert lambda_at(6, cfg) == pytest.approx(0.7)
    assert lambda_at(50, cfg) == pytest.approx(0.7)
    vals = [lambda_at(k, cfg) for k in range(10)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    state = replace(init_state(cfg, 4, 3), k=6)
    assert lambda_step(state, cfg).lambda_current == pytest.approx(0.7)


def test_finetune_lr_ramp():
    cfg = small_cfg(finetune_epochs=4, lr_finetune_start=0.02)
    lrs = [finetune_lr(e, cfg) for e in range(4)]
    npt.assert_allclose(lrs, [0.02, 0.015, 0.01, 0.005])
    assert lrs[-1] == pytest.approx(0.02 / 4)


def test_fine_tune_zero_epochs_and_frozen_labels():
    cfg = small_cfg(finetune_epochs=0)
    train, _ = small_data()
    state = init_state(cfg, 4, 3)
    out = fine_tune(state, train, cfg)
    assert out.total_epochs == 0
    assert out.lambda_current == cfg.schedules.lambda_end

    cfg = small_cfg(finetune_epochs=3)
    calls = []
    labels = train.current_labels.copy()
    out = fine_tune(state, train, cfg, on_epoch=lambda s, e: calls.append(e))
    assert calls == [0, 1, 2] and out.total_epochs == 3
    npt.assert_array_equal(train.current_labels, labels)


def test_evaluate_identical_and_perfect():
    cfg = small_cfg()
    state = init_state(cfg, 4, 3)
    state = replace(state, params2=state.params1.copy())
    X = np.random.default_rng(0).normal(size=(50, 4))
    pred = forward(state.params1, X)[0].argmax(axis=1)
    acc1, acc2, mean, dis = evaluate(state, X, pred)
    assert (acc1, acc2, mean, dis) == (1.0, 1.0, 1.0, 0.0)


def test_evaluate_untrained_is_near_chance():
    cfg = small_cfg(hidden_dims=(32,))
    state = init_state(cfg, 20, 10)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(2000, 20))
    y = rng.integers(0, 10, size=2000)
    acc1, acc2, _, _ = evaluate(state, X, y)
    assert abs(acc1 - 0.1) < 0.03 and abs(acc2 - 0.1) < 0.03
    single = init_state(small_cfg(mode="standard_baseline"), 20, 10)
    assert evaluate(single, X, y)[1] is None


def test_run_experiment_tau_zero_changes_no_labels():
    cfg = small_cfg(schedules=Schedules(tau0=0.0, T_update=2))
    train, test = small_data(tau=0.0)
    recs = run_experiment(cfg, train, test)
    assert len(recs) == cfg.stage1_epochs + cfg.finetune_epochs
    assert sum(r.num_corrected_this_event for r in recs) == 0
    assert all(r.label_acc == 1.0 for r in recs)


def test_run_experiment_event_clock_and_bounds():
    cfg = small_cfg()
    train, test = small_data()
    recs = run_experiment(cfg, train, test)
    it = [r for r in recs if r.stage == "iterative"]
    ft = [r for r in recs if r.stage == "finetune"]
    assert [r.epoch for r in recs] == list(range(1, 9))
    assert len(it) == 6 and len(ft) == 2
    # k advances only at multiples of T_update
    assert [r.k for r in it] == [0, 1, 1, 2, 2, 3]
    for r in recs:
        assert 0.7 - 1e-12 <= r.lambda_ <= 0.9 + 1e-12
        assert 0.0 <= r.tau_est <= 1.0
    taus = [r.tau_est for r in recs]
    assert all(a >= b for a, b in zip(taus, taus[1:]))
    assert all(r.num_corrected_this_event == 0 for r in recs if r.epoch % 2)


def test_run_experiment_standard_has_no_events():
    cfg = small_cfg(mode="standard_baseline")
    train, test = small_data()
    recs = run_experiment(cfg, train, test)
    assert all(r.k == 0 and r.lambda_ is None and r.acc2 is None for r in recs)
    assert all(not r.retrained and r.num_corrected_this_event == 0 for r in recs)
    assert all(r.tau_est == 0.3 for r in recs)


def test_joint_only_keeps_labels():
    cfg = small_cfg(mode="joint_only_baseline")
    train, test = small_data()
    recs = run_experiment(cfg, train, test)
    assert len({r.label_acc for r in recs}) == 1
    assert recs[-1].k == 3 and not any(r.retrained for r in recs)


def test_run_experiment_is_deterministic():
    cfg = small_cfg()
    train, test = small_data()
    a = [r.to_dict() for r in run_experiment(cfg, train, test)]
    b = [r.to_dict() for r in run_experiment(cfg, train, test)]
    assert a == b
