import json

import pytest

from jointcorrect.metrics import RECORD_FIELDS, MetricsRecord, read_metrics, summarize, write_metrics
from jointcorrect.plotting import plot_runs


def rec(epoch, acc, stage="iterative", **kw):
    base = dict(
        epoch=epoch, stage=stage, mode="method", k=0, tau_est=0.5, lambda_=0.9,
        acc1=acc, acc2=acc, mean_acc=acc, disagreement_rate=0.0, label_acc=0.5,
        num_corrected_this_event=0, retrained=False,
    )
    base.update(kw)
    return MetricsRecord(**base)


def test_summary_of_empty_run(tmp_path):
    assert summarize([]) == {"best_mean_acc": None, "best_epoch": None,
                             "last_mean_acc": None, "last_label_acc": None}
    path = tmp_path / "e.jsonl"
    write_metrics([], path)
    assert json.loads(path.read_text())["summary"]["best_mean_acc"] is None


def test_best_and_last():
    s = summarize([rec(1, 0.4), rec(2, 0.8, label_acc=0.6), rec(3, 0.7, label_acc=0.65)])
    assert s == {"best_mean_acc": 0.8, "best_epoch": 2, "last_mean_acc": 0.7, "last_label_acc": 0.65}


def test_round_trip(tmp_path):
    records = [rec(1, 0.5), rec(2, 0.6, stage="finetune", retrained=True, lambda_=None, acc2=None)]
    path = tmp_path / "m.jsonl"
    write_metrics(records, path, config={"seed": 1})
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert list(json.loads(lines[1])) == list(RECORD_FIELDS)
    assert "lambda" in RECORD_FIELDS and "lambda_" not in RECORD_FIELDS
    config, back, summary = read_metrics(path)
    assert config == {"seed": 1}
    assert back == records
    assert summary["last_mean_acc"] == 0.6


def test_from_dict_rejects_extra_keys():
    d = rec(1, 0.5).to_dict()
    d["extra"] = 1
    with pytest.raises(ValueError):
        MetricsRecord.from_dict(d)


def test_write_error_mentions_path(tmp_path):
    target = tmp_path / "missing" / "m.jsonl"
    with pytest.raises(OSError, match="missing"):
        write_metrics([rec(1, 0.5)], target)


def test_plot_runs_smoke(tmp_path):
    run_a = [rec(e, 0.5 + 0.01 * e, retrained=(e == 3)) for e in range(1, 7)]
    run_a += [rec(e, 0.6, stage="finetune") for e in range(7, 9)]
    run_b = [rec(e, 0.4, mode="standard_baseline", lambda_=None, label_acc=0.5) for e in range(1, 9)]
    out = tmp_path / "fig.png"
    plot_runs({"method": run_a, "standard": run_b}, out, n_train=100, title="demo")
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
