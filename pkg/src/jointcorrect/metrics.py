"""Per-epoch metric records and the JSON-lines log format.

A log file holds three kinds of lines, in order:

1. ``{"config": {...}}`` with the fully resolved configuration and seed,
2. one object per epoch whose keys are exactly the ``MetricsRecord`` fields,
3. ``{"summary": {"best_mean_acc": ..., "last_mean_acc": ..., ...}}``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class MetricsRecord:
    epoch: int
    stage: str  # "iterative" or "finetune"
    mode: str
    k: int
    tau_est: float
    lambda_: float | None
    acc1: float
    acc2: float | None
    mean_acc: float
    disagreement_rate: float | None
    label_acc: float | None
    num_corrected_this_event: int
    retrained: bool
    wall_ms: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return {f: d[f] for f in RECORD_FIELDS}

    @classmethod
    def from_dict(cls, d) -> "MetricsRecord":
        if set(d) != set(RECORD_FIELDS):
            raise ValueError(f"record keys {sorted(d)} do not match {sorted(RECORD_FIELDS)}")
        kw = dict(d)
        kw["lambda_"] = kw.pop("lambda")
        return cls(**kw)


RECORD_FIELDS = tuple("lambda" if f.name == "lambda_" else f.name for f in fields(MetricsRecord))


def summarize(records) -> dict:
    """Best and last mean test accuracy, plus final label accuracy."""
    if not records:
        return {"best_mean_acc": None, "best_epoch": None, "last_mean_acc": None, "last_label_acc": None}
    best = max(records, key=lambda r: r.mean_acc)
    last = records[-1]
    return {
        "best_mean_acc": best.mean_acc,
        "best_epoch": best.epoch,
        "last_mean_acc": last.mean_acc,
        "last_label_acc": last.label_acc,
    }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=False, allow_nan=False)


def write_metrics(records, path, config: dict | None = None):
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            if config is not None:
                fh.write(_dumps({"config": config}) + "\n")
            for rec in records:
                fh.write(_dumps(rec.to_dict()) + "\n")
            fh.write(_dumps({"summary": summarize(records)}) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc.strerror or exc}") from exc


def read_metrics(path):
    """Return ``(config or None, records, summary)``."""
    config, records, summary = None, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if "config" in obj and len(obj) == 1:
                config = obj["config"]
            elif "summary" in obj and len(obj) == 1:
                summary = obj["summary"]
            else:
                records.append(MetricsRecord.from_dict(obj))
    return config, records, summary
