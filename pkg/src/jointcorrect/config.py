"""Plain-text ``key=value`` run configuration.

Blank lines and ``#`` comments are ignored; unknown keys are rejected.
Values given on the command line override the file. Reals may also be
written as fractions (``test_fraction=2/7``).

Desk-scale defaults next to the values used for CIFAR-sized runs:

=================  ========  =============
key                default   CIFAR setting
=================  ========  =============
stage1_epochs      60        250
finetune_epochs    20        50
t_update           10        50
t_k                10        10
c_restart          0.05      0.05
lambda_start/end   0.9/0.7   0.9/0.7
lr_stage1          0.001     0.001
batch_size         128       128
hidden             256,256   (7-layer CNN)
=================  ========  =============
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .noise import make_q
from .selection import Schedules
from .trainer import MODES, RunConfig

NOISE_KINDS = ("symmetric", "pairmap", "circular")


def _real(s):
    return float(Fraction(s.strip()))


def _int(s):
    v = _real(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _bool(s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _ints(s):
    return tuple(_int(p) for p in s.split(",") if p.strip())


def _opt_int(s):
    return None if s.strip().lower() in ("", "none") else _int(s)


def _opt_real(s):
    return None if s.strip().lower() in ("", "none") else _real(s)


def _opt_str(s):
    s = s.strip()
    return None if s.lower() in ("", "none") else s


def _unit(v):
    return v is None or 0.0 <= v <= 1.0


def _pos(v):
    return v > 0


# key -> (parser, default, check, description of the allowed range)
KEYS = {
    "seed": (_int, 0, None, None),
    "data_seed": (_opt_int, None, None, None),
    "data": (_opt_str, None, None, None),
    "tau": (_real, 0.5, _unit, "out of [0,1]"),
    "tau0": (_opt_real, None, _unit, "out of [0,1]"),
    "noise": (str.strip, "symmetric", lambda v: v in NOISE_KINDS, f"must be one of {NOISE_KINDS}"),
    "superclass_size": (_int, 5, _pos, "must be positive"),
    "num_classes": (_int, 10, lambda v: v >= 2, "must be >= 2"),
    "per_class": (_int, 700, _pos, "must be positive"),
    "dim": (_int, 20, lambda v: v >= 2, "must be >= 2"),
    "separation": (_real, 8.0, _pos, "must be positive"),
    "spread": (_real, 1.0, lambda v: v >= 0, "must be non-negative"),
    "test_fraction": (_real, 2 / 7, lambda v: 0 < v < 1, "out of (0,1)"),
    "hidden": (_ints, (256, 256), lambda v: all(h > 0 for h in v), "must be positive widths"),
    "batch_size": (_int, 128, _pos, "must be positive"),
    "stage1_epochs": (_int, 60, _pos, "must be positive"),
    "finetune_epochs": (_int, 20, lambda v: v >= 0, "must be non-negative"),
    "lr_stage1": (_real, 1e-3, _pos, "must be positive"),
    "lr_finetune_start": (_real, 1e-3, lambda v: v >= 0, "must be non-negative"),
    "t_k": (_int, 10, _pos, "must be positive"),
    "t_update": (_int, 10, _pos, "must be positive"),
    "c_restart": (_real, 0.05, _unit, "out of [0,1]"),
    "lambda_start": (_real, 0.9, _unit, "out of [0,1]"),
    "lambda_end": (_real, 0.7, _unit, "out of [0,1]"),
    "mode": (str.strip, "method", lambda v: v in MODES, f"must be one of {MODES}"),
    "rates_use_initial_tau": (_bool, False, None, None),
    "tau_counts_changed_only": (_bool, False, None, None),
    "record_timing": (_bool, False, None, None),
}


@dataclass
class ExperimentConfig:
    values: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def effective_tau0(self) -> float:
        return self.tau if self.tau0 is None else self.tau0

    @property
    def effective_data_seed(self) -> int:
        return self.seed if self.data_seed is None else self.data_seed

    def run_config(self, mode: str | None = None) -> RunConfig:
        v = self.values
        schedules = Schedules(
            tau0=self.effective_tau0,
            T_k=v["t_k"],
            lambda_start=v["lambda_start"],
            lambda_end=v["lambda_end"],
            T_update=v["t_update"],
            C_restart=v["c_restart"],
            rates_use_initial_tau=v["rates_use_initial_tau"],
            tau_counts_changed_only=v["tau_counts_changed_only"],
        )
        return RunConfig(
            schedules=schedules,
            stage1_epochs=v["stage1_epochs"],
            finetune_epochs=v["finetune_epochs"],
            batch_size=v["batch_size"],
            lr_stage1=v["lr_stage1"],
            lr_finetune_start=v["lr_finetune_start"],
            mode=mode or v["mode"],
            seed=v["seed"],
            hidden_dims=v["hidden"],
            record_timing=v["record_timing"],
        )

    def transition_matrix(self):
        return make_q(self.noise, self.num_classes, self.tau, self.superclass_size)

    def resolved(self, **extra) -> dict:
        """JSON-ready dict of every key, for the reproducibility block."""
        out = {}
        for key in KEYS:
            val = self.values[key]
            out[key] = list(val) if isinstance(val, tuple) else val
        out.update(extra)
        return out


def _parse_value(key, raw):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    parser, _, check, rule = KEYS[key]
    try:
        val = parser(raw) if isinstance(raw, str) else raw
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None
    if check is not None and not check(val):
        raise ConfigError(f"{key} {rule}")
    return val


def read_config_file(path) -> dict:
    raw = {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path.name}:{lineno}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{path.name}:{lineno}: unknown config key {key!r}")
        raw[key] = val
    return raw


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve defaults <- config file <- overrides and validate everything."""
    values = {key: spec[1] for key, spec in KEYS.items()}
    if path is not None:
        for key, raw in read_config_file(path).items():
            values[key] = _parse_value(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        values[key] = _parse_value(key, raw)

    cfg = ExperimentConfig(values)
    if values["lambda_start"] < values["lambda_end"]:
        raise ConfigError("lambda_start must be >= lambda_end")
    try:
        cfg.transition_matrix()
        cfg.run_config()
    except ConfigError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
