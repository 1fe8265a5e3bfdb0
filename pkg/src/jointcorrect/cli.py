"""Command-line entry point.

    jointcorrect train     [--config PATH] [--seed N] [--tau T] [--noise KIND] [--mode MODE] [--out FILE]
    jointcorrect baseline  [...]                 # standard_baseline unless --mode says otherwise
    jointcorrect ablate {interval,retrain} [...] # --out is a directory
    jointcorrect gen-data  [...] --out FILE.csv
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import NOISE_KINDS, parse_config
from .datasets import gen_gaussian_blobs, load_csv, make_noisy_dataset, save_csv, split
from .errors import ConfigError, FormatError, NumericError
from .metrics import summarize, write_metrics
from .trainer import MODES, run_experiment

log = logging.getLogger("jointcorrect")

ABLATIONS = {
    "interval": "continuous_update_ablation",
    "retrain": "no_retrain_ablation",
}
BASELINES = ("standard_baseline", "joint_only_baseline")


def build_dataset(cfg):
    """Full noisy dataset: the CSV file given by ``data`` or generated blobs."""
    if cfg.data is not None:
        return load_csv(cfg.data)
    ds_seed = cfg.effective_data_seed
    features, clean = gen_gaussian_blobs(
        cfg.num_classes, cfg.per_class, cfg.dim, cfg.separation, cfg.spread, [ds_seed, 0]
    )
    return make_noisy_dataset(features, clean, cfg.transition_matrix(), [ds_seed, 1])


def prepare_data(cfg):
    return split(build_dataset(cfg), cfg.test_fraction, [cfg.effective_data_seed, 2])


def run_mode(cfg, mode, train, test, out_path, plot=True):
    run_cfg = cfg.run_config(mode)
    records = run_experiment(run_cfg, train, test)
    write_metrics(records, out_path, config=cfg.resolved(mode=mode))
    if plot:
        from .plotting import plot_runs

        plot_runs({mode: records}, Path(out_path).with_suffix(".png"), n_train=len(train), title=mode)
    s = summarize(records)
    log.info("%s: best mean_acc %.4f, last mean_acc %.4f, last label_acc %s -> %s",
             mode, s["best_mean_acc"], s["last_mean_acc"], s["last_label_acc"], out_path)
    return records


def _overrides(args):
    over = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        over[key.strip()] = val
    for key in ("seed", "tau", "noise", "mode", "data"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = str(val)
    return over


def cmd_train(args, cfg):
    train, test = prepare_data(cfg)
    out = Path(args.out or "metrics.jsonl")
    run_mode(cfg, cfg.mode, train, test, out, plot=not args.no_plot)


def cmd_baseline(args, cfg):
    mode = args.mode or "standard_baseline"
    if mode not in BASELINES:
        raise ConfigError(f"baseline mode must be one of {BASELINES}, got {mode!r}")
    train, test = prepare_data(cfg)
    out = Path(args.out or f"{mode}.jsonl")
    run_mode(cfg, mode, train, test, out, plot=not args.no_plot)


def cmd_ablate(args, cfg):
    ablation = ABLATIONS[args.ablation]
    out_dir = Path(args.out or f"ablate_{args.ablation}")
    out_dir.mkdir(parents=True, exist_ok=True)
    # Both runs share one corrupted dataset and seed.
    train, test = prepare_data(cfg)
    runs = {}
    for mode in ("method", ablation):
        runs[mode] = run_mode(cfg, mode, train, test, out_dir / f"{mode}.jsonl", plot=False)
    if not args.no_plot:
        from .plotting import plot_runs

        plot_runs(runs, out_dir / f"ablate_{args.ablation}.png", n_train=len(train),
                  title=f"ablation: {args.ablation}")


def cmd_gen_data(args, cfg):
    out = Path(args.out or "data.csv")
    ds = build_dataset(cfg)
    save_csv(ds, out)
    if cfg.data is None:
        cfg.transition_matrix().to_csv(out.with_name(out.stem + "_q.csv"))
    log.info("wrote %d examples to %s", len(ds), out)


COMMANDS = {
    "train": cmd_train,
    "baseline": cmd_baseline,
    "ablate": cmd_ablate,
    "gen-data": cmd_gen_data,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--tau", type=float, help="label noise rate")
    common.add_argument("--noise", choices=NOISE_KINDS)
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--out", type=Path)
    common.add_argument("--data", type=Path, help="CSV dataset instead of generated blobs")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    common.add_argument("--no-plot", action="store_true", help="skip the PNG report")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="jointcorrect", description=__doc__.split("\n")[0] or None)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="run the configured mode (default: method)")
    sub.add_parser("baseline", parents=[common], help="standard or joint-only baseline")
    p = sub.add_parser("ablate", parents=[common], help="method vs. one ablation on shared data")
    p.add_argument("ablation", choices=sorted(ABLATIONS))
    sub.add_parser("gen-data", parents=[common], help="write a noisy blob dataset as CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        cfg = parse_config(args.config, _overrides(args))
        COMMANDS[args.command](args, cfg)
    except (ConfigError, FormatError) as exc:
        print(f"jointcorrect: error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, OSError, ValueError, IndexError) as exc:
        print(f"jointcorrect: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
