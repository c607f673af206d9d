"""Command-line front end: generate / learn-dict / train / eval / report.

Every command takes a config file (flat key=value, see config.SCHEMA) plus
optional ``-O key=value`` overrides, and writes its outputs under the
config's output directory. Exit codes: 0 success, 1 usage/config error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .config import ConfigError, load_config, resolve_config


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: _Parser, needs_dataset: bool = False):
    p.add_argument("-c", "--config", help="config file (defaults apply if omitted)")
    p.add_argument("-O", "--override", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config key")
    if needs_dataset:
        p.add_argument("--dataset", required=True, help="dataset container file")


def _load_cfg(args):
    if args.config:
        return load_config(args.config, args.override)
    return resolve_config(overrides=args.override)


def _outdir(cfg) -> Path:
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    samples = pipeline.generate_dataset(cfg)
    path = out / "dataset.btc"
    pipeline.save_dataset(path, samples, cfg)
    print(f"wrote {path} ({len(samples)} samples, "
          f"{cfg['dataset.num_ues']} UEs, config {cfg.config_hash})")
    return 0


def cmd_learn_dict(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    samples = pipeline.load_dataset(args.dataset, cfg)
    d = pipeline.learn_dictionary(samples, cfg)
    path = out / f"dict_{cfg['dict.method']}.btc"
    pipeline.save_dictionary(path, d, cfg)
    err = d.recon_errors[-1] if d.recon_errors else float("nan")
    print(f"wrote {path} ({d.method}, {d.num_atoms} atoms, final fit error {err:.4g})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    samples = pipeline.load_dataset(args.dataset, cfg)
    dictionary = pipeline.load_dictionary(args.dict) if args.dict else None
    if dictionary is None and cfg["dlista.init"] == "spca":
        dictionary = pipeline.learn_dictionary(samples, cfg)
    params, metrics, _ = pipeline.train_from_config(samples, cfg, dictionary)

    ckpt = out / "dlista.btc"
    pipeline.save_checkpoint(ckpt, params, cfg)
    rows = [(m.epoch, m.train_nmse_db, m.val_nmse_db, m.lr_gamma, m.lr_theta, m.lr_psi)
            for m in metrics]
    pipeline.write_csv(out / "train_metrics.csv",
                       ["epoch", "train_nmse_db", "val_nmse_db",
                        "lr_gamma", "lr_theta", "lr_psi"],
                       rows, cfg, cfg["train.seed"])
    best = min(m.val_nmse_db for m in metrics)
    print(f"wrote {ckpt} (best val NMSE {best:.2f} dB over {len(metrics)} epochs)")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    samples = pipeline.load_dataset(args.dataset, cfg)
    dictionary = pipeline.load_dictionary(args.dict) if args.dict else None
    checkpoint = pipeline.load_checkpoint(args.checkpoint) if args.checkpoint else None
    if "dlista" in cfg["eval.estimators"] and checkpoint is None:
        raise ConfigError("eval.estimators includes dlista but no --checkpoint given")

    results = pipeline.evaluate(samples, cfg, dictionary, checkpoint, subset=args.subset)
    seed = cfg["scenario.seed"]
    for name, vals in results.nmse.items():
        pipeline.write_cdf_csv(out / f"nmse_cdf_{name}.csv", vals, cfg, seed)
        print(f"nmse[{name}]: median {np.median(vals):.2f} dB over {vals.size} samples")
    for name, vals in results.se.items():
        pipeline.write_cdf_csv(out / f"se_cdf_{name}.csv", vals, cfg, seed)
        print(f"se[{name}]: median {np.median(vals):.3f} bits/s/Hz over {vals.size} UEs")
    return 0


def cmd_report(args) -> int:
    rows = []
    for run in args.rundir:
        for path in sorted(Path(run).glob("*_cdf_*.csv")):
            vals, _ = pipeline.read_cdf_csv(path)
            kind, tag = path.stem.split("_cdf_", 1)
            rows.append((Path(run).name, kind, tag,
                         float(np.quantile(vals, 0.5)), float(np.quantile(vals, 0.8))))
    if not rows:
        print("no CDF files found", file=sys.stderr)
        return 1
    header = ["run", "kind", "method", "median", "p80"]
    print(",".join(header))
    for row in rows:
        print(",".join(pipeline.format_cell(c) for c in row))
    if args.out:
        lines = [",".join(header)] + [",".join(pipeline.format_cell(c) for c in row)
                                      for row in rows]
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="beamest",
                     description="mmWave channel estimation from beamformed "
                                 "measurements: dataset generation, dictionary "
                                 "learning, estimator training and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a channel/measurement dataset")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("learn-dict", help="fit a sparsifying dictionary")
    _add_common(p, needs_dataset=True)
    p.set_defaults(func=cmd_learn_dict)

    p = sub.add_parser("train", help="train the unrolled estimator")
    _add_common(p, needs_dataset=True)
    p.add_argument("--dict", help="dictionary container for initialization")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate estimators and beam baselines")
    _add_common(p, needs_dataset=True)
    p.add_argument("--dict", help="dictionary container (for ista)")
    p.add_argument("--checkpoint", help="trained model container (for dlista)")
    p.add_argument("--subset", default="test", choices=["train", "val", "test", "all"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="merge CDF files from one or more runs")
    p.add_argument("rundir", nargs="+")
    p.add_argument("--out", help="also write the table to this CSV file")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
