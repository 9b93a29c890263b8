"""Command-line entry point: ``ebml <subcommand> --config file.json``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..autodiff import RngStream
from . import runners
from .config import ConfigError, load_config
from .datasets import Dataset, save_csv
from .io import CheckpointError, checkpoint_load, checkpoint_save, save_metrics, save_result

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("ebml")

SUBCOMMANDS = {
    "train": sorted(runners.TRAIN),
    "evaluate": sorted(runners.EVALUATE),
    "sample": sorted(runners.SAMPLE),
    "tune": ["tune"],
    "bound": ["bound"],
    "bootstrap": ["bootstrap"],
    "generate": None,
}


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.get("output", f"runs/{cfg['task']}"))


def _checkpoint_dir(cfg, out: Path) -> Path:
    return Path(cfg["checkpoint"]) if "checkpoint" in cfg else out


def execute(command: str, cfg: dict, out: Path) -> dict:
    """Run one subcommand and write its artifacts under ``out``."""
    allowed = SUBCOMMANDS[command]
    task = cfg["task"]
    if allowed is not None and task not in allowed:
        raise ConfigError(f"task {task!r} is not supported by '{command}'", "$.task")
    root = RngStream(cfg["seed"], "root")
    files = {}
    if command == "generate":
        ds = runners.load_data(cfg)
        run = runners.RunOutput([(0, "n_rows", len(ds)), (0, "n_features", ds.features.shape[1] if ds.features.ndim == 2 else 0)],
                                None, {"provenance": ds.provenance, "n_rows": len(ds),
                                       "meta": {k: v for k, v in ds.meta.items()}})
        files["data.csv"] = ds
    elif command in ("evaluate", "sample"):
        store = checkpoint_load(_checkpoint_dir(cfg, out))
        if command == "evaluate":
            run = runners.EVALUATE[task](cfg, root, store)
        else:
            n = int(cfg.get("sample", {}).get("n", 100))
            S = np.atleast_2d(runners.SAMPLE[task](cfg, root, store, n))
            run = runners.RunOutput([(0, f"mean_{j}", float(m)) for j, m in enumerate(S.mean(axis=0))],
                                    None, {"n": int(S.shape[0]), "dim": int(S.shape[1])})
            files["samples.csv"] = Dataset(S)
    else:
        run = runners.TRAIN[task](cfg, root)
    # artifacts are written only after the run succeeded
    out.mkdir(parents=True, exist_ok=True)
    prefix = {"evaluate": "eval_", "sample": "sample_"}.get(command, "")
    save_metrics(out / f"{prefix}metrics.csv", run.metrics)
    if run.store is not None:
        checkpoint_save(out, run.store, {"task": task, "seed": cfg["seed"]})
    for name, ds in files.items():
        save_csv(out / name, ds)
    result = {"task": task, "command": command, "seed": cfg["seed"], **run.result}
    save_result(out / f"{prefix}result.json", result)
    return result


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ebml", description="Run energy-based learning experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print(f"config error: $.seed: {args.seed} is not an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.seed)
        out = _out_dir(args, cfg)
        result = execute(args.command, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any module failure maps to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s", out)
    print(f"{args.command} {cfg['task']}: results in {out}")
    for k in ("hoeffding_epsilon", "test_error", "wcss", "elbo", "nll", "test_accuracy", "train_loss"):
        if k in result:
            print(f"  {k} = {result[k]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
