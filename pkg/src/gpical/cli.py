"""Command line entry point: ``gpical {map,train,evaluate}``.

Each command resolves its configuration (preset, then ``--config`` file,
then ``--seed`` and ``--set key=value`` overrides), writes a JSON manifest
into ``--out-dir`` and then produces CSV files. Exit codes: 0 success,
2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .calibrate import LossChoice, NonFiniteLossError, train
from .detector import angle_delay_map, grid_for, write_map_csv
from .evaluation import (RunFailure, compare, aggregate, kappa_error, write_roc_csv,
                         write_summary_csv)
from .scenario import ConfigError, GainPhase, RandomStreams, draw_batch, draw_gain_phase, load_config
from .signal import synthesize_batch, write_matrix_csv

CONFIG_ENV = "GPICAL_CONFIG"
LOSS_FLAGS = {"max": LossChoice.MAP_MAX, "norm": LossChoice.RECONSTRUCTION}


class UsageError(Exception):
    pass


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {pair!r}")
        out[key.strip()] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=os.environ.get(CONFIG_ENV),
                        help=f"YAML config or run manifest (default: ${CONFIG_ENV})")
    common.add_argument("--preset", default="desk", choices=["desk", "table1"],
                        help="base parameter set; table1 is the full-scale regime")
    common.add_argument("--seed", type=int, help="64-bit seed, overrides the config")
    common.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        help="override one config field; repeatable, last wins")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker/BLAS thread bound")

    parser = argparse.ArgumentParser(prog="gpical", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("map", parents=[common], help="angle-delay maps with true and ideal kappa")
    p = sub.add_parser("train", parents=[common], help="learn kappa from unlabeled data")
    p.add_argument("--loss", choices=sorted(LOSS_FLAGS), default="max")
    p.add_argument("--log-timing", action="store_true",
                   help="add a wall-clock column to the training log (not reproducible)")
    p = sub.add_parser("evaluate", parents=[common], help="ROC and RMSE comparison")
    p.add_argument("--n-realizations", type=int, help="impairment realizations to average")
    return parser


def _resolve(args):
    overrides = parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    config = load_config(args.config, overrides, preset=args.preset)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return config, out


def write_manifest(path: Path, config, argv, outputs) -> None:
    manifest = {
        "command": list(argv),
        "seed": config.seed,
        "version": __version__,
        "started": datetime.now(timezone.utc).isoformat(),
        "outputs": [str(p) for p in outputs],
        "config": config.to_dict(),
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def write_kappa_csv(path: Path, kappa) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "re", "im"])
        for n, k in enumerate(np.asarray(kappa.kappa)):
            writer.writerow([n, repr(float(k.real)), repr(float(k.imag))])


def read_kappa_csv(path) -> GainPhase:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GainPhase(data[:, 1] + 1j * data[:, 2])


def cmd_map(config, out: Path, argv) -> None:
    files = [out / "map_known.csv", out / "map_uncompensated.csv", out / "observation.csv"]
    write_manifest(out / "manifest_map.json", config, argv, files)
    streams = RandomStreams(config.seed)
    kappa_true = draw_gain_phase(config, streams.child(0).generator("kappa"))
    rng = streams.generator("map")
    draws = draw_batch(config, rng, 1, t=1)
    obs = synthesize_batch(draws, kappa_true, config.n0, rng, config)[0]
    grid = grid_for(obs.truth, config)
    known = angle_delay_map(obs, obs.x, kappa_true, grid, config)
    ideal = angle_delay_map(obs, obs.x, GainPhase.ideal(config.n_antennas), grid, config)
    scale = known.values.max()
    write_map_csv(files[0], known, scale)
    write_map_csv(files[1], ideal, scale)
    write_matrix_csv(files[2], obs.y)


def cmd_train(config, out: Path, argv, loss: str, log_timing: bool = False) -> None:
    choice = LOSS_FLAGS[loss]
    files = [out / f"kappa_{loss}.csv", out / f"train_log_{loss}.csv", out / "kappa_true.csv"]
    write_manifest(out / f"manifest_train_{loss}.json", config, argv, files)
    streams = RandomStreams(config.seed).child(0)
    kappa_true = draw_gain_phase(config, streams.generator("kappa"))
    write_kappa_csv(files[2], kappa_true)
    start = time.perf_counter()
    with open(files[1], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "loss", "kappa_error"] + (["wall_clock_ms"] if log_timing else []))
        writer.writerow([0, "", repr(kappa_error(np.ones(config.n_antennas), kappa_true))]
                        + (["0.0"] if log_timing else []))

        def log(it, value, kappa_hat):
            row = [it, repr(value), repr(kappa_error(kappa_hat, kappa_true))]
            if log_timing:
                row.append(f"{1000 * (time.perf_counter() - start):.1f}")
            writer.writerow(row)

        kappa_hat, _ = train(config, choice, kappa_true, streams, callback=log)
    write_kappa_csv(files[0], kappa_hat)


def cmd_evaluate(config, out: Path, argv, n_realizations: int | None, workers: int) -> None:
    n = config.n_gpi_realizations if n_realizations is None else n_realizations
    if n < 1:
        raise UsageError("--n-realizations must be >= 1")
    files = [out / "roc.csv", out / "summary.csv"]
    write_manifest(out / "manifest_evaluate.json", config.replace(n_gpi_realizations=n), argv, files)
    reports = aggregate(compare(config, n, workers=workers))
    write_roc_csv(files[0], reports)
    write_summary_csv(files[1], reports)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config, out = _resolve(args)
        with threadpool_limits(args.threads):
            if args.command == "map":
                cmd_map(config, out, argv)
            elif args.command == "train":
                cmd_train(config, out, argv, args.loss, args.log_timing)
            else:
                cmd_evaluate(config, out, argv, args.n_realizations, args.threads)
    except (ConfigError, UsageError, OSError) as exc:
        print(f"gpical: error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteLossError, RunFailure) as exc:
        print(f"gpical: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
