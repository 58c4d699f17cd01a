"""Command-line entry point: ``dcdetector {synth,train,score,eval,run-benchmark}``.

Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.
Errors are reported on stderr as a single line ``error: <Kind>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .data import load_csv, load_labels, save_csv
from .errors import DCDetectorError, NonFiniteError, SpecError, TrainingDivergedError
from .metrics import compute_metrics
from .objective import apply_threshold
from .synth import generate, load_spec
from .trainer import (PRESETS, TrainConfig, checkpoint_load, load_train_config, preset,
                      score_series, train)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(DCDetectorError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed_override(cfg):
    env = os.environ.get("DCDET_SEED")
    if env is None:
        return cfg
    try:
        cfg.seed = int(env)
    except ValueError:
        raise UsageError(f"DCDET_SEED must be an integer, got {env!r}") from None
    return cfg


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_scores(path, result):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "score", "decision"])
        for i, (s, d) in enumerate(zip(result.scores, result.decisions)):
            w.writerow([i, repr(float(s)), int(d)])


def _read_decisions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "decision" not in reader.fieldnames:
            raise UsageError(f"{path}: missing 'decision' column")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(int(row["decision"]))
            except (TypeError, ValueError):
                raise UsageError(f"{path}:{lineno}: bad decision {row['decision']!r}") from None
    return np.array(out, dtype=np.int64)


def _threshold(scores, args, default_ratio):
    if args.threshold_mode == "absolute":
        return apply_threshold(scores, "absolute", args.delta)
    ratio = args.ratio if args.ratio is not None else default_ratio
    if ratio is None:
        raise UsageError("quantile mode needs --ratio, --labels or --preset")
    return apply_threshold(scores, "quantile", ratio)


# -- subcommands ------------------------------------------------------------

def cmd_synth(args):
    spec = load_spec(args.spec)
    ds = generate(spec, name=Path(args.out_prefix).name)
    prefix = str(args.out_prefix)
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    save_csv(f"{prefix}_values.csv", ds.values)
    save_csv(f"{prefix}_labels.csv", ds.labels)
    _write_json(f"{prefix}_spec.json", spec.to_dict())


def _train_config(args):
    if args.config:
        cfg = load_train_config(args.config, args.preset)
    else:
        cfg = TrainConfig.from_dict({}, args.preset)
    return _seed_override(cfg)


def cmd_train(args):
    cfg = _train_config(args)
    ds = load_csv(args.data, has_header=args.header)
    train(ds, cfg, checkpoint_path=args.out, log_path=args.log)


def cmd_score(args):
    model = checkpoint_load(args.model)
    ds = load_csv(args.data, has_header=args.header, label_path=args.labels)
    scores = score_series(model, ds, stride=args.stride)
    default_ratio = None
    if ds.labels is not None and 0 < ds.anomaly_ratio < 1:
        default_ratio = ds.anomaly_ratio
    elif args.preset:
        default_ratio = preset(args.preset)["anomaly_ratio"]
    _write_scores(args.out, _threshold(scores, args, default_ratio))


def cmd_eval(args):
    pred = _read_decisions(args.scores)
    gt = load_labels(args.labels)
    report = compute_metrics(pred, gt, adjust=args.adjust)
    _write_json(args.out, report.to_dict())


def _bench_one(spec_path, cfg, workdir):
    t0 = time.perf_counter()
    spec = load_spec(spec_path)
    ds = generate(spec, name=spec_path.stem)
    model, _ = train(ds, cfg, checkpoint_path=workdir / f"{spec_path.stem}.ckpt")
    scores = score_series(model, ds)
    if not 0 < ds.anomaly_ratio < 1:
        raise SpecError("spec has no labelled anomalies to threshold against", "injections")
    result = apply_threshold(scores, "quantile", ds.anomaly_ratio)
    report = compute_metrics(result.decisions, ds.labels, adjust=True)
    return dict(report.to_dict(), seconds=round(time.perf_counter() - t0, 3))


def cmd_run_benchmark(args):
    suite = Path(args.spec_suite)
    if not suite.is_dir():
        raise UsageError(f"{suite}: not a directory")
    specs = sorted(suite.glob("*.json"))
    if not specs:
        raise UsageError(f"{suite}: no spec files (*.json)")
    cfg = _train_config(args)
    workdir = Path(args.workdir) if args.workdir else Path(args.out).parent / "bench_models"
    workdir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for path in specs:
        try:
            entries[path.name] = _bench_one(path, cfg, workdir)
        except (DCDetectorError, OSError) as exc:
            entries[path.name] = {"error": f"{type(exc).__name__}: {exc}", "f1": None}
    _write_json(args.out, {"seed": cfg.seed, "specs": entries})


# -- parser ----------------------------------------------------------------

def build_parser():
    p = _Parser(prog="dcdetector", description="Dual-attention time-series anomaly detector.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a labelled synthetic series")
    s.add_argument("--spec", required=True)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_synth)

    def config_flags(q):
        q.add_argument("--config", help="JSON run config")
        q.add_argument("--preset", choices=sorted(PRESETS))

    t = sub.add_parser("train", help="fit a detector on a values CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--log", help="RunLog CSV path")
    t.add_argument("--header", action="store_true", help="data CSV has a header row")
    config_flags(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("score", help="score a values CSV with a trained model")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--labels", help="label CSV; its anomaly ratio is the default quantile")
    c.add_argument("--header", action="store_true")
    c.add_argument("--stride", type=int)
    c.add_argument("--preset", choices=sorted(PRESETS), help="take the default ratio from a preset")
    c.add_argument("--threshold-mode", choices=["quantile", "absolute"], default="quantile")
    c.add_argument("--ratio", type=float)
    c.add_argument("--delta", type=float, default=1.0)
    c.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="metrics from a score CSV and labels")
    e.add_argument("--scores", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--adjust", action="store_true", help="apply point adjustment")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("run-benchmark", help="synth, train, score and eval every spec in a directory")
    b.add_argument("--spec-suite", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--workdir", help="where per-spec checkpoints go")
    config_flags(b)
    b.set_defaults(func=cmd_run_benchmark)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (TrainingDivergedError, NonFiniteError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SpecError as exc:
        where = f"{exc.field}: " if exc.field else ""
        print(f"error: SpecError: {where}{exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DCDetectorError, OSError, json.JSONDecodeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
