"""Training loop, dataset presets, series scoring and model checkpoints."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .data import WindowSpec, slide_windows, windows_to_series
from .errors import ConfigError, CorruptCheckpointError, NonFiniteError, TrainingDivergedError
from .model import DCDetector, DetectorConfig
from .objective import anomaly_score, discrepancy_loss
from .optim import Adam, clip_grad_norm
from .rng import split_rngs
from .tensor import no_grad

log = logging.getLogger(__name__)

# Window and patch sizes per benchmark, with channel count and anomaly ratio.
PRESETS = {
    "MSL": dict(win_size=90, patch_sizes=[3, 5], channels=55, anomaly_ratio=0.105),
    "SMAP": dict(win_size=105, patch_sizes=[3, 5, 7], channels=25, anomaly_ratio=0.128),
    "PSM": dict(win_size=60, patch_sizes=[1, 3, 5], channels=25, anomaly_ratio=0.278),
    "SMD": dict(win_size=105, patch_sizes=[5, 7], channels=38, anomaly_ratio=0.042),
    "SWaT": dict(win_size=105, patch_sizes=[3, 5, 7], channels=51, anomaly_ratio=0.121),
    "NIPS-TS-SWAN": dict(win_size=36, patch_sizes=[1, 3], channels=38, anomaly_ratio=0.326),
    "NIPS-TS-GECCO": dict(win_size=90, patch_sizes=[1, 3, 5], channels=9, anomaly_ratio=0.011),
    "UCR": dict(win_size=105, patch_sizes=[3, 5, 7], channels=1, anomaly_ratio=0.006),
}


def preset(name):
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None


@dataclass
class TrainConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    lr: float = 1e-4
    batch_size: int = 128
    epochs: int = 3
    seed: int = 0
    stride: int | None = None
    grad_clip: float | None = None
    preset: str | None = None

    def __post_init__(self):
        if isinstance(self.detector, dict):
            self.detector = DetectorConfig.from_dict(self.detector)
        self.validate()

    def validate(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("grad_clip must be > 0 when set")
        WindowSpec(self.detector.win_size, self.stride).validate()

    @classmethod
    def from_dict(cls, d, preset_name=None):
        """Build from parsed JSON. A preset fills ``win_size``/``patch_sizes``;
        conflicting explicit values are rejected."""
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config fields: {sorted(unknown)}")
        det = dict(d.pop("detector", {}) or {})
        name = preset_name or d.get("preset")
        if preset_name and d.get("preset") and d["preset"] != preset_name:
            raise ConfigError(f"config preset {d['preset']!r} conflicts with --preset {preset_name!r}")
        if name:
            pr = preset(name)
            for key in ("win_size", "patch_sizes"):
                if key in det and list(np.atleast_1d(det[key])) != list(np.atleast_1d(pr[key])):
                    raise ConfigError(f"detector.{key}={det[key]} conflicts with preset {name} ({pr[key]})")
                det[key] = pr[key]
            d["preset"] = name
        return cls(detector=DetectorConfig.from_dict(det), **d)


@dataclass
class RunLog:
    steps: list = field(default_factory=list)  # dicts: epoch, step, loss_P, loss_N, total
    epoch_seconds: list = field(default_factory=list)

    def record(self, epoch, step, report):
        self.steps.append(dict(epoch=epoch, step=step, loss_P=report.loss_P,
                               loss_N=report.loss_N, total=report.total))

    def losses(self):
        return [(s["loss_P"], s["loss_N"], s["total"]) for s in self.steps]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "step", "loss_P", "loss_N", "total", "epoch_seconds"])
            for s in self.steps:
                secs = self.epoch_seconds[s["epoch"]] if s["epoch"] < len(self.epoch_seconds) else ""
                w.writerow([s["epoch"], s["step"], repr(s["loss_P"]), repr(s["loss_N"]),
                            repr(s["total"]), secs])


def train(dataset, config, checkpoint_path=None, log_path=None):
    """Fit a detector on ``dataset`` and return ``(model, run_log)``.

    Runs ``epochs * ceil(n_windows / batch_size)`` Adam steps; window order is
    reshuffled every epoch and the last partial batch is kept.
    """
    det = config.detector
    if dataset.channels != det.channels:
        det = DetectorConfig.from_dict({**det.to_dict(), "channels": dataset.channels})
        config = TrainConfig(**{**config.__dict__, "detector": det})
    rngs = split_rngs(config.seed)
    model = DCDetector(det, rng=rngs["init"])
    windows = slide_windows(dataset, WindowSpec(det.win_size, config.stride))
    opt = Adam(model.parameters(), lr=config.lr)
    run_log = RunLog()
    n = len(windows)
    n_batches = math.ceil(n / config.batch_size)
    step = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rngs["shuffle"].permutation(n)
        for b in range(n_batches):
            batch = windows.subset(order[b * config.batch_size:(b + 1) * config.batch_size])
            try:
                patchwise, inpatch = model.forward(batch, training=True, rng=rngs["dropout"])
                report = discrepancy_loss(patchwise, inpatch, det)
                if not all(math.isfinite(v) for v in (report.loss_P, report.loss_N, report.total)):
                    raise NonFiniteError("loss is not finite")
                opt.zero_grad()
                report.tensor.backward()
            except NonFiniteError as exc:
                raise TrainingDivergedError(
                    f"non-finite value at epoch {epoch} step {step}: {exc}", epoch, step) from exc
            if config.grad_clip is not None:
                clip_grad_norm(model.parameters(), config.grad_clip)
            opt.step()
            run_log.record(epoch, step, report)
            step += 1
        run_log.epoch_seconds.append(time.perf_counter() - t0)
        last = run_log.steps[-1]
        log.info("epoch %d: loss_P=%.6g loss_N=%.6g total=%.3g (%.1fs)", epoch,
                 last["loss_P"], last["loss_N"], last["total"], run_log.epoch_seconds[-1])
    if checkpoint_path is not None:
        checkpoint_save(model, checkpoint_path)
    if log_path is not None:
        run_log.to_csv(log_path)
    return model, run_log


def window_scores(model, windows, batch_size=128):
    """Point-wise scores ``(B, W)`` for a WindowBatch, eval mode."""
    out = []
    d = model.config.channels
    with no_grad():
        for start in range(0, len(windows), batch_size):
            batch = windows.subset(slice(start, start + batch_size))
            patchwise, inpatch = model.forward(batch, training=False)
            out.append(anomaly_score(patchwise, inpatch, n_series=d))
    return np.concatenate(out, axis=0)


def score_series(model, dataset, stride=None, batch_size=128):
    """Score every timestamp of ``dataset``.

    Overlapping windows are averaged; timestamps no window reaches (the
    trailing remainder) get the minimum observed score.
    """
    windows = slide_windows(dataset, WindowSpec(model.config.win_size, stride))
    scores = window_scores(model, windows, batch_size)
    return windows_to_series(scores, windows.origin_indices, dataset.length)


def checkpoint_save(model, path, extra=None):
    meta = {"detector": model.config.to_dict()}
    if extra:
        meta.update(extra)
    checkpoint.save_tensors(path, model.state_dict(), meta)


def checkpoint_load(path, expected_config=None):
    """Rebuild a DCDetector; ``expected_config`` must match the stored one if given."""
    tensors, meta = checkpoint.load_tensors(path)
    if "detector" not in meta:
        raise CorruptCheckpointError("manifest has no detector config")
    try:
        cfg = DetectorConfig.from_dict(meta["detector"])
    except (ConfigError, TypeError) as exc:
        raise CorruptCheckpointError(f"bad detector config in manifest: {exc}") from None
    if expected_config is not None and expected_config.to_dict() != cfg.to_dict():
        diff = {k: (v, expected_config.to_dict().get(k)) for k, v in cfg.to_dict().items()
                if expected_config.to_dict().get(k) != v}
        raise ConfigError(f"checkpoint architecture differs from requested: {diff}")
    model = DCDetector(cfg, seed=0)
    try:
        model.load_state_dict(tensors)
    except ConfigError as exc:
        raise CorruptCheckpointError(str(exc)) from None
    return model


def load_train_config(path, preset_name=None):
    with open(path, encoding="utf-8") as fh:
        return TrainConfig.from_dict(json.load(fh), preset_name)
