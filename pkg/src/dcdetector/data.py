"""Loading, windowing and instance normalisation of multivariate series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import IngestionError, ParameterError

NORM_EPS = 1e-5


@dataclass
class TimeSeriesDataset:
    values: np.ndarray  # (T, d)
    labels: np.ndarray | None = None  # (T,) in {0, 1}
    name: str = "series"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ParameterError(f"values must be a non-empty T x d matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("values must be finite")
        self.values = values
        if self.labels is not None:
            labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
            if labels.shape[0] != values.shape[0]:
                raise ParameterError(f"{labels.shape[0]} labels for {values.shape[0]} rows")
            if not np.all((labels == 0) | (labels == 1)):
                raise ParameterError("labels must be 0/1")
            self.labels = labels

    @property
    def length(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[1]

    @property
    def anomaly_ratio(self):
        return None if self.labels is None else float(self.labels.mean())


@dataclass(frozen=True)
class WindowSpec:
    win_size: int
    stride: int | None = None  # defaults to win_size (non-overlapping)

    @property
    def step(self):
        return self.win_size if self.stride is None else self.stride

    def validate(self, length=None):
        if self.win_size < 1:
            raise ParameterError(f"win_size must be >= 1, got {self.win_size}")
        if not 1 <= self.step <= self.win_size:
            raise ParameterError(f"stride must be in [1, {self.win_size}], got {self.step}")
        if length is not None and self.win_size > length:
            raise ParameterError(f"window {self.win_size} longer than series of length {length}")


@dataclass
class WindowBatch:
    windows: np.ndarray  # (B, W, d)
    origin_indices: np.ndarray  # (B,)
    labels: np.ndarray | None = None  # (B, W)

    def __len__(self):
        return self.windows.shape[0]

    def subset(self, idx):
        return WindowBatch(self.windows[idx], self.origin_indices[idx],
                           None if self.labels is None else self.labels[idx])


def _parse_row(fields, lineno, path):
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise IngestionError(f"{path}:{lineno}: non-numeric field in {fields!r}") from None


def load_csv(path, has_header=False, label_path=None, name=None):
    """Read a comma-separated values file (one row per timestamp)."""
    rows, width = [], None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if lineno == 1 and has_header:
                continue
            if not fields or all(not f.strip() for f in fields):
                continue
            row = _parse_row(fields, lineno, path)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise IngestionError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            if not all(math.isfinite(v) for v in row):
                raise IngestionError(f"{path}:{lineno}: non-finite value")
            rows.append(row)
    if not rows:
        raise IngestionError(f"{path}: no data rows")

    labels = None
    if label_path is not None:
        labels = load_labels(label_path)
        if len(labels) != len(rows):
            raise IngestionError(
                f"{label_path}:{len(labels)}: {len(labels)} labels but {len(rows)} data rows")
    return TimeSeriesDataset(np.array(rows), labels, name or str(path))


def load_labels(path):
    """Single-column 0/1 CSV; a non-numeric first line is taken as a header."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or not fields[0].strip():
                continue
            text = fields[0].strip()
            try:
                value = float(text)
            except ValueError:
                if lineno == 1 and not out:
                    continue
                raise IngestionError(f"{path}:{lineno}: label {text!r} is not numeric") from None
            if value not in (0.0, 1.0):
                raise IngestionError(f"{path}:{lineno}: label {text!r} is not 0/1")
            out.append(int(value))
    return np.array(out, dtype=np.int64)


def save_csv(path, values, header=None):
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in values:
            w.writerow([repr(float(v)) if values.dtype.kind == "f" else int(v) for v in row])


def slide_windows(ds, spec):
    """Cut ``floor((T - W) / stride) + 1`` windows; a short trailing remainder is dropped."""
    spec.validate(ds.length)
    W, step = spec.win_size, spec.step
    starts = np.arange(0, ds.length - W + 1, step)
    idx = starts[:, None] + np.arange(W)[None, :]
    labels = None if ds.labels is None else ds.labels[idx]
    return WindowBatch(ds.values[idx], starts, labels)


def instance_normalize_array(windows, eps=NORM_EPS):
    """Per window and channel: ``(x - mean) / (std + eps)`` with population std."""
    mean = windows.mean(axis=1, keepdims=True)
    std = windows.std(axis=1, keepdims=True)
    return (windows - mean) / (std + eps)


def instance_normalize(batch):
    return WindowBatch(instance_normalize_array(batch.windows), batch.origin_indices, batch.labels)


def score_threshold_split(ds, train_fraction):
    """Temporal prefix/suffix split at ``floor(T * train_fraction)``."""
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    cut = int(math.floor(ds.length * train_fraction))
    if cut < 1 or cut >= ds.length:
        raise ParameterError(f"split at {cut} leaves an empty side for T={ds.length}")

    def part(sl, suffix):
        labels = None if ds.labels is None else ds.labels[sl]
        return TimeSeriesDataset(ds.values[sl], labels, f"{ds.name}:{suffix}")

    return part(slice(0, cut), "train"), part(slice(cut, None), "test")


def windows_to_series(window_scores, origin_indices, length, fill=None):
    """Average per-window values back onto the timeline.

    Timestamps no window covers get ``fill`` (default: the minimum observed score).
    """
    window_scores = np.asarray(window_scores, dtype=np.float64)
    total = np.zeros(length)
    count = np.zeros(length)
    W = window_scores.shape[1]
    for s, row in zip(origin_indices, window_scores):
        total[s:s + W] += row
        count[s:s + W] += 1
    covered = count > 0
    out = np.empty(length)
    out[covered] = total[covered] / count[covered]
    if not covered.all():
        out[~covered] = out[covered].min() if fill is None else fill
    return out
