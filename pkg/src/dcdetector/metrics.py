"""Point-adjusted precision / recall / F1."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    adjusted: bool

    def to_dict(self):
        return asdict(self)


def _as_binary(x, name):
    arr = np.asarray(x).reshape(-1)
    if not np.all((arr == 0) | (arr == 1)):
        raise ContractError(f"{name} must be 0/1")
    return arr.astype(np.int64)


def _check_lengths(pred, gt):
    if pred.shape[0] != gt.shape[0]:
        raise ContractError(f"length mismatch: {pred.shape[0]} predictions vs {gt.shape[0]} labels")


def segments(gt):
    """``(start, stop)`` pairs of maximal runs of ones."""
    gt = np.asarray(gt).astype(np.int8)
    edges = np.diff(np.concatenate(([0], gt, [0])))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def point_adjust(pred, gt):
    """Mark a whole ground-truth segment detected if any point in it is predicted."""
    pred = _as_binary(pred, "pred")
    gt = _as_binary(gt, "gt")
    _check_lengths(pred, gt)
    out = pred.copy()
    for s, e in segments(gt):
        if out[s:e].any():
            out[s:e] = 1
    return out


def compute_metrics(pred, gt, adjust=False):
    pred = _as_binary(pred, "pred")
    gt = _as_binary(gt, "gt")
    _check_lengths(pred, gt)
    if adjust:
        pred = point_adjust(pred, gt)
    tp = int(np.sum((pred == 1) & (gt == 1)))
    fp = int(np.sum((pred == 1) & (gt == 0)))
    fn = int(np.sum((pred == 0) & (gt == 1)))
    tn = int(np.sum((pred == 0) & (gt == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (tp + tn) / len(gt) if len(gt) else 0.0
    return MetricsReport(accuracy, precision, recall, f1, tp, fp, fn, tn, bool(adjust))
