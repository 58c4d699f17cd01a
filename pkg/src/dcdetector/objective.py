"""Representation-discrepancy loss, point-wise anomaly score and thresholding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, ParameterError

CLAMP = 1e-12


@dataclass
class LossReport:
    loss_P: float
    loss_N: float
    total: float
    tensor: T.Tensor | None = None  # differentiable total


@dataclass
class ScoreSeries:
    scores: np.ndarray
    threshold: float
    decisions: np.ndarray


def kl_rowwise(a, b):
    """Per-row KL(a || b) over the last axis; both inputs clamped to >= 1e-12."""
    a, b = T.as_tensor(a), T.as_tensor(b)
    if a.shape != b.shape:
        raise ContractError(f"kl_rowwise: shapes differ, {a.shape} vs {b.shape}")
    la = T.log(T.maximum(a, CLAMP))
    lb = T.log(T.maximum(b, CLAMP))
    return T.sum_axis(T.mul(a, T.sub(la, lb)), -1)


def js_rowwise(a, b):
    """Per-row Jensen-Shannon divergence, bounded by log 2."""
    a, b = T.as_tensor(a), T.as_tensor(b)
    m = T.scale(T.add(a, b), 0.5)
    return T.scale(T.add(kl_rowwise(a, m), kl_rowwise(b, m)), 0.5)


def _pair_term(x, other_fixed, variant):
    """Discrepancy that pulls ``x`` relative to ``other_fixed`` (already stop-gradded if asked)."""
    if variant == "sym_kl":
        return T.add(kl_rowwise(x, other_fixed), kl_rowwise(other_fixed, x))
    if variant == "simple_kl":
        return kl_rowwise(x, other_fixed)
    if variant == "js":
        return js_rowwise(x, other_fixed)
    raise ParameterError(f"unknown loss variant {variant!r}")


def _check_aligned(patchwise, inpatch):
    if len(patchwise) != len(inpatch) or not patchwise:
        raise ContractError(f"representation lists differ in length: {len(patchwise)} vs {len(inpatch)}")
    for i, (n, p) in enumerate(zip(patchwise, inpatch)):
        if n.shape != p.shape:
            raise ContractError(f"map {i}: shapes differ, {n.shape} vs {p.shape}")


def discrepancy_loss(patchwise, inpatch, config=None, stopgrad_patchwise=True,
                     stopgrad_inpatch=True, variant="sym_kl"):
    """Training objective ``(loss_N - loss_P) / K`` over K (layer, scale) map pairs.

    ``loss_P`` compares the in-patch maps against (stopped) patch-wise maps and
    ``loss_N`` the reverse; each per-pair term is averaged over rows, heads and
    series, then summed over pairs. ``config`` (a DetectorConfig) overrides the
    keyword flags when given.
    """
    if config is not None:
        stopgrad_patchwise = config.stopgrad_patchwise
        stopgrad_inpatch = config.stopgrad_inpatch
        variant = config.loss_variant
    _check_aligned(patchwise, inpatch)
    loss_P = loss_N = None
    for n_map, p_map in zip(patchwise, inpatch):
        n_fixed = T.stop_gradient(n_map) if stopgrad_patchwise else n_map
        p_fixed = T.stop_gradient(p_map) if stopgrad_inpatch else p_map
        term_P = T.mean_axis(_pair_term(p_map, n_fixed, variant))
        term_N = T.mean_axis(_pair_term(n_map, p_fixed, variant))
        loss_P = term_P if loss_P is None else T.add(loss_P, term_P)
        loss_N = term_N if loss_N is None else T.add(loss_N, term_N)
    total = T.scale(T.sub(loss_N, loss_P), 1.0 / len(patchwise))
    return LossReport(loss_P.item(), loss_N.item(), total.item(), total)


def anomaly_score(patchwise, inpatch, n_series=None):
    """Point-wise score per window, shape ``(B, W)``.

    Symmetric row KL between the two branches, averaged over layers, scales,
    heads and channels. ``n_series`` is the channel count folded into the
    leading axis (``B*d``); defaults to 1.
    """
    _check_aligned(patchwise, inpatch)
    acc = None
    with T.no_grad():
        for n_map, p_map in zip(patchwise, inpatch):
            n_arr = n_map.data if isinstance(n_map, T.Tensor) else np.asarray(n_map)
            p_arr = p_map.data if isinstance(p_map, T.Tensor) else np.asarray(p_map)
            term = _sym_kl_rows_np(p_arr, n_arr).astype(np.float64)
            acc = term if acc is None else acc + term
    acc = acc / len(patchwise)  # (B*d, H, W)
    acc = acc.mean(axis=1)
    d = 1 if n_series is None else int(n_series)
    bd, W = acc.shape
    if bd % d:
        raise ContractError(f"leading axis {bd} not divisible by channel count {d}")
    return acc.reshape(bd // d, d, W).mean(axis=1)


def _sym_kl_rows_np(a, b):
    la = np.log(np.maximum(a, CLAMP))
    lb = np.log(np.maximum(b, CLAMP))
    return ((a - b) * (la - lb)).sum(axis=-1)


def apply_threshold(scores, mode="quantile", param=None):
    """Binary decisions ``scores >= delta``.

    ``mode="absolute"``: ``delta = param`` (default 1.0).
    ``mode="quantile"``: ``delta`` is the upper (1 - r) quantile of the scores
    for anomaly ratio ``r = param``, so ties at the cut are flagged.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if mode == "absolute":
        delta = 1.0 if param is None else float(param)
    elif mode == "quantile":
        if param is None or not 0.0 < float(param) < 1.0:
            raise ParameterError(f"quantile ratio must be in (0, 1), got {param}")
        delta = float(np.quantile(scores, 1.0 - float(param), method="higher"))
    else:
        raise ParameterError(f"unknown threshold mode {mode!r}")
    if not math.isfinite(delta):
        raise ParameterError("threshold is not finite")
    return ScoreSeries(scores, delta, (scores >= delta).astype(np.int64))
