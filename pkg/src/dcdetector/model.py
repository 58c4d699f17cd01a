"""Dual-attention detector network.

For each patch size ``p`` (with ``N = W // p`` patches per window) a window is
viewed two ways, with channels folded into the batch axis:

* patch-wise view: ``N`` tokens, each a run of ``p`` consecutive points;
* in-patch view: ``p`` tokens, token ``j`` holding the ``j``-th point of
  every patch (a length-``N`` vector).

Each view gets its own embedding. Every encoder layer owns one layer norm
and one pair of query/key projections that both views share. The softmax
attention weights themselves are the representations; there is no value or
output projection. Maps are up-sampled to ``W x W`` (repeat-interleave for
the patch-wise view, tiling for the in-patch view) and renormalised so every
row is a distribution.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .data import WindowBatch, instance_normalize_array
from .errors import ConfigError
from .rng import split_rngs

LOSS_VARIANTS = ("sym_kl", "simple_kl", "js")


@dataclass
class DetectorConfig:
    win_size: int = 60
    patch_sizes: list = field(default_factory=lambda: [1, 3, 5])
    d_model: int = 256
    n_heads: int = 1
    n_layers: int = 3
    channels: int = 1
    dropout: float = 0.05
    stopgrad_patchwise: bool = True
    stopgrad_inpatch: bool = True
    loss_variant: str = "sym_kl"
    instance_norm: bool = True

    def __post_init__(self):
        self.patch_sizes = [int(p) for p in self.patch_sizes]
        self.validate()

    def validate(self):
        if self.win_size < 1:
            raise ConfigError(f"win_size must be >= 1, got {self.win_size}")
        if not self.patch_sizes:
            raise ConfigError("patch_sizes must not be empty")
        for p in self.patch_sizes:
            if p < 1 or self.win_size % p:
                raise ConfigError(f"patch size {p} does not divide win_size {self.win_size}")
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.n_layers < 1:
            raise ConfigError("n_layers must be >= 1")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"loss_variant must be one of {LOSS_VARIANTS}")

    @property
    def head_dim(self):
        return self.d_model // self.n_heads

    @property
    def n_maps(self):
        """Number of (layer, scale) pairs per branch."""
        return self.n_layers * len(self.patch_sizes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown detector config fields: {sorted(unknown)}")
        return cls(**d)


def sinusoidal_table(n_pos, d_model):
    """Fixed positional encoding, shape ``(n_pos, d_model)``."""
    pos = np.arange(n_pos, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, d_model, 2, dtype=np.float64) * (-math.log(10000.0) / d_model))
    pe = np.zeros((n_pos, d_model))
    pe[:, 0::2] = np.sin(pos * div)
    pe[:, 1::2] = np.cos(pos * div)[:, : d_model // 2]
    return pe


def patchify(windows, p):
    """Split ``(B, W, d)`` windows into the two token views for patch size ``p``.

    Returns ``(size_view, num_view)`` with shapes ``(B*d, N, p)`` and
    ``(B*d, p, N)``; rows are ordered batch-major, channel-minor.
    """
    windows = np.asarray(windows)
    B, W, d = windows.shape
    if p < 1 or W % p:
        raise ConfigError(f"patch size {p} does not divide window length {W}")
    series = np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(B * d, W)
    size_view = series.reshape(B * d, W // p, p)
    num_view = np.ascontiguousarray(size_view.transpose(0, 2, 1))
    return size_view, num_view


def upsample_patchwise(attn, p):
    """``(..., N, N) -> (..., N*p, N*p)``: each entry becomes a p x p block, rows / p."""
    up = T.repeat_interleave(T.repeat_interleave(attn, -1, p), -2, p)
    return T.div_scalar(up, p) if p > 1 else up


def upsample_inpatch(attn, n_patches):
    """``(..., p, p) -> (..., p*n, p*n)``: whole map tiled n x n times, rows / n."""
    up = T.tile(T.tile(attn, -1, n_patches), -2, n_patches)
    return T.div_scalar(up, n_patches) if n_patches > 1 else up


class DCDetector:
    """Parameters plus forward pass. ``params`` maps names to leaf tensors."""

    def __init__(self, config, seed=0, rng=None, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else split_rngs(seed)["init"]
        self.params = {}
        cfg = config
        for s, p in enumerate(cfg.patch_sizes):
            n = cfg.win_size // p
            self._linear(f"embed_size.{s}", p, cfg.d_model, rng)
            self._linear(f"embed_num.{s}", n, cfg.d_model, rng)
        dh = cfg.head_dim
        bound = 1.0 / math.sqrt(dh)
        for layer in range(cfg.n_layers):
            for name in ("w_q", "w_k"):
                self._add(f"layers.{layer}.{name}", rng.uniform(-bound, bound, (cfg.n_heads, dh, dh)))
            self._add(f"layers.{layer}.ln_gamma", np.ones(cfg.d_model))
            self._add(f"layers.{layer}.ln_beta", np.zeros(cfg.d_model))
        self._pos = {}

    def _add(self, name, arr):
        self.params[name] = T.Tensor(arr, requires_grad=True, dtype=self.dtype)

    def _linear(self, prefix, fan_in, fan_out, rng):
        bound = 1.0 / math.sqrt(fan_in)
        self._add(f"{prefix}.weight", rng.uniform(-bound, bound, (fan_in, fan_out)))
        self._add(f"{prefix}.bias", rng.uniform(-bound, bound, (fan_out,)))

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ConfigError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, t in self.params.items():
            arr = np.asarray(state[k])
            if arr.shape != t.shape:
                raise ConfigError(f"parameter {k}: shape {arr.shape} != expected {t.shape}")
            t.data = arr.astype(self.dtype).copy()

    def positional(self, n_tokens):
        if n_tokens not in self._pos:
            self._pos[n_tokens] = T.Tensor(sinusoidal_table(n_tokens, self.config.d_model), dtype=self.dtype)
        return self._pos[n_tokens]

    # -- forward pieces ----------------------------------------------
    def embed(self, tokens, branch, scale, training=False, rng=None):
        """Affine value projection + sinusoidal position + dropout.

        ``tokens``: ``(B*d, n_tokens, width)``; ``branch`` is ``"size"`` or ``"num"``.
        """
        if branch not in ("size", "num"):
            raise ConfigError(f"unknown branch {branch!r}")
        w = self.params[f"embed_{branch}.{scale}.weight"]
        b = self.params[f"embed_{branch}.{scale}.bias"]
        if not isinstance(tokens, T.Tensor):
            tokens = T.Tensor(tokens, dtype=self.dtype)
        if tokens.shape[-1] != w.shape[0]:
            raise ConfigError(f"{branch} embedding {scale} expects width {w.shape[0]}, got {tokens.shape[-1]}")
        out = T.matmul(tokens, w) + b + self.positional(tokens.shape[-2])
        return T.dropout(out, self.config.dropout, training, rng)

    def attention(self, layer, x, training=False, rng=None):
        """Softmax attention weights ``(B*d, H, n, n)`` for embedded tokens ``x``."""
        ln = T.layer_norm_last(x, self.params[f"layers.{layer}.ln_gamma"], self.params[f"layers.{layer}.ln_beta"])
        return self.attention_weights(layer, ln, training, rng)

    def attention_weights(self, layer, x, training=False, rng=None):
        """Scaled dot-product softmax of already-normalised tokens ``x``."""
        cfg = self.config
        if not isinstance(x, T.Tensor):
            x = T.Tensor(x, dtype=self.dtype)
        bd, n, _ = x.shape
        heads = T.permute(T.reshape(x, (bd, n, cfg.n_heads, cfg.head_dim)), (0, 2, 1, 3))
        q = T.matmul(heads, self.params[f"layers.{layer}.w_q"])
        k = T.matmul(heads, self.params[f"layers.{layer}.w_k"])
        scores = T.scale(T.matmul(q, T.transpose_last2(k)), 1.0 / math.sqrt(cfg.head_dim))
        return T.dropout(T.softmax_last(scores), cfg.dropout, training, rng)

    def dual_attention(self, layer, size_emb, num_emb, training=False, rng=None):
        """Patch-wise ``(.., H, N, N)`` and in-patch ``(.., H, p, p)`` maps for one layer."""
        return (self.attention(layer, size_emb, training, rng),
                self.attention(layer, num_emb, training, rng))

    def forward(self, batch, training=False, rng=None):
        """Return ``(patchwise, inpatch)``: lists of ``(B*d, H, W, W)`` maps.

        Lists are ordered scale-major, layer-minor (index ``s * L + l``).
        """
        cfg = self.config
        windows = batch.windows if isinstance(batch, WindowBatch) else np.asarray(batch)
        if windows.ndim != 3 or windows.shape[1] != cfg.win_size:
            raise ConfigError(f"expected windows of shape (B, {cfg.win_size}, d), got {windows.shape}")
        if windows.shape[2] != cfg.channels:
            raise ConfigError(f"model built for {cfg.channels} channels, got {windows.shape[2]}")
        if training and cfg.dropout > 0 and rng is None:
            raise ConfigError("training forward with dropout needs an rng")
        if cfg.instance_norm:
            windows = instance_normalize_array(windows)
        windows = windows.astype(self.dtype)

        patchwise, inpatch = [], []
        for s, p in enumerate(cfg.patch_sizes):
            n = cfg.win_size // p
            size_view, num_view = patchify(windows, p)
            size_emb = self.embed(size_view, "size", s, training, rng)
            num_emb = self.embed(num_view, "num", s, training, rng)
            for layer in range(cfg.n_layers):
                attn_n, attn_p = self.dual_attention(layer, size_emb, num_emb, training, rng)
                patchwise.append(upsample_patchwise(attn_n, p))
                inpatch.append(upsample_inpatch(attn_p, n))
        return patchwise, inpatch

    __call__ = forward
