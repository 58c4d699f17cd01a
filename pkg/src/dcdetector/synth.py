"""Labelled synthetic series with point and pattern anomalies.

Base signal per channel: a sum of unit-amplitude sinusoids (frequencies in
cycles per 100 steps, random phase per channel) plus Gaussian noise. All
random draws happen before any injection, so a spec without injections
reproduces the base signal exactly.

Injection recipes:

* ``global_point``: value set to channel mean + magnitude * channel std.
* ``contextual_point``: value set to local (+-10 steps) mean + magnitude * local std.
* ``seasonal``: sinusoid frequencies multiplied by ``magnitude`` inside the span.
* ``group``: span replaced by a flat segment at the local mean.
* ``trend``: linear ramp from 0 to magnitude * channel std added over the span.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import TimeSeriesDataset
from .errors import ParameterError, SpecError

POINT_KINDS = ("global_point", "contextual_point")
PATTERN_KINDS = ("seasonal", "group", "trend")
KINDS = POINT_KINDS + PATTERN_KINDS
CONTEXT = 10


@dataclass
class AnomalyInjection:
    kind: str
    start: int
    length: int = 1
    magnitude: float = 1.0
    channels: list | None = None  # None -> channel 0

    @property
    def stop(self):
        return self.start + self.length


@dataclass
class SynthSpec:
    length: int
    channels: int = 1
    base_freqs: list = field(default_factory=lambda: [1.0])
    noise_sigma: float = 0.1
    seed: int = 0
    injections: list = field(default_factory=list)

    def validate(self):
        _validate(self)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        """Build and validate a spec from parsed JSON; errors carry the field path."""
        if not isinstance(d, dict):
            raise SpecError("spec must be a JSON object", "")
        known = {"length", "channels", "base_freqs", "noise_sigma", "seed", "injections"}
        for key in d:
            if key not in known:
                raise SpecError(f"unknown field {key!r}", key)
        if "length" not in d:
            raise SpecError("missing required field", "length")
        injections = []
        raw = d.get("injections", [])
        if not isinstance(raw, list):
            raise SpecError("must be a list", "injections")
        for i, item in enumerate(raw):
            path = f"injections[{i}]"
            if not isinstance(item, dict):
                raise SpecError("must be an object", path)
            for key in item:
                if key not in ("kind", "start", "length", "magnitude", "channels"):
                    raise SpecError(f"unknown field {key!r}", f"{path}.{key}")
            for key in ("kind", "start"):
                if key not in item:
                    raise SpecError("missing required field", f"{path}.{key}")
            try:
                injections.append(AnomalyInjection(
                    kind=item["kind"], start=_int(item["start"], f"{path}.start"),
                    length=_int(item.get("length", 1), f"{path}.length"),
                    magnitude=float(item.get("magnitude", 1.0)),
                    channels=item.get("channels")))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, SpecError):
                    raise
                raise SpecError(str(exc), path) from None
        try:
            spec = cls(length=_int(d["length"], "length"),
                       channels=_int(d.get("channels", 1), "channels"),
                       base_freqs=[float(f) for f in d.get("base_freqs", [1.0])],
                       noise_sigma=float(d.get("noise_sigma", 0.1)),
                       seed=_int(d.get("seed", 0), "seed"),
                       injections=injections)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(str(exc), "") from None
        return spec.validate()


def _int(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise SpecError(f"expected an integer, got {v!r}", path)
    return int(v)


def _validate(spec):
    if spec.length < 1:
        raise SpecError("length must be >= 1", "length")
    if spec.channels < 1:
        raise SpecError("channels must be >= 1", "channels")
    if spec.noise_sigma < 0:
        raise SpecError("noise_sigma must be >= 0", "noise_sigma")
    if not spec.base_freqs:
        raise SpecError("at least one base frequency is required", "base_freqs")
    spans = []
    for i, inj in enumerate(spec.injections):
        path = f"injections[{i}]"
        if inj.kind not in KINDS:
            raise SpecError(f"unknown kind {inj.kind!r}; expected one of {KINDS}", f"{path}.kind")
        if inj.kind in POINT_KINDS and inj.length != 1:
            raise SpecError("point anomalies have length 1", f"{path}.length")
        if inj.kind in PATTERN_KINDS and inj.length < 2:
            raise SpecError("pattern anomalies need length >= 2", f"{path}.length")
        if inj.start < 0 or inj.stop > spec.length:
            raise SpecError(f"span [{inj.start}, {inj.stop}) outside [0, {spec.length})", f"{path}.start")
        for c in _channels(inj):
            if not 0 <= c < spec.channels:
                raise SpecError(f"channel {c} out of range", f"{path}.channels")
        spans.append((inj.start, inj.stop, i))
    spans.sort()
    for (s0, e0, i0), (s1, e1, i1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise SpecError(
                f"injections[{i0}] [{s0}, {e0}) overlaps injections[{i1}] [{s1}, {e1})",
                f"injections[{i1}]")


def _channels(inj):
    return [0] if inj.channels is None else [int(c) for c in inj.channels]


def _sinusoids(t, freqs, phases):
    out = np.zeros(t.shape[0])
    for f, ph in zip(freqs, phases):
        out = out + np.sin(2.0 * np.pi * f * t / 100.0 + ph)
    return out


def _check_span(x, start, length):
    if start < 0 or length < 1 or start + length > x.shape[0]:
        raise ParameterError(f"span [{start}, {start + length}) outside series of length {x.shape[0]}")


def _local(start, stop, n):
    return slice(max(0, start - CONTEXT), min(n, stop + CONTEXT))


# Each mutator edits a copy of one channel. ``base`` is the clean channel,
# used for statistics so the order of injections does not matter.

def inject_global_point(x, start, magnitude, base=None):
    _check_span(x, start, 1)
    ref = x if base is None else base
    out = x.copy()
    out[start] = ref.mean() + magnitude * ref.std()
    return out


def inject_contextual_point(x, start, magnitude, base=None):
    _check_span(x, start, 1)
    ref = (x if base is None else base)[_local(start, start + 1, x.shape[0])]
    out = x.copy()
    out[start] = ref.mean() + magnitude * ref.std()
    return out


def inject_seasonal(x, start, length, magnitude, freqs, phases, noise=None):
    """Recompute the periodic part inside the span with every frequency scaled."""
    _check_span(x, start, length)
    t = np.arange(start, start + length, dtype=np.float64)
    out = x.copy()
    seg = _sinusoids(t, [f * magnitude for f in freqs], phases)
    out[start:start + length] = seg if noise is None else seg + noise[start:start + length]
    return out


def inject_group(x, start, length, base=None):
    _check_span(x, start, length)
    ref = (x if base is None else base)[_local(start, start + length, x.shape[0])]
    out = x.copy()
    out[start:start + length] = ref.mean()
    return out


def inject_trend(x, start, length, magnitude, base=None):
    _check_span(x, start, length)
    ref = x if base is None else base
    out = x.copy()
    out[start:start + length] += np.linspace(0.0, magnitude * ref.std(), length)
    return out


def base_signal(spec):
    """Clean signal, the per-channel phases and the noise matrix."""
    rng = np.random.default_rng(spec.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(spec.channels, len(spec.base_freqs)))
    noise = rng.normal(0.0, spec.noise_sigma, size=(spec.length, spec.channels)) \
        if spec.noise_sigma > 0 else np.zeros((spec.length, spec.channels))
    t = np.arange(spec.length, dtype=np.float64)
    values = np.stack([_sinusoids(t, spec.base_freqs, phases[c]) for c in range(spec.channels)], axis=1)
    return values + noise, phases, noise


def generate(spec, name="synthetic"):
    """Generate a labelled :class:`TimeSeriesDataset` from ``spec``."""
    spec.validate()
    base, phases, noise = base_signal(spec)
    values = base.copy()
    labels = np.zeros(spec.length, dtype=np.int64)
    for inj in spec.injections:
        for c in _channels(inj):
            col, ref = values[:, c], base[:, c]
            if inj.kind == "global_point":
                col = inject_global_point(col, inj.start, inj.magnitude, ref)
            elif inj.kind == "contextual_point":
                col = inject_contextual_point(col, inj.start, inj.magnitude, ref)
            elif inj.kind == "seasonal":
                col = inject_seasonal(col, inj.start, inj.length, inj.magnitude,
                                      spec.base_freqs, phases[c], noise[:, c])
            elif inj.kind == "group":
                col = inject_group(col, inj.start, inj.length, ref)
            else:
                col = inject_trend(col, inj.start, inj.length, inj.magnitude, ref)
            values[:, c] = col
        labels[inj.start:inj.stop] = 1
    return TimeSeriesDataset(values, labels, name)


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}", "") from None
    return SynthSpec.from_dict(raw)
