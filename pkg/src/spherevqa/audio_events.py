"""Audio event segmentation and stereo spatial skewness."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SKEW_LIMIT = 20.0
SILENCE_EPS = 1e-8


@dataclass
class FrameLabels:
    """Top-k tagger labels per frame."""

    labels: list[tuple]
    hop: float
    k: int = 3

    def __post_init__(self):
        for i, lab in enumerate(self.labels):
            if len(lab) != self.k or len(set(lab)) != self.k:
                raise ValueError(f"frame {i} must carry {self.k} distinct labels")


@dataclass(frozen=True)
class EventSpan:
    first_frame: int
    n_frames: int
    start: float
    duration: float
    labels: frozenset


@dataclass
class AudioEvent:
    start: float
    duration: float
    labels: frozenset
    feat_left: np.ndarray
    feat_right: np.ndarray
    skewness: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("event duration must be positive")
        if self.feat_left.shape != self.feat_right.shape:
            raise ValueError("left/right feature lengths differ")
        if not -1.0 <= self.skewness <= 1.0:
            raise ValueError("normalized skewness outside [-1, 1]")

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "duration": self.duration,
            "labels": sorted(self.labels),
            "skewness": self.skewness,
        }


def segment_events(labels: FrameLabels) -> list[EventSpan]:
    """Split frames into maximal runs whose label sets are equal (order ignored)."""
    if not labels.labels:
        raise ValueError("no frames")
    sets = [frozenset(lab) for lab in labels.labels]
    spans = []
    first = 0
    for i in range(1, len(sets) + 1):
        if i == len(sets) or sets[i] != sets[first]:
            n = i - first
            spans.append(EventSpan(first, n, first * labels.hop, n * labels.hop, sets[first]))
            first = i
    return spans


def pool_event_features(
    feats_left: np.ndarray, feats_right: np.ndarray, spans: Sequence[EventSpan]
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Element-wise max over each event's frames, per channel."""
    out = []
    for sp in spans:
        if sp.n_frames <= 0:
            raise ValueError("empty event range")
        sl = slice(sp.first_frame, sp.first_frame + sp.n_frames)
        if sp.first_frame + sp.n_frames > len(feats_left):
            raise ValueError("event extends past the frame features")
        out.append((feats_left[sl].max(axis=0), feats_right[sl].max(axis=0)))
    return out


# ---------------------------------------------------------------------------
# spherical-harmonic skewness


@dataclass
class BFormat:
    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        n = {len(self.w), len(self.x), len(self.y), len(self.z)}
        if len(n) != 1:
            raise ValueError("B-format channels must have equal length")


def stereo_to_bformat(left, right) -> BFormat:
    """Embed stereo as first-order ambisonics with silent x and z dipoles."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if left.shape != right.shape:
        raise ValueError("channel lengths differ")
    r2 = math.sqrt(2.0)
    zeros = np.zeros_like(left)
    return BFormat((left + right) / r2, zeros, (left - right) / r2, zeros.copy())


def sh_coefficients(b: BFormat) -> np.ndarray:
    """First-order SN3D coefficients per frame, columns (c00, c1-1, c10, c11) = (w, y, z, x)."""
    if len(b.w) == 0:
        raise ValueError("empty signal")
    return np.stack([b.w, b.y, b.z, b.x], axis=1)


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a * a)))


def sh_skewness(left, right, eps: float = SILENCE_EPS) -> float:
    """Left/right dominance in dB, clamped to [-20, 20]; positive means left-dominant.

    Computed from the first-order coefficients: left = (c00 + c1-1)/sqrt(2) and
    right = (c00 - c1-1)/sqrt(2) recover the two channel energies. Channel RMS
    values are floored at ``eps`` so a silent channel clamps instead of dividing
    by zero; above the floor the value is exactly gain invariant.
    """
    coeffs = sh_coefficients(stereo_to_bformat(left, right))
    if coeffs.shape[0] == 0:
        raise ValueError("empty signal")
    w, y = coeffs[:, 0], coeffs[:, 1]
    r2 = math.sqrt(2.0)
    rms_l = max(_rms((w + y) / r2), eps)
    rms_r = max(_rms((w - y) / r2), eps)
    # difference of logs so swapping channels negates the result bit-exactly
    s = 20.0 * (math.log10(rms_l) - math.log10(rms_r))
    return float(min(SKEW_LIMIT, max(-SKEW_LIMIT, s)))


def normalize_skewness(s: float) -> float:
    return float(s) / SKEW_LIMIT


def build_events(
    labels: FrameLabels,
    feats_left: np.ndarray,
    feats_right: np.ndarray,
    left: np.ndarray | None = None,
    right: np.ndarray | None = None,
    sample_rate: float | None = None,
) -> list[AudioEvent]:
    """Segment, pool and (given waveforms) attach per-event normalized skewness."""
    if len(feats_left) != len(labels.labels) or len(feats_right) != len(labels.labels):
        raise ValueError("frame feature count does not match label count")
    spans = segment_events(labels)
    pooled = pool_event_features(feats_left, feats_right, spans)
    events = []
    for sp, (fl, fr) in zip(spans, pooled):
        skew = 0.0
        if left is not None and sample_rate:
            a = int(round(sp.start * sample_rate))
            b = min(len(left), int(round((sp.start + sp.duration) * sample_rate)))
            if b > a:
                skew = normalize_skewness(sh_skewness(left[a:b], right[a:b]))
        events.append(AudioEvent(sp.start, sp.duration, sp.labels, fl, fr, skew))
    return events


# ---------------------------------------------------------------------------
# wire formats


def write_events_jsonl(path, events: Sequence[AudioEvent]) -> None:
    with open(path, "w") as f:
        for ev in events:
            f.write(json.dumps(ev.to_json(), sort_keys=True) + "\n")


def read_events_jsonl(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


_MAGIC = b"FMAT"


def write_matrix(path, m: np.ndarray) -> None:
    """Row-major float32 matrix with header: magic, ndim, dims (uint32 LE), dtype tag."""
    m = np.ascontiguousarray(m, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", m.ndim))
        f.write(struct.pack(f"<{m.ndim}I", *m.shape))
        f.write(b"f4\0\0")
        f.write(m.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError("not a feature-matrix file")
        (ndim,) = struct.unpack("<I", f.read(4))
        shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
        if f.read(4) != b"f4\0\0":
            raise ValueError("unsupported dtype tag")
        return np.frombuffer(f.read(), dtype="<f4").reshape(shape).copy()
