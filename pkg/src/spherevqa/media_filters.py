"""Clip extraction and quality filters for raw panoramic footage."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.fft import dct


@dataclass
class AudioTrack:
    """Multichannel audio; ``samples`` has shape (channels, n)."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[0] not in (1, 2):
            raise ValueError("samples must be (channels, n) with 1 or 2 channels")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = s

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.samples.shape[1] / self.sample_rate

    def mono(self) -> np.ndarray:
        return self.samples.mean(axis=0)


@dataclass(frozen=True)
class ClipInterval:
    start: float
    duration: float = 5.0

    @property
    def end(self) -> float:
        return self.start + self.duration

    def overlaps(self, other: "ClipInterval") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass
class FrameImage:
    """RGB frame, ``rgb`` of shape (height, width, 3).

    8-bit input is the norm; float arrays are accepted for analysis.
    """

    rgb: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.rgb)
        if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] * a.shape[1] == 0:
            raise ValueError("frame must be a non-empty (H, W, 3) array")
        self.rgb = a

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


# ---------------------------------------------------------------------------
# peak clips


def rms_envelope(track: AudioTrack, window: float = 0.5) -> np.ndarray:
    if window <= 0:
        raise ValueError("window must be positive")
    x = track.mono()
    if x.size == 0:
        raise ValueError("empty track")
    n = int(round(window * track.sample_rate))
    count = x.size // n
    frames = x[: count * n].reshape(count, n)
    return np.sqrt(np.mean(frames * frames, axis=1))


def peak_windows(r: np.ndarray, neighbors: int = 2) -> np.ndarray:
    """Indices whose RMS beats the local mean of their neighbours by one global std."""
    r = np.asarray(r, dtype=float)
    sd = r.std()
    peaks = []
    for i in range(r.size):
        lo, hi = max(0, i - neighbors), min(r.size, i + neighbors + 1)
        around = np.concatenate([r[lo:i], r[i + 1 : hi]])
        if around.size == 0:
            continue
        if r[i] > around.mean() + sd:
            peaks.append(i)
    return np.array(peaks, dtype=int)


def extract_peak_clips(
    track: AudioTrack, clip_len: float = 5.0, window: float = 0.5
) -> list[ClipInterval]:
    if track.duration < clip_len:
        raise ValueError("track shorter than one clip")
    r = rms_envelope(track, window)
    peaks = peak_windows(r)
    # stable sort so equal peaks resolve to the earlier window
    order = sorted(peaks.tolist(), key=lambda i: -r[i])
    chosen: list[ClipInterval] = []
    for i in order:
        center = (i + 0.5) * window
        start = min(max(0.0, center - 0.5 * clip_len), track.duration - clip_len)
        cand = ClipInterval(start, clip_len)
        if not any(cand.overlaps(c) for c in chosen):
            chosen.append(cand)
    return sorted(chosen, key=lambda c: c.start)


# ---------------------------------------------------------------------------
# mel coefficients


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, sample_rate: float) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (n_bands, n_fft // 2 + 1)."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_bands + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


LOG_FLOOR = 1e-10


def mel_coefficients(
    track: AudioTrack,
    n_coeffs: int = 13,
    n_bands: int = 40,
    frame_s: float = 0.025,
    hop_s: float = 0.010,
) -> np.ndarray:
    """Cepstral coefficients per frame, shape (frames, n_coeffs)."""
    if track.sample_rate < 8000:
        raise ValueError("sample rate below 8 kHz")
    x = track.mono()
    flen = int(round(frame_s * track.sample_rate))
    hop = int(round(hop_s * track.sample_rate))
    if x.size < flen:
        raise ValueError("track shorter than one analysis frame")
    n_frames = 1 + (x.size - flen) // hop
    idx = np.arange(flen)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hamming(flen)
    n_fft = 1 << (flen - 1).bit_length()
    power = np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2 / n_fft
    energies = power @ mel_filterbank(n_bands, n_fft, track.sample_rate).T
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    return dct(logs, type=2, norm="ortho", axis=1)[:, :n_coeffs]


def mel_distance(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("coefficient counts differ")
    return float(np.linalg.norm(a.mean(axis=0) - b.mean(axis=0)))


def dedup_clips(coeffs: Sequence[np.ndarray], threshold: float = 1.0) -> list[int]:
    """Indices of clips kept after dropping those within ``threshold`` of an earlier keeper."""
    kept: list[int] = []
    for i, c in enumerate(coeffs):
        if all(mel_distance(c, coeffs[j]) > threshold for j in kept):
            kept.append(i)
    return kept


# ---------------------------------------------------------------------------
# frame filters


def histogram_skewness(frame: FrameImage) -> np.ndarray:
    """Third standardized moment of each colour channel."""
    px = frame.rgb.reshape(-1, 3).astype(float)
    mu = px.mean(axis=0)
    d = px - mu
    sd = np.sqrt((d * d).mean(axis=0))
    out = np.zeros(3)
    ok = sd >= 1e-9
    out[ok] = (d[:, ok] ** 3).mean(axis=0) / sd[ok] ** 3
    return out


def is_synthetic_frame(frame: FrameImage, threshold: float = 2.0) -> bool:
    return bool(np.any(np.abs(histogram_skewness(frame)) > threshold))


def to_grayscale(frame: FrameImage) -> np.ndarray:
    rgb = frame.rgb.astype(float)
    return (299.0 * rgb[..., 0] + 587.0 * rgb[..., 1] + 114.0 * rgb[..., 2]) / 1000.0


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centres and edge clamping."""
    h, w = img.shape

    def axis(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        i0 = np.floor(pos).astype(int)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, pos - i0

    r0, r1, fr = axis(height, h)
    c0, c1, fc = axis(width, w)
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr[:, None]) + bot * fr[:, None]


def dct_phash64(frame: FrameImage) -> int:
    """64-bit DCT perceptual hash; bit k is row-major position k of the 8x8 block."""
    small = resize_bilinear(to_grayscale(frame), 32, 32)
    coeffs = dct(dct(small, type=2, norm="ortho", axis=0), type=2, norm="ortho", axis=1)
    block = coeffs[:8, :8].ravel()
    # rounding residue of a flat image is not structure; snap it to zero
    block = np.where(np.abs(block) <= 1e-9 * max(np.abs(block).max(), 1e-300), 0.0, block)
    med = np.median(block[1:])
    h = 0
    for k, c in enumerate(block):
        if c > med:
            h |= 1 << k
    return h


def hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


def is_static_clip(hashes: Sequence[int]) -> bool:
    if len(hashes) == 0:
        raise ValueError("no frame hashes")
    return len(set(hashes)) < 3


def has_enough_objects(region_count: int, minimum: int = 3) -> bool:
    """Object-count filter over counts from an external detector."""
    return region_count >= minimum


@dataclass
class ClipCandidate:
    interval: ClipInterval
    mel: np.ndarray
    frames: Sequence[FrameImage]
    region_count: int | None = None


def filter_clips(
    candidates: Sequence[ClipCandidate],
    dedup_threshold: float = 1.0,
    skew_threshold: float = 2.0,
) -> tuple[list[ClipCandidate], list[dict]]:
    """Run every filter in order; returns kept clips and one rejection record per drop.

    Clips without frames skip the visual filters.
    """
    rejected = []
    kept_idx = set(dedup_clips([c.mel for c in candidates], dedup_threshold))
    kept = []
    for i, c in enumerate(candidates):
        reason = None
        if i not in kept_idx:
            reason = "duplicate-audio"
        elif any(is_synthetic_frame(f, skew_threshold) for f in c.frames):
            reason = "synthetic-frame"
        elif c.frames and is_static_clip([dct_phash64(f) for f in c.frames]):
            reason = "static"
        elif c.region_count is not None and not has_enough_objects(c.region_count):
            reason = "few-objects"
        if reason:
            rejected.append({"start": c.interval.start, "duration": c.interval.duration,
                             "reason": reason})
        else:
            kept.append(c)
    return kept, rejected


def read_wav(path) -> AudioTrack:
    from scipy.io import wavfile

    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(float) / 32768.0
    else:
        data = data.astype(float)
    data = data.T if data.ndim == 2 else data
    return AudioTrack(data, float(rate))


def write_wav(path, track: AudioTrack, pcm16: bool = True) -> None:
    from scipy.io import wavfile

    data = track.samples.T if track.channels == 2 else track.samples[0]
    if pcm16:
        data = np.clip(np.round(data * 32767.0), -32768, 32767).astype(np.int16)
    else:
        data = data.astype(np.float32)
    wavfile.write(path, int(track.sample_rate), data)


def read_frame(path) -> FrameImage:
    from PIL import Image

    with Image.open(path) as im:
        return FrameImage(np.asarray(im.convert("RGB"), dtype=np.uint8))
