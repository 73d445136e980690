"""Synthetic panoramic scenes with spatially panned stereo audio."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..audio_events import AudioEvent, FrameLabels, build_events
from ..sphere_geom import SphericalBox, great_circle, spatial_code

CATEGORIES = ("person", "dog", "car", "guitar", "drum", "bird", "bus", "piano")
COLORS = ("red", "blue", "green", "white", "black")
SOUNDS = ("speech", "barking", "engine", "strumming", "drumming",
          "chirping", "horn", "melody", "laughter", "clapping")
BACKGROUND = ("ambience", "wind", "hum")
# pure tones standing in for each sound class, Hz
_TONES = {s: 220.0 * 2 ** (i / 4) for i, s in enumerate(SOUNDS)}

CLIP_LEN = 5.0
FRAME_HOP = 0.5
SAMPLE_RATE = 8000
REGION_NOISE_DIMS = 4
AUDIO_NOISE_DIMS = 4
REGION_FEAT_DIM = len(CATEGORIES) + len(COLORS) + 1 + REGION_NOISE_DIMS
AUDIO_FEAT_DIM = len(SOUNDS) + 1 + AUDIO_NOISE_DIMS
KEYFRAME_T = 0.5  # keyframe time as a fraction of the clip
MIN_SEPARATION = math.radians(12)


def derive_seed(root: int, *labels) -> int:
    """Sub-seed = first 8 bytes (big endian) of sha256("root/label1/label2...")."""
    key = "/".join([str(int(root))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


@dataclass
class SceneObject:
    category: int
    color: int
    box: SphericalBox
    sounding: bool = False
    sound: int | None = None
    loudness: float = 0.0
    onset: int = 0  # first active frame
    offset: int = 0  # one past the last active frame

    def __post_init__(self):
        if self.sounding and self.sound is None:
            raise ValueError("a sounding object needs a sound category")

    @property
    def phrase(self) -> str:
        return f"{COLORS[self.color]} {CATEGORIES[self.category]}"

    def to_json(self) -> dict:
        return {
            "category": CATEGORIES[self.category],
            "color": COLORS[self.color],
            "box": self.box.to_json(),
            "sounding": self.sounding,
            "sound": SOUNDS[self.sound] if self.sound is not None else None,
            "loudness": self.loudness,
            "onset": self.onset * FRAME_HOP,
            "offset": self.offset * FRAME_HOP,
        }


@dataclass
class Scene:
    seed: int
    objects: list[SceneObject]
    events: list[AudioEvent]
    region_feats: np.ndarray
    clip_len: float = CLIP_LEN
    waveform: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.objects) < 3:
            raise ValueError("a scene needs at least three objects")
        if not any(o.sounding for o in self.objects):
            raise ValueError("a scene needs a sounding object")

    def spatial_codes(self, mode) -> np.ndarray:
        t = KEYFRAME_T
        return np.stack([spatial_code(o.box, t, mode) for o in self.objects])

    def audio_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-event left/right features and (skewness, start, duration) targets."""
        left = np.stack([e.feat_left for e in self.events])
        right = np.stack([e.feat_right for e in self.events])
        tgt = np.array([[e.skewness, e.start / self.clip_len, e.duration / self.clip_len]
                        for e in self.events])
        return left, right, tgt

    def sounding_objects(self) -> list[int]:
        return [i for i, o in enumerate(self.objects) if o.sounding]

    def present_sounds(self) -> set[int]:
        return {o.sound for o in self.objects if o.sounding}

    def find(self, category: int, color: int) -> int | None:
        for i, o in enumerate(self.objects):
            if o.category == category and o.color == color:
                return i
        return None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "clip_len": self.clip_len,
            "objects": [o.to_json() for o in self.objects],
            "events": [e.to_json() for e in self.events],
        }


def _sample_center(rng) -> tuple[float, float]:
    # density proportional to cos(phi) = uniform on the sphere
    theta = rng.uniform(-math.pi, math.pi)
    phi = math.asin(rng.uniform(-0.95, 0.95))
    return theta, phi


def _pan_gains(theta: float, loud: float) -> tuple[float, float]:
    p = math.sin(theta)
    return loud * math.sqrt(0.5 * (1 + p)), loud * math.sqrt(0.5 * (1 - p))


def generate_scene(seed: int, keep_waveform: bool = False) -> Scene:
    """Deterministic scene for ``seed``: 3-8 objects, 1-2 of them sounding."""
    rng = np.random.default_rng(derive_seed(seed, "scene"))
    n = int(rng.integers(3, 9))
    pairs = rng.permutation(len(CATEGORIES) * len(COLORS))[:n]
    objects: list[SceneObject] = []
    for pair in pairs:
        for _ in range(100):
            theta, phi = _sample_center(rng)
            w = rng.uniform(math.radians(10), math.radians(40))
            h = rng.uniform(math.radians(10), math.radians(40))
            box = SphericalBox(theta, phi, w, h, float(rng.uniform(0.5, 1.0)))
            if all(great_circle(box.center(), o.box.center()) > MIN_SEPARATION for o in objects):
                break
        objects.append(SceneObject(int(pair) // len(COLORS), int(pair) % len(COLORS), box))

    n_frames = int(round(CLIP_LEN / FRAME_HOP))
    n_sounding = 1 if rng.random() < 0.6 else 2
    who = rng.choice(n, n_sounding, replace=False)
    sounds = rng.choice(len(SOUNDS), n_sounding, replace=False)
    for i, s in zip(who, sounds):
        o = objects[int(i)]
        o.sounding = True
        o.sound = int(s)
        o.loudness = float(rng.uniform(0.3, 1.0))
        o.onset = int(rng.integers(0, 4))
        o.offset = int(rng.integers(o.onset + 4, n_frames + 1))

    # waveform: panned tones plus independent background noise per channel
    n_samp = int(CLIP_LEN * SAMPLE_RATE)
    t = np.arange(n_samp) / SAMPLE_RATE
    wave = rng.normal(0.0, 0.01, size=(2, n_samp))
    for o in objects:
        if not o.sounding:
            continue
        gl, gr = _pan_gains(o.box.theta, o.loudness)
        env = np.zeros(n_samp)
        a, b = int(o.onset * FRAME_HOP * SAMPLE_RATE), int(o.offset * FRAME_HOP * SAMPLE_RATE)
        env[a:b] = 1.0
        tone = np.sin(2 * math.pi * _TONES[SOUNDS[o.sound]] * t) * env
        wave[0] += gl * tone
        wave[1] += gr * tone

    # tagger stand-in: top-3 labels and per-channel frame features
    labels = []
    feats = np.zeros((2, n_frames, AUDIO_FEAT_DIM))
    for f in range(n_frames):
        active = [o for o in objects if o.sounding and o.onset <= f < o.offset]
        active.sort(key=lambda o: -o.loudness)
        lab = [SOUNDS[o.sound] for o in active][:3]
        lab += [b for b in BACKGROUND if b not in lab][: 3 - len(lab)]
        labels.append(tuple(lab))
        seg = wave[:, int(f * FRAME_HOP * SAMPLE_RATE): int((f + 1) * FRAME_HOP * SAMPLE_RATE)]
        for o in active:
            gl, gr = _pan_gains(o.box.theta, o.loudness)
            feats[0, f, o.sound] += gl
            feats[1, f, o.sound] += gr
        feats[:, f, len(SOUNDS)] = np.sqrt((seg * seg).mean(axis=1))
    feats[:, :, len(SOUNDS) + 1:] = rng.normal(0.0, 0.05, size=(2, n_frames, AUDIO_NOISE_DIMS))
    feats[:, :, : len(SOUNDS)] += rng.normal(0.0, 0.03, size=(2, n_frames, len(SOUNDS)))
    events = build_events(FrameLabels(labels, FRAME_HOP), feats[0], feats[1],
                          wave[0], wave[1], SAMPLE_RATE)

    region = np.zeros((n, REGION_FEAT_DIM))
    for i, o in enumerate(objects):
        region[i, o.category] = 1.0
        region[i, len(CATEGORIES) + o.color] = 1.0
        if o.sounding:
            region[i, len(CATEGORIES) + len(COLORS)] = rng.uniform(0.6, 1.0)
    region[:, len(CATEGORIES) + len(COLORS) + 1:] = rng.normal(0.0, 1.0, size=(n, REGION_NOISE_DIMS))
    region[:, : len(CATEGORIES) + len(COLORS) + 1] += rng.normal(0.0, 0.1, size=(n, len(CATEGORIES) + len(COLORS) + 1))

    return Scene(seed, objects, events, region, CLIP_LEN, wave if keep_waveform else None)


def split_of(seed: int, ratios=(0.80, 0.07, 0.13)) -> str:
    """Deterministic train/val/test assignment by hashing the scene seed."""
    u = derive_seed(seed, "split") % 10_000 / 10_000
    if u < ratios[0]:
        return "train"
    if u < ratios[0] + ratios[1]:
        return "val"
    return "test"
