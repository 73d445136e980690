"""Padding QA samples and their scenes into model batches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..qa_harness.questions import QASample
from ..qa_harness.scenes import Scene
from ..qa_harness.vocab import PAD_ID, AnswerTable, Vocabulary
from ..sphere_geom import grounding_vector, spherical_nms


@dataclass
class Batch:
    lang_ids: np.ndarray  # (B, K) int
    lang_mask: np.ndarray  # (B, K) bool
    vis_feats: np.ndarray  # (B, N, region_dim)
    vis_codes: np.ndarray  # (B, N, code_width)
    vis_mask: np.ndarray
    aud_left: np.ndarray  # (B, M, audio_dim)
    aud_right: np.ndarray
    aud_mask: np.ndarray
    aud_targets: np.ndarray  # (B, M, 3): skewness, start, duration (clip-normalized)
    answers: np.ndarray  # (B,) answer-table labels
    grounding: np.ndarray  # (B, 5)
    grounding_valid: np.ndarray  # (B,) bool

    def __len__(self) -> int:
        return self.lang_ids.shape[0]


def _pad(arrays: Sequence[np.ndarray], dtype) -> tuple[np.ndarray, np.ndarray]:
    n = max(a.shape[0] for a in arrays)
    tail = arrays[0].shape[1:]
    out = np.zeros((len(arrays), n) + tail, dtype=dtype)
    mask = np.zeros((len(arrays), n), dtype=bool)
    for i, a in enumerate(arrays):
        out[i, : a.shape[0]] = a
        mask[i, : a.shape[0]] = True
    return out, mask


class Featurizer:
    """Turns (sample, scene) pairs into padded arrays for one spatial mode."""

    def __init__(self, vocab: Vocabulary, table: AnswerTable, scenes: dict[int, Scene],
                 spatial_mode: str = "quaternion", max_len: int = 24, max_regions: int = 35,
                 dtype=np.float32):
        self.vocab = vocab
        self.table = table
        self.scenes = scenes
        self.mode = spatial_mode
        self.max_len = max_len
        self.max_regions = max_regions
        self.dtype = dtype
        self._cache: dict[int, tuple] = {}

    def scene_arrays(self, seed: int) -> tuple:
        if seed not in self._cache:
            sc = self.scenes[seed]
            feats, codes = sc.region_feats, sc.spatial_codes(self.mode)
            if feats.shape[0] > self.max_regions:
                boxes = [o.box for o in sc.objects]
                keep = [boxes.index(b) for b in spherical_nms(boxes, max_keep=self.max_regions)]
                feats, codes = feats[keep], codes[keep]
            left, right, tgt = sc.audio_arrays()
            self._cache[seed] = (feats, codes, left, right, tgt)
        return self._cache[seed]

    def encode_question(self, tokens: Sequence[str]) -> np.ndarray:
        if len(tokens) > self.max_len:
            raise ValueError(f"question of {len(tokens)} tokens exceeds max_len {self.max_len}")
        return np.array(self.vocab.encode(tokens), dtype=np.int64)

    def grounding_target(self, sample: QASample) -> np.ndarray:
        return grounding_vector(sample.grounding, self.mode)

    def __call__(self, samples: Sequence[QASample]) -> Batch:
        ids = [self.encode_question(s.question) for s in samples]
        lang_ids, lang_mask = _pad([i[:, None] for i in ids], np.int64)
        lang_ids = np.where(lang_mask, lang_ids[..., 0], PAD_ID)
        arrs = [self.scene_arrays(s.scene_seed) for s in samples]
        vis_feats, vis_mask = _pad([a[0] for a in arrs], self.dtype)
        vis_codes, _ = _pad([a[1] for a in arrs], self.dtype)
        aud_left, aud_mask = _pad([a[2] for a in arrs], self.dtype)
        aud_right, _ = _pad([a[3] for a in arrs], self.dtype)
        aud_tgt, _ = _pad([a[4] for a in arrs], self.dtype)
        grounding = np.zeros((len(samples), 5), dtype=self.dtype)
        valid = np.zeros(len(samples), dtype=bool)
        for i, s in enumerate(samples):
            if s.grounding is not None:
                grounding[i] = self.grounding_target(s)
                valid[i] = True
        answers = np.array([self.table.encode(s.answer) for s in samples], dtype=np.int64)
        return Batch(lang_ids, lang_mask, vis_feats, vis_codes, vis_mask, aud_left, aud_right,
                     aud_mask, aud_tgt, answers, grounding, valid)
