"""Three-modality transformer: input builders, encoders, decoder heads and losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import functional as F
from ..autograd.nn import EncoderLayer, LayerNorm, Linear, MLP, Module, param, truncated_normal
from ..autograd.tensor import Tensor
from ..sphere_geom import spatial_code_width
from .batching import Batch
from .config import ModelConfig

MASK_PROB = 0.15
GROUNDING_WEIGHT = 0.2


@dataclass
class MaskPlan:
    """Per-modality masks over content rows (CLS excluded by construction)."""

    lang: np.ndarray  # (B, K)
    audio: np.ndarray  # (B, M)
    vis: np.ndarray  # (B, N)

    @classmethod
    def empty(cls, batch: Batch) -> "MaskPlan":
        return cls(np.zeros_like(batch.lang_mask), np.zeros_like(batch.aud_mask),
                   np.zeros_like(batch.vis_mask))

    def any(self) -> bool:
        return bool(self.lang.any() or self.audio.any() or self.vis.any())


def sample_mask_plan(batch: Batch, rng: np.random.Generator, p: float = MASK_PROB) -> MaskPlan:
    """Independent Bernoulli(p) masks over valid, non-CLS positions."""

    def draw(valid):
        return (rng.random(valid.shape) < p) & valid

    return MaskPlan(draw(batch.lang_mask), draw(batch.aud_mask), draw(batch.vis_mask))


@dataclass
class Encoded:
    lang: Tensor  # (B, K+1, d)
    audio: Tensor
    vis: Tensor
    lang_mask: np.ndarray  # (B, K+1) with CLS
    audio_mask: np.ndarray
    vis_mask: np.ndarray


def _with_cls(rows: Tensor, valid: np.ndarray) -> tuple[Tensor, np.ndarray]:
    cls = F.masked_mean(rows, valid)
    b, _, d = rows.shape
    out = F.concat([cls.reshape((b, 1, d)), rows], axis=1)
    mask = np.concatenate([np.ones((b, 1), bool), valid], axis=1)
    return out, mask


class TriModalTransformer(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        dt = np.dtype(cfg.dtype).type
        rng = np.random.default_rng(seed)
        d = cfg.d
        code_w = spatial_code_width(cfg.spatial_mode)
        std = cfg.weight_std
        # input projections
        self.f_b = Linear(cfg.region_dim, d, rng, dt, std=std)
        self.f_c = Linear(code_w, d, rng, dt, std=std)
        self.f_a0 = Linear(cfg.audio_dim, d, rng, dt, std=std)
        self.f_a1 = Linear(cfg.audio_dim, d, rng, dt, std=std)
        self.tok_emb = param(truncated_normal(rng, (cfg.vocab_size, d), std, dt))
        self.pos_emb = param(truncated_normal(rng, (cfg.max_len, d), std, dt))
        self.mask_lang = param(truncated_normal(rng, (d,), std, dt))
        self.mask_audio = param(truncated_normal(rng, (d,), std, dt))
        self.mask_vis = param(truncated_normal(rng, (d,), std, dt))
        # unimodal encoders
        self.norm_lang = LayerNorm(d, dt)
        self.norm_audio = LayerNorm(d, dt)
        self.norm_vis = LayerNorm(d, dt)
        mk = lambda: EncoderLayer(d, cfg.heads, rng, dt, cfg.dropout, std)
        self.enc_lang = [mk() for _ in range(cfg.layers_lang)]
        self.enc_audio = [mk() for _ in range(cfg.layers_audio)]
        self.enc_vis = [mk() for _ in range(cfg.layers_vis)]
        # cross-modal encoder, stage 1 then stage 2
        self.x1_lang, self.x1_audio, self.x1_vis = mk(), mk(), mk()
        self.x2_lang, self.x2_audio, self.x2_vis = mk(), mk(), mk()
        # decoder heads over concat(v0, a0, l0)
        self.answer_head = MLP([3 * d, d, d, cfg.answer_size], rng, dt, std)
        self.grounding_head = MLP([3 * d, d, d, 5], rng, dt, std)
        # pretraining heads on masked positions
        self.lang_head = MLP([d, d, cfg.vocab_size], rng, dt, std)
        self.vis_head = MLP([d, d, code_w], rng, dt, std)
        self.audio_head = MLP([d, d, 3], rng, dt, std)
        self.rng = np.random.default_rng(seed + 1)

    @property
    def dtype(self):
        return np.dtype(self.cfg.dtype)

    # -- inputs -------------------------------------------------------------------
    def visual_inputs(self, feats, codes, valid, masked=None) -> tuple[Tensor, np.ndarray]:
        rows = self.f_b(Tensor(feats, dtype=self.dtype)) + self.f_c(Tensor(codes, dtype=self.dtype))
        out, mask = _with_cls(rows, valid)
        if masked is not None and masked.any():
            out = self._replace(out, masked, self.mask_vis)
        return out, mask

    def audio_inputs(self, left, right, valid, masked=None) -> tuple[Tensor, np.ndarray]:
        rows = self.f_a0(Tensor(left, dtype=self.dtype)) + self.f_a1(Tensor(right, dtype=self.dtype))
        out, mask = _with_cls(rows, valid)
        if masked is not None and masked.any():
            out = self._replace(out, masked, self.mask_audio)
        return out, mask

    def language_inputs(self, ids, valid, masked=None) -> tuple[Tensor, np.ndarray]:
        ids = np.asarray(ids)
        k = ids.shape[1]
        if k > self.cfg.max_len:
            raise ValueError(f"{k} tokens exceed max_len {self.cfg.max_len}")
        ids = np.where((ids >= 0) & (ids < self.cfg.vocab_size), ids, 1)
        pos = self.pos_emb[:k]
        rows = F.embedding(self.tok_emb, ids) + pos
        out, mask = _with_cls(rows, valid)
        if masked is not None and masked.any():
            # the learned mask vector replaces the token embedding; position is kept
            full = np.concatenate([np.zeros((ids.shape[0], 1), bool), masked], axis=1)
            pos_full = F.concat([Tensor(np.zeros((1, self.cfg.d), self.dtype)), pos], axis=0)
            out = F.where(full[..., None], self.mask_lang + pos_full, out)
        return out, mask

    @staticmethod
    def _replace(x: Tensor, masked: np.ndarray, vec: Tensor) -> Tensor:
        full = np.concatenate([np.zeros((masked.shape[0], 1), bool), masked], axis=1)
        return F.where(full[..., None], vec, x)

    # -- encoders -----------------------------------------------------------------
    def _stack(self, layers, x, mask):
        for layer in layers:
            x = layer(x, x, mask, self.rng)
        return x

    def unimodal_encode(self, lang, audio, vis, lang_mask, audio_mask, vis_mask):
        l1 = self._stack(self.enc_lang, self.norm_lang(lang), lang_mask)
        a1 = self._stack(self.enc_audio, self.norm_audio(audio), audio_mask)
        v1 = self._stack(self.enc_vis, self.norm_vis(vis), vis_mask)
        return l1, a1, v1

    def crossmodal_encode(self, l1, a1, v1, lang_mask, audio_mask, vis_mask):
        r = self.rng
        l_a = self.x1_lang(l1, a1, audio_mask, r)
        a_v = self.x1_audio(a1, v1, vis_mask, r)
        v_l = self.x1_vis(v1, l1, lang_mask, r)
        l_hat = self.x2_lang(l_a, a_v, audio_mask, r)
        a_hat = self.x2_audio(a_v, v_l, vis_mask, r)
        v_hat = self.x2_vis(v_l, l_a, lang_mask, r)
        return l_hat, a_hat, v_hat

    def encode(self, batch: Batch, plan: MaskPlan | None = None) -> Encoded:
        plan = plan or MaskPlan(None, None, None)
        lang, lm = self.language_inputs(batch.lang_ids, batch.lang_mask, plan.lang)
        audio, am = self.audio_inputs(batch.aud_left, batch.aud_right, batch.aud_mask, plan.audio)
        vis, vm = self.visual_inputs(batch.vis_feats, batch.vis_codes, batch.vis_mask, plan.vis)
        l1, a1, v1 = self.unimodal_encode(lang, audio, vis, lm, am, vm)
        lh, ah, vh = self.crossmodal_encode(l1, a1, v1, lm, am, vm)
        return Encoded(lh, ah, vh, lm, am, vm)

    # -- decoder ------------------------------------------------------------------
    def readout(self, enc: Encoded) -> Tensor:
        def agg(x, mask):
            if self.cfg.pool == "mean":
                return F.masked_mean(x, mask)
            return x[:, 0, :]

        return F.concat([agg(enc.vis, enc.vis_mask), agg(enc.audio, enc.audio_mask),
                         agg(enc.lang, enc.lang_mask)], axis=-1)

    def decode(self, enc: Encoded) -> tuple[Tensor, Tensor]:
        h = self.readout(enc)
        return self.answer_head(h), self.grounding_head(h)

    def forward(self, batch: Batch, plan: MaskPlan | None = None):
        enc = self.encode(batch, plan)
        logits, grounding = self.decode(enc)
        return enc, logits, grounding

    __call__ = forward

    # -- losses ------------------------------------------------------------------
    def loss(self, batch: Batch, plan: MaskPlan | None = None, unk: int | None = None,
             grounding_weight: float = GROUNDING_WEIGHT) -> tuple[Tensor, dict, np.ndarray]:
        """Weighted sum of QA, grounding and (when masked) pretraining losses.

        Each component is a mean over its own rows; components without rows are 0.
        Returns (total, per-component floats, argmax answer labels).
        """
        enc, logits, grounding = self.forward(batch, plan)
        zero = Tensor(np.zeros((), self.dtype))
        parts: dict[str, Tensor] = {}

        keep = np.ones(len(batch), bool) if unk is None else batch.answers != unk
        parts["qa"] = F.cross_entropy(logits[keep], batch.answers[keep]) if keep.any() else zero
        g = batch.grounding_valid
        parts["grounding"] = F.smooth_l1(grounding[g], batch.grounding[g]) if g.any() else zero

        if plan is not None:
            b, t = np.nonzero(plan.lang)
            parts["lang"] = (F.cross_entropy(self.lang_head(enc.lang[b, t + 1]), batch.lang_ids[b, t])
                             if b.size else zero)
            b, t = np.nonzero(plan.vis)
            parts["vis"] = (F.smooth_l1(self.vis_head(enc.vis[b, t + 1]), batch.vis_codes[b, t])
                            if b.size else zero)
            b, t = np.nonzero(plan.audio)
            parts["audio"] = (F.smooth_l1(self.audio_head(enc.audio[b, t + 1]), batch.aud_targets[b, t])
                              if b.size else zero)

        total = zero
        for name, v in parts.items():
            total = total + (v * grounding_weight if name == "grounding" else v)
        return total, {k: float(v.data) for k, v in parts.items()}, logits.data.argmax(axis=1)


def model_for(cfg: ModelConfig, seed: int = 0) -> TriModalTransformer:
    return TriModalTransformer(cfg, seed)
