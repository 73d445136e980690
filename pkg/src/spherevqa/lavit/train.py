"""Seeded training loop, predictor wrapper and checkpoint helpers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..autograd.checkpoint import load_checkpoint, load_into, save_checkpoint
from ..autograd.tensor import backward, no_grad
from ..qa_harness.questions import QASample
from ..qa_harness.scenes import derive_seed
from .batching import Featurizer
from .config import ModelConfig, TrainConfig
from .model import TriModalTransformer, sample_mask_plan
from .optim import AdamW, lr_schedule


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    log: list[dict] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)


def _batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, size):
        yield order[i: i + size]


def train(model: TriModalTransformer, samples: Sequence[QASample], featurizer: Featurizer,
          cfg: TrainConfig, phase: str = "finetune", log_path=None,
          stop_at_accuracy: float | None = None) -> TrainResult:
    """Train ``model`` in place.

    ``phase`` "pretrain" adds the masked-input objectives; "finetune" trains
    QA and grounding only. Every random draw comes from generators seeded by
    ``cfg.seed``, so identical inputs give bit-identical parameters.
    ``stop_at_accuracy`` ends training once an epoch's running train accuracy
    (percent) reaches it.
    """
    if phase not in ("pretrain", "finetune"):
        raise ValueError(f"unknown phase {phase!r}")
    if not samples:
        raise ValueError("empty training set")
    samples = list(samples)
    rng = np.random.default_rng(derive_seed(cfg.seed, phase, "order"))
    mask_rng = np.random.default_rng(derive_seed(cfg.seed, phase, "mask"))
    model.rng = np.random.default_rng(derive_seed(cfg.seed, phase, "dropout"))
    model.train()
    opt = AdamW(model.parameters(), cfg.lr, cfg.weight_decay)
    n_batches = math.ceil(len(samples) / cfg.batch_size)
    per_epoch = math.ceil(n_batches / cfg.grad_accum)
    total = per_epoch * cfg.epochs
    unk = featurizer.table.unk
    result = TrainResult()
    log_f = open(log_path, "w") if log_path else None
    step = 0
    try:
        for epoch in range(cfg.epochs):
            correct = seen = 0
            accum = []
            opt.zero_grad()
            for bi, idx in enumerate(_batches(len(samples), cfg.batch_size, rng)):
                batch = featurizer([samples[i] for i in idx])
                plan = sample_mask_plan(batch, mask_rng, cfg.mask_prob) if phase == "pretrain" else None
                loss, parts, pred = model.loss(batch, plan, unk, cfg.grounding_weight)
                if not np.isfinite(loss.data):
                    raise TrainingDiverged(f"{phase} epoch {epoch} batch {bi}: loss is {loss.data}; parts={parts}")
                backward(loss * (1.0 / cfg.grad_accum))
                accum.append((float(loss.data), parts))
                correct += int(np.sum((pred == batch.answers) & (batch.answers != unk)))
                seen += len(idx)
                last = bi == n_batches - 1
                if len(accum) == cfg.grad_accum or last:
                    lr = lr_schedule(step, total, cfg.lr, cfg.warmup)
                    opt.step(lr)
                    opt.zero_grad()
                    rec = {"step": step, "phase": phase, "epoch": epoch, "lr": lr,
                           "loss": float(np.mean([a[0] for a in accum]))}
                    for k in accum[0][1]:
                        rec[k] = float(np.mean([a[1][k] for a in accum]))
                    result.log.append(rec)
                    if log_f:
                        log_f.write(json.dumps(rec, sort_keys=True) + "\n")
                    accum = []
                    step += 1
            acc = 100.0 * correct / max(seen, 1)
            result.train_accuracy.append(acc)
            if stop_at_accuracy is not None and acc >= stop_at_accuracy:
                break
    finally:
        if log_f:
            log_f.close()
    model.eval()
    return result


class ModelPredictor:
    """Evaluation-mode wrapper returning (labels, grounding vectors)."""

    def __init__(self, model: TriModalTransformer, featurizer: Featurizer, batch_size: int = 128):
        self.model = model
        self.featurizer = featurizer
        self.batch_size = batch_size

    def __call__(self, samples: Sequence[QASample]):
        self.model.eval()
        labels, boxes = [], []
        with no_grad():
            for i in range(0, len(samples), self.batch_size):
                batch = self.featurizer(samples[i: i + self.batch_size])
                _, logits, grounding = self.model(batch)
                labels.append(np.argmax(logits.data, axis=1))
                boxes.append(grounding.data)
        return np.concatenate(labels), np.concatenate(boxes).astype(np.float64)


def accuracy(model, samples, featurizer) -> float:
    labels, _ = ModelPredictor(model, featurizer)(samples)
    gold = np.array([featurizer.table.encode(s.answer) for s in samples])
    return float(100.0 * np.mean((labels == gold) & (gold != featurizer.table.unk)))


def save_model(model: TriModalTransformer, path, extra: dict | None = None) -> Path:
    meta = {"config": model.cfg.to_json()}
    meta.update(extra or {})
    return save_checkpoint(path, model.named_parameters(), meta)


def load_model(path) -> tuple[TriModalTransformer, dict]:
    _, extra = load_checkpoint(path)
    model = TriModalTransformer(ModelConfig.from_json(extra["config"]))
    load_into(model, path)
    model.eval()
    return model, extra
