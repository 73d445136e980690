"""Accuracy / grounding metrics and the prior baselines."""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Callable, Protocol, Sequence

import numpy as np

from .questions import AV, SS, QASample
from .vocab import AnswerTable


class Predictor(Protocol):
    """Maps samples to answer labels and optional (n, 5) grounding vectors."""

    def __call__(self, samples: Sequence[QASample]) -> tuple[np.ndarray, np.ndarray | None]: ...


def evaluate(predictor: Predictor, samples: Sequence[QASample], table: AnswerTable,
             grounding_target: Callable[[QASample], np.ndarray] | None = None) -> dict:
    """Exact-match accuracy (UNK never counts) overall and per task, plus grounding MSE.

    Grounding MSE averages over samples that carry a grounding box; it is None
    when the predictor returns no grounding or no sample is grounded.
    """
    if not samples:
        raise ValueError("cannot evaluate on an empty sample set")
    labels, boxes = predictor(samples)
    labels = np.asarray(labels)
    gold = np.array([table.encode(s.answer) for s in samples])
    correct = (labels == gold) & (gold != table.unk) & (labels != table.unk)
    task = np.array([s.task for s in samples])

    def acc(mask):
        return float(100.0 * correct[mask].mean()) if mask.any() else None

    out = {
        "n": len(samples),
        "accuracy_all": acc(np.ones(len(samples), bool)),
        "accuracy_SS": acc(task == SS),
        "accuracy_AV": acc(task == AV),
        "grounding_mse": None,
    }
    if boxes is not None and grounding_target is not None:
        idx = [i for i, s in enumerate(samples) if s.grounding is not None]
        if idx:
            tgt = np.stack([grounding_target(samples[i]) for i in idx])
            pred = np.asarray(boxes)[idx]
            out["grounding_mse"] = float(np.mean((pred - tgt) ** 2))
    return out


class ConstantPredictor:
    def __init__(self, label: int, box: np.ndarray | None = None):
        self.label = label
        self.box = box

    def __call__(self, samples):
        labels = np.full(len(samples), self.label)
        boxes = None if self.box is None else np.tile(self.box, (len(samples), 1))
        return labels, boxes


class TemplatePriorPredictor:
    def __init__(self, by_template: dict[str, int], fallback: int):
        self.by_template = by_template
        self.fallback = fallback

    def __call__(self, samples):
        return np.array([self.by_template.get(s.template, self.fallback) for s in samples]), None


def _majority(answers: Sequence[str]) -> str:
    counts = Counter(answers)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def prior_baseline(train: Sequence[QASample], table: AnswerTable) -> ConstantPredictor:
    """Always answer the most frequent training answer."""
    if not train:
        raise ValueError("empty training set")
    return ConstantPredictor(table.encode(_majority([s.answer for s in train])))


def qtype_prior_baseline(train: Sequence[QASample], table: AnswerTable) -> TemplatePriorPredictor:
    """Most frequent training answer per question template."""
    if not train:
        raise ValueError("empty training set")
    groups = defaultdict(list)
    for s in train:
        groups[s.template].append(s.answer)
    by_t = {t: table.encode(_majority(a)) for t, a in groups.items()}
    return TemplatePriorPredictor(by_t, table.encode(_majority([s.answer for s in train])))


class OraclePredictor:
    def __init__(self, table: AnswerTable, grounding_target=None):
        self.table = table
        self.grounding_target = grounding_target

    def __call__(self, samples):
        labels = np.array([self.table.encode(s.answer) for s in samples])
        if self.grounding_target is None:
            return labels, None
        boxes = np.stack([self.grounding_target(s) if s.grounding is not None else np.zeros(5)
                          for s in samples])
        return labels, boxes
