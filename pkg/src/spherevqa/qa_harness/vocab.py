"""Answer table and question vocabulary."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .questions import NONE, RELATIONS, QASample
from .scenes import CATEGORIES, COLORS, SOUNDS

UNK = "<unk>"
ANSWER_COVERAGE = 0.93


@dataclass
class AnswerTable:
    answers: list[str]  # UNK is always the last entry

    def __post_init__(self):
        if not self.answers or self.answers[-1] != UNK:
            self.answers = [a for a in self.answers if a != UNK] + [UNK]
        self.index = {a: i for i, a in enumerate(self.answers)}

    @property
    def unk(self) -> int:
        return len(self.answers) - 1

    def __len__(self) -> int:
        return len(self.answers)

    def encode(self, answer: str) -> int:
        return self.index.get(answer, self.unk)

    def decode(self, label: int) -> str:
        return self.answers[label]

    def to_json(self) -> list[str]:
        return list(self.answers)


def build_answer_table(samples: Sequence[QASample], coverage: float = ANSWER_COVERAGE) -> AnswerTable:
    """Smallest frequency-ranked prefix whose cumulative share reaches ``coverage``."""
    if not samples:
        raise ValueError("cannot build an answer table from no samples")
    counts = Counter(s.answer for s in samples)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = len(samples)
    kept, cum = [], 0
    for ans, c in ranked:
        kept.append(ans)
        cum += c
        if cum >= coverage * total - 1e-9:
            break
    return AnswerTable(kept + [UNK])


SPECIALS = ("<pad>", "<unk>", "<mask>")
PAD_ID, UNK_ID, MASK_ID = 0, 1, 2
_TEMPLATE_WORDS = ("where is the in relation to what color object making sound which "
                   "left right of next opposite above below")


class Vocabulary:
    """Whitespace-token vocabulary over the synthetic question language."""

    def __init__(self, words: Iterable[str] | None = None):
        if words is None:
            words = set(_TEMPLATE_WORDS.split())
            for group in (CATEGORIES, COLORS, SOUNDS, (NONE,)):
                words.update(group)
            for r in RELATIONS:
                words.update(r.split())
        self.tokens = list(SPECIALS) + sorted(set(words) - set(SPECIALS))
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] if 0 <= i < len(self.tokens) else SPECIALS[UNK_ID] for i in ids]


def tokenize(text: str) -> list[str]:
    return text.lower().replace("?", " ").split()
