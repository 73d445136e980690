"""Template question generation over synthetic scenes.

Template inventory (id: question -> answer):

    ss_relation: "where is the <X> in relation to the <Y>"   -> relation of X to Y
    ss_object:   "what is <rel> the <Y>"                      -> category of the unique X
    ss_color:    "what color is the object <rel> the <Y>"     -> colour of the unique X
    av_source:   "what is making the <sound> sound"           -> category of the source, or none
    av_sound:    "which sound is the <X> making"              -> sound of X, or none
    av_color:    "what color is the object making the <sound> sound" -> colour of the source
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sphere_geom import SphericalBox, SpatialRelation, classify_relation
from .scenes import CATEGORIES, COLORS, SOUNDS, Scene, derive_seed

NONE = "none"
SS, AV = "SS", "AV"
TEMPLATES = {
    "ss_relation": SS, "ss_object": SS, "ss_color": SS,
    "av_source": AV, "av_sound": AV, "av_color": AV,
}
RELATIONS = tuple(r.value for r in SpatialRelation)


@dataclass
class QASample:
    question: list[str]
    answer: str
    task: str
    template: str
    scene_seed: int
    grounding: SphericalBox | None = None
    counterexample: bool = False
    # object indices the question refers to, for consistency checks
    refs: tuple = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "question_tokens": self.question,
            "answer": self.answer,
            "type": self.task,
            "template": self.template,
            "grounding": self.grounding.to_json() if self.grounding else None,
            "scene_seed": self.scene_seed,
            "counterexample": self.counterexample,
            "refs": list(self.refs),
        }

    @classmethod
    def from_json(cls, d: dict) -> "QASample":
        g = d.get("grounding")
        return cls(list(d["question_tokens"]), d["answer"], d["type"], d["template"],
                   int(d["scene_seed"]), SphericalBox.from_json(g) if g else None,
                   bool(d.get("counterexample", False)), tuple(d.get("refs", ())))


def _phrase(scene: Scene, i: int) -> list[str]:
    return ["the"] + scene.objects[i].phrase.split()


def _rel(scene: Scene, target: int, ref: int) -> SpatialRelation:
    return classify_relation(scene.objects[ref].box, scene.objects[target].box)


def generate_spatial_qa(scene: Scene, n_pairs: int = 2, rng=None) -> list[QASample]:
    """Relation questions for sampled ordered pairs plus one attribute variant."""
    n = len(scene.objects)
    if n < 2:
        raise ValueError("spatial questions need two objects")
    rng = rng or np.random.default_rng(derive_seed(scene.seed, "ss"))
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    pick = rng.choice(len(pairs), min(n_pairs, len(pairs)), replace=False)
    out = []
    for k in pick:
        x, y = pairs[int(k)]
        rel = _rel(scene, x, y)
        q = ["where", "is"] + _phrase(scene, x) + ["in", "relation", "to"] + _phrase(scene, y)
        out.append(QASample(q, rel.value, SS, "ss_relation", scene.seed,
                            scene.objects[x].box, refs=(x, y)))

    # attribute variant: a reference whose relation class has exactly one member
    order = rng.permutation(n)
    for y in order:
        groups: dict[SpatialRelation, list[int]] = {}
        for x in range(n):
            if x != y:
                groups.setdefault(_rel(scene, x, int(y)), []).append(x)
        unique = [(r, xs[0]) for r, xs in groups.items() if len(xs) == 1]
        if not unique:
            continue
        r, x = unique[int(rng.integers(len(unique)))]
        y = int(y)
        if rng.random() < 0.5:
            q = ["what", "is"] + r.value.split() + _phrase(scene, y)
            ans, tpl = CATEGORIES[scene.objects[x].category], "ss_object"
        else:
            q = ["what", "color", "is", "the", "object"] + r.value.split() + _phrase(scene, y)
            ans, tpl = COLORS[scene.objects[x].color], "ss_color"
        out.append(QASample(q, ans, SS, tpl, scene.seed, scene.objects[x].box, refs=(x, y)))
        break
    return out


def generate_av_qa(scene: Scene, rng=None) -> list[QASample]:
    """Sound-to-object and object-to-sound questions, one non-sounding probe."""
    sounding = scene.sounding_objects()
    if not sounding:
        raise ValueError("audio-visual questions need a sounding object")
    rng = rng or np.random.default_rng(derive_seed(scene.seed, "av"))
    out = []
    for i in sounding:
        o = scene.objects[i]
        snd = SOUNDS[o.sound]
        if rng.random() < 0.5:
            q = ["what", "is", "making", "the", snd, "sound"]
            out.append(QASample(q, CATEGORIES[o.category], AV, "av_source", scene.seed, o.box, refs=(i,)))
        else:
            q = ["what", "color", "is", "the", "object", "making", "the", snd, "sound"]
            out.append(QASample(q, COLORS[o.color], AV, "av_color", scene.seed, o.box, refs=(i,)))
        q = ["which", "sound", "is"] + _phrase(scene, i) + ["making"]
        out.append(QASample(q, snd, AV, "av_sound", scene.seed, o.box, refs=(i,)))
    silent = [i for i in range(len(scene.objects)) if i not in sounding]
    if silent:
        i = int(silent[int(rng.integers(len(silent)))])
        q = ["which", "sound", "is"] + _phrase(scene, i) + ["making"]
        out.append(QASample(q, NONE, AV, "av_sound", scene.seed, scene.objects[i].box,
                            counterexample=True, refs=(i,)))
    return out


def _counterexample(scene: Scene, rng) -> QASample:
    if rng.random() < 0.5:
        absent = [s for s in range(len(SOUNDS)) if s not in scene.present_sounds()]
        snd = SOUNDS[int(absent[int(rng.integers(len(absent)))])]
        q = ["what", "is", "making", "the", snd, "sound"]
        return QASample(q, NONE, AV, "av_source", scene.seed, None, counterexample=True)
    present = {(o.category, o.color) for o in scene.objects}
    absent = [(c, k) for c in range(len(CATEGORIES)) for k in range(len(COLORS))
              if (c, k) not in present]
    c, k = absent[int(rng.integers(len(absent)))]
    q = ["which", "sound", "is", "the", COLORS[k], CATEGORIES[c], "making"]
    return QASample(q, NONE, AV, "av_sound", scene.seed, None, counterexample=True)


def augment_counterexamples(samples: list[QASample], scenes: dict[int, Scene],
                            fraction: float = 0.2, seed: int = 0) -> list[QASample]:
    """Append ``round(fraction * len(samples))`` questions about absent sounds/objects."""
    if fraction <= 0 or not samples:
        return list(samples)
    rng = np.random.default_rng(derive_seed(seed, "counterexamples"))
    seeds = sorted({s.scene_seed for s in samples})
    extra = []
    for _ in range(int(round(fraction * len(samples)))):
        sc = scenes[seeds[int(rng.integers(len(seeds)))]]
        extra.append(_counterexample(sc, rng))
    return list(samples) + extra


def mentions_absent_description(sample: QASample, scene: Scene) -> bool:
    """True if the question names a sound or object that does not occur in ``scene``."""
    toks = sample.question
    for i, tok in enumerate(toks):
        if tok in SOUNDS and SOUNDS.index(tok) not in scene.present_sounds() and sample.template != "av_sound":
            return True
        if tok in CATEGORIES and i > 0 and toks[i - 1] in COLORS:
            if scene.find(CATEGORIES.index(tok), COLORS.index(toks[i - 1])) is None:
                return True
    return False


def generate_scene_qa(scene: Scene, n_pairs: int = 2) -> list[QASample]:
    return generate_spatial_qa(scene, n_pairs) + generate_av_qa(scene)
