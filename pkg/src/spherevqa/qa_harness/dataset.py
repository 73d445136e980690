"""Benchmark assembly, splits and JSON-lines persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .questions import QASample, augment_counterexamples, generate_scene_qa
from .scenes import Scene, derive_seed, generate_scene, split_of


@dataclass
class Benchmark:
    scenes: dict[int, Scene]
    samples: list[QASample]
    root_seed: int = 0
    meta: dict = field(default_factory=dict)

    def split(self, name: str) -> list[QASample]:
        return [s for s in self.samples if split_of(s.scene_seed) == name]

    def subset(self, samples: list[QASample]) -> "Benchmark":
        seeds = {s.scene_seed for s in samples}
        return Benchmark({k: v for k, v in self.scenes.items() if k in seeds}, list(samples),
                         self.root_seed, dict(self.meta))


def generate_benchmark(root_seed: int, n_scenes: int, n_pairs: int = 2,
                       counterexample_fraction: float = 0.2) -> Benchmark:
    """Scenes from derived seeds, template QA per scene, then counterexample augmentation.

    Augmentation runs per split so every added question stays inside its split.
    """
    scenes = {}
    for i in range(n_scenes):
        s = derive_seed(root_seed, "scene", i) % (2 ** 31)
        scenes[s] = generate_scene(s)
    base = [qa for s in scenes.values() for qa in generate_scene_qa(s, n_pairs)]
    samples = []
    for name in ("train", "val", "test"):
        part = [q for q in base if split_of(q.scene_seed) == name]
        samples += augment_counterexamples(part, scenes, counterexample_fraction,
                                           seed=derive_seed(root_seed, name))
    meta = {"n_scenes": n_scenes, "n_pairs": n_pairs,
            "counterexample_fraction": counterexample_fraction}
    return Benchmark(scenes, samples, root_seed, meta)


def write_benchmark(bench: Benchmark, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"scenes": out / "scenes.jsonl", "qa": out / "qa.jsonl"}
    with open(paths["scenes"], "w") as f:
        for seed in sorted(bench.scenes):
            f.write(json.dumps(bench.scenes[seed].to_json(), sort_keys=True) + "\n")
    with open(paths["qa"], "w") as f:
        for qa in bench.samples:
            f.write(json.dumps(qa.to_json(), sort_keys=True) + "\n")
    return paths


def read_benchmark(out_dir) -> Benchmark:
    """Load QA records and regenerate scenes from their seeds (checked against the file)."""
    out = Path(out_dir)
    scenes = {}
    with open(out / "scenes.jsonl") as f:
        for lineno, line in enumerate(f, 1):
            rec = json.loads(line)
            sc = generate_scene(int(rec["seed"]))
            if json.loads(json.dumps(sc.to_json(), sort_keys=True)) != rec:
                raise ValueError(f"scenes.jsonl line {lineno}: record does not match seed {rec['seed']}")
            scenes[sc.seed] = sc
    with open(out / "qa.jsonl") as f:
        samples = [QASample.from_json(json.loads(line)) for line in f if line.strip()]
    return Benchmark(scenes, samples)
