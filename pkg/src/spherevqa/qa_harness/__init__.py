"""Synthetic panoramic QA benchmark: scenes, templates, answer table, metrics."""

from .dataset import Benchmark, generate_benchmark, read_benchmark, write_benchmark
from .evaluate import (ConstantPredictor, OraclePredictor, evaluate, prior_baseline,
                       qtype_prior_baseline)
from .questions import (AV, NONE, SS, QASample, augment_counterexamples, generate_av_qa,
                        generate_scene_qa, generate_spatial_qa)
from .scenes import Scene, SceneObject, derive_seed, generate_scene, split_of
from .vocab import AnswerTable, Vocabulary, build_answer_table

__all__ = [
    "Benchmark", "generate_benchmark", "read_benchmark", "write_benchmark",
    "evaluate", "prior_baseline", "qtype_prior_baseline", "ConstantPredictor", "OraclePredictor",
    "QASample", "SS", "AV", "NONE", "generate_spatial_qa", "generate_av_qa",
    "generate_scene_qa", "augment_counterexamples", "Scene", "SceneObject", "generate_scene",
    "derive_seed", "split_of", "AnswerTable", "Vocabulary", "build_answer_table",
]
