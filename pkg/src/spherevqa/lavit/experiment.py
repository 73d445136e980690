"""Wiring shared by the command line, the tests and the demos: vocabularies,
featurizer and model for a benchmark, plus the end-to-end gradient check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd.gradcheck import numeric_grad, relative_error
from ..autograd.tensor import backward
from ..qa_harness import Benchmark, build_answer_table, generate_benchmark
from ..qa_harness.scenes import AUDIO_FEAT_DIM, REGION_FEAT_DIM, derive_seed
from ..qa_harness.vocab import AnswerTable, Vocabulary
from .batching import Featurizer
from .config import ModelConfig, apply_env_overrides
from .model import TriModalTransformer, sample_mask_plan


@dataclass
class Experiment:
    vocab: Vocabulary
    table: AnswerTable
    featurizer: Featurizer
    model: TriModalTransformer


def model_config(preset: str, vocab: Vocabulary, table: AnswerTable, mode: str, **kw) -> ModelConfig:
    shapes = dict(vocab_size=len(vocab), answer_size=len(table), region_dim=REGION_FEAT_DIM,
                  audio_dim=AUDIO_FEAT_DIM, spatial_mode=mode)
    shapes.update(kw)
    if preset == "paper":
        # token and answer inventories follow the synthetic language, not a wordpiece table
        cfg = ModelConfig.paper(**shapes)
    elif preset == "desk":
        cfg = ModelConfig.desk(**shapes)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return apply_env_overrides(cfg)


def setup(bench: Benchmark, mode: str = "quaternion", preset: str = "desk",
          answers: list[str] | None = None, init: TriModalTransformer | None = None,
          seed: int = 0, **model_kw) -> Experiment:
    """Answer table from the train split (or ``answers``), featurizer and model.

    ``init`` reuses an existing model; its config then decides the spatial mode.
    """
    vocab = Vocabulary()
    table = AnswerTable(list(answers)) if answers else build_answer_table(bench.split("train"))
    if init is not None:
        model = init
    else:
        cfg = model_config(preset, vocab, table, mode, **model_kw)
        model = TriModalTransformer(cfg, derive_seed(seed, "model") % (2 ** 31))
    cfg = model.cfg
    if cfg.answer_size != len(table) or cfg.vocab_size != len(vocab):
        raise ValueError("model heads do not match the answer table / vocabulary")
    fz = Featurizer(vocab, table, bench.scenes, cfg.spatial_mode, cfg.max_len, cfg.max_regions,
                    np.dtype(cfg.dtype))
    return Experiment(vocab, table, fz, model)


def end_to_end_gradcheck(preset: str = "desk", seed: int = 0, n_params: int = 20,
                         batch_size: int = 4, eps: float = 1e-5) -> float:
    """Max relative error of the full training loss gradient on sampled coordinates.

    Runs the model in 64-bit with dropout off and a fixed masking plan, so the
    loss is a deterministic function of the parameters. ``n_params`` scalar
    coordinates are drawn across all parameter tensors.
    """
    bench = generate_benchmark(seed, 12)
    exp = setup(bench, "quaternion", preset, seed=seed, dtype="float64")
    model = exp.model
    model.eval()
    samples = bench.split("train")[:batch_size]
    batch = exp.featurizer(samples)
    rng = np.random.default_rng(derive_seed(seed, "gradcheck"))
    # a higher masking rate so every pretraining head sees rows in a tiny batch
    plan = sample_mask_plan(batch, rng, 0.5)
    unk = exp.table.unk

    def loss():
        return model.loss(batch, plan, unk)[0]

    params = model.parameters()
    for p in params:
        p.grad = None
    backward(loss())
    sizes = np.array([p.size for p in params])
    flat = rng.choice(int(sizes.sum()), n_params, replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for f in sorted(flat.tolist()):
        k = int(np.searchsorted(offsets, f, side="right") - 1)
        p, i = params[k], f - int(offsets[k])
        g_ad = 0.0 if p.grad is None else float(p.grad.reshape(-1)[i])
        g_fd = numeric_grad(loss, p, eps, [i])
        worst = max(worst, relative_error(np.array([g_ad]), g_fd))
    return worst
