"""Language/audio/visual transformer for panoramic QA."""

from .batching import Batch, Featurizer
from .config import ModelConfig, TrainConfig
from .model import GROUNDING_WEIGHT, MASK_PROB, MaskPlan, TriModalTransformer, sample_mask_plan
from .optim import AdamW, AdamWState, lr_schedule, optimizer_step
from .train import ModelPredictor, TrainingDiverged, accuracy, load_model, save_model, train

__all__ = [
    "Batch", "Featurizer", "ModelConfig", "TrainConfig", "TriModalTransformer", "MaskPlan",
    "sample_mask_plan", "MASK_PROB", "GROUNDING_WEIGHT", "AdamW", "AdamWState", "lr_schedule",
    "optimizer_step", "train", "ModelPredictor", "TrainingDiverged", "accuracy", "save_model",
    "load_model",
]
