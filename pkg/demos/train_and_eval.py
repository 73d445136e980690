"""Train the small transformer on a small benchmark and compare with the baselines.

Set N_SCENES higher for a more convincing run; at 300 scenes it takes a
minute or two on one core.
"""

import os

from spherevqa.lavit import ModelPredictor, TrainConfig, train
from spherevqa.lavit.experiment import setup
from spherevqa.qa_harness import evaluate, generate_benchmark, qtype_prior_baseline

n_scenes = int(os.environ.get("N_SCENES", 300))
bench = generate_benchmark(0, n_scenes)
train_s, test_s = bench.split("train"), bench.split("test")

exp = setup(bench, "quaternion")
pre = train(exp.model, train_s, exp.featurizer, TrainConfig.desk("pretrain", epochs=1), "pretrain")
print("pretrain losses:", {k: round(v, 3) for k, v in pre.log[-1].items() if k not in ("step", "phase", "epoch")})
ft = train(exp.model, train_s, exp.featurizer, TrainConfig.desk("finetune", epochs=4))
print("finetune train accuracy per epoch:", [round(a, 1) for a in ft.train_accuracy])

gt = exp.featurizer.grounding_target
model = evaluate(ModelPredictor(exp.model, exp.featurizer), test_s, exp.table, gt)
qprior = evaluate(qtype_prior_baseline(train_s, exp.table), test_s, exp.table, gt)
print(f"model        All {model['accuracy_all']:.1f}  grounding MSE {model['grounding_mse']:.4f}")
print(f"q-type prior All {qprior['accuracy_all']:.1f}")
