"""Generate the synthetic panoramic QA benchmark and score the simple baselines."""

from collections import Counter

from spherevqa.qa_harness import (
    OraclePredictor, build_answer_table, evaluate, generate_benchmark, prior_baseline,
    qtype_prior_baseline,
)
from spherevqa.qa_harness.scenes import CATEGORIES, COLORS
from spherevqa.sphere_geom import grounding_vector

bench = generate_benchmark(root_seed=0, n_scenes=300)
train, test = bench.split("train"), bench.split("test")
print(f"{len(bench.scenes)} scenes, {len(bench.samples)} questions "
      f"({len(train)} train / {len(test)} test)")

sc = next(iter(bench.scenes.values()))
print("one scene:", [(COLORS[o.color], CATEGORIES[o.category], "sounding" if o.sounding else "silent")
                     for o in sc.objects])
for q in bench.samples[:6]:
    print(f"  [{q.template}] {' '.join(q.question)} -> {q.answer}")

print("templates:", dict(Counter(q.template for q in train)))
table = build_answer_table(train)
print("answer table size:", len(table))

target = lambda q: grounding_vector(q.grounding, "quaternion")
for name, pred in (("prior", prior_baseline(train, table)),
                   ("q-type prior", qtype_prior_baseline(train, table)),
                   ("oracle", OraclePredictor(table, target))):
    r = evaluate(pred, test, table, target)
    print(f"{name:>12}: All {r['accuracy_all']:.1f}  SS {r['accuracy_SS']:.1f}  AV {r['accuracy_AV']:.1f}"
          f"  grounding MSE {r['grounding_mse']}")
