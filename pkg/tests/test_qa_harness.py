import json
import math
from collections import Counter

import numpy as np
import pytest

from spherevqa.qa_harness import (
    AV, NONE, SS, ConstantPredictor, OraclePredictor, QASample, augment_counterexamples,
    build_answer_table, derive_seed, evaluate, generate_av_qa, generate_benchmark,
    generate_scene, generate_spatial_qa, prior_baseline, qtype_prior_baseline, read_benchmark,
    split_of, write_benchmark,
)
from spherevqa.qa_harness.questions import RELATIONS, TEMPLATES, mentions_absent_description
from spherevqa.qa_harness.scenes import (
    AUDIO_FEAT_DIM, CATEGORIES, COLORS, REGION_FEAT_DIM, SOUNDS, Scene, SceneObject,
)
from spherevqa.qa_harness.vocab import UNK, AnswerTable, Vocabulary, tokenize
from spherevqa.sphere_geom import SphericalBox, classify_relation, grounding_vector


@pytest.fixture(scope="module")
def bench():
    return generate_benchmark(3, 120)


def test_derive_seed_is_sha256_prefix():
    import hashlib

    expect = int.from_bytes(hashlib.sha256(b"5/scene/2").digest()[:8], "big")
    assert derive_seed(5, "scene", 2) == expect
    assert derive_seed(5, "a") != derive_seed(5, "b")


def test_scene_deterministic_and_valid():
    a, b = generate_scene(17), generate_scene(17)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
    np.testing.assert_array_equal(a.region_feats, b.region_feats)
    for seed in range(200):
        sc = generate_scene(seed)
        assert 3 <= len(sc.objects) <= 8
        assert sc.sounding_objects()
        assert sc.region_feats.shape == (len(sc.objects), REGION_FEAT_DIM)
        left, right, tgt = sc.audio_arrays()
        assert left.shape[1] == AUDIO_FEAT_DIM and left.shape == right.shape
        assert np.all(np.abs(tgt[:, 0]) <= 1) and np.all((tgt[:, 1:] >= 0) & (tgt[:, 1:] <= 1))
        pairs = {(o.category, o.color) for o in sc.objects}
        assert len(pairs) == len(sc.objects)


def test_scene_needs_three_objects_and_a_source():
    box = SphericalBox(0, 0, 0.2, 0.2)
    objs = [SceneObject(0, 0, box, True, 0), SceneObject(1, 0, box)]
    with pytest.raises(ValueError):
        Scene(0, objs, [], np.zeros((2, REGION_FEAT_DIM)))
    with pytest.raises(ValueError):
        Scene(0, [SceneObject(i, 0, box) for i in range(3)], [], np.zeros((3, REGION_FEAT_DIM)))


def test_elevation_density_is_equator_heavy():
    phis = [abs(o.box.phi) for s in range(10_000) for o in generate_scene(s).objects[:1]]
    # the generator draws sin(phi) uniformly on [-0.95, 0.95]
    cap = math.asin(0.95)
    uniform_angle = cap / 2
    area_uniform = (0.95 * cap + math.sqrt(1 - 0.95 ** 2) - 1) / 0.95
    assert np.mean(phis) < uniform_angle
    assert abs(np.mean(phis) - area_uniform) < 0.01


def test_audio_carries_spatial_sign():
    agree = total = 0
    for s in range(300):
        sc = generate_scene(s)
        if len(sc.sounding_objects()) != 1:
            continue
        o = sc.objects[sc.sounding_objects()[0]]
        if abs(math.sin(o.box.theta)) < 0.2:
            continue
        ev = [e for e in sc.events if SOUNDS[o.sound] in e.labels]
        total += 1
        agree += all(np.sign(e.skewness) == np.sign(math.sin(o.box.theta)) for e in ev)
    assert total > 50 and agree == total


def test_split_ratios_and_disjoint(bench):
    counts = Counter(split_of(s) for s in range(20_000))
    assert abs(counts["train"] / 20_000 - 0.80) < 0.01
    assert abs(counts["val"] / 20_000 - 0.07) < 0.01
    assert abs(counts["test"] / 20_000 - 0.13) < 0.01
    seen = {name: {q.scene_seed for q in bench.split(name)} for name in ("train", "val", "test")}
    assert not (seen["train"] & seen["val"]) and not (seen["train"] & seen["test"])
    assert not (seen["val"] & seen["test"])


def test_spatial_answers_match_classifier(bench):
    n = 0
    for q in bench.samples:
        if q.template == "ss_relation":
            x, y = q.refs
            sc = bench.scenes[q.scene_seed]
            assert classify_relation(sc.objects[y].box, sc.objects[x].box).value == q.answer
            assert q.answer in RELATIONS
            n += 1
    assert n > 100


def test_attribute_variant_has_unique_target(bench):
    for q in bench.samples:
        if q.template in ("ss_object", "ss_color"):
            x, y = q.refs
            sc = bench.scenes[q.scene_seed]
            rel = classify_relation(sc.objects[y].box, sc.objects[x].box)
            members = [i for i in range(len(sc.objects))
                       if i != y and classify_relation(sc.objects[y].box, sc.objects[i].box) is rel]
            assert members == [x]
            assert " ".join(rel.value.split()) in " ".join(q.question)


def test_spatial_examples():
    def scene(*centers):
        objs = [SceneObject(i, 0, SphericalBox(t, p, 0.2, 0.2)) for i, (t, p) in enumerate(centers)]
        objs[0].sounding, objs[0].sound = True, 0
        return Scene(0, objs, [], np.zeros((len(objs), REGION_FEAT_DIM)))

    sc = scene((0, 0), (0, math.pi / 4), (math.pi, 0))
    qs = generate_spatial_qa(sc, n_pairs=6)
    got = {q.refs: q.answer for q in qs if q.template == "ss_relation"}
    assert got[(1, 0)] == "above" and got[(0, 1)] == "below"
    assert got[(2, 0)] == "opposite of"


def test_av_questions(bench):
    for q in bench.samples:
        if q.task != AV or q.counterexample:
            continue
        sc = bench.scenes[q.scene_seed]
        (i,) = q.refs
        o = sc.objects[i]
        assert o.sounding and q.grounding == o.box
        if q.template == "av_source":
            assert q.answer == CATEGORIES[o.category]
        elif q.template == "av_color":
            assert q.answer == COLORS[o.color]
        else:
            assert q.answer == SOUNDS[o.sound]
    silent = [q for q in bench.samples if q.template == "av_sound" and q.answer == NONE and q.refs]
    assert silent and all(not bench.scenes[q.scene_seed].objects[q.refs[0]].sounding for q in silent)


def test_counterexamples_reference_absent_things(bench):
    extra = [q for q in bench.samples if q.counterexample and not q.refs]
    assert extra
    for q in extra:
        assert q.answer == NONE and q.grounding is None
        assert mentions_absent_description(q, bench.scenes[q.scene_seed])


def test_augmentation_fraction_zero_is_identity(bench):
    base = bench.samples[:50]
    assert augment_counterexamples(base, bench.scenes, 0.0) == base


def test_augmentation_lowers_majority_frequency():
    # a skewed toy corpus: sound questions whose answers are mostly one sound
    scenes = {s: generate_scene(s) for s in range(60)}
    base = []
    for sc in scenes.values():
        for q in generate_av_qa(sc):
            if q.template == "av_sound" and not q.counterexample:
                base.append(q)
    top = Counter(q.answer for q in base).most_common(1)[0][0]
    skewed = [q for q in base if q.answer == top] * 8 + [q for q in base if q.answer != top]

    def majority_share(samples):
        return Counter(q.answer for q in samples).most_common(1)[0][1] / len(samples)

    before = majority_share(skewed)
    after = majority_share(augment_counterexamples(skewed, scenes, 0.2, seed=1))
    assert after < before


def test_answer_table_rules():
    mk = lambda answers: [QASample(["x"], a, SS, "ss_relation", 0) for a in answers]
    t = build_answer_table(mk(["a"] * 5))
    assert t.answers == ["a", UNK] and t.unk == 1
    t = build_answer_table(mk(list("aaabbc")), coverage=1.0)
    assert t.answers == ["a", "b", "c", UNK]
    t = build_answer_table(mk(list("bbaacd")), coverage=0.6)
    assert t.answers == ["a", "b", UNK]  # tie broken lexicographically
    assert t.encode("zzz") == t.unk and t.decode(0) == "a"
    with pytest.raises(ValueError):
        build_answer_table([])


def test_answer_table_coverage(bench):
    tr = bench.split("train")
    t = build_answer_table(tr)
    covered = sum(t.encode(q.answer) != t.unk for q in tr) / len(tr)
    assert covered >= 0.93
    shorter = AnswerTable(t.answers[:-2])
    assert sum(shorter.encode(q.answer) != shorter.unk for q in tr) / len(tr) < 0.93


def test_vocabulary_covers_questions(bench):
    v = Vocabulary()
    assert v.tokens[:3] == ["<pad>", "<unk>", "<mask>"]
    for q in bench.samples:
        assert 1 not in v.encode(q.question)
    assert tokenize("Where is the Red dog?") == ["where", "is", "the", "red", "dog"]


def test_evaluate_oracle_unk_and_constant(bench):
    te = bench.split("test")
    table = build_answer_table(bench.split("train"))
    target = lambda q: grounding_vector(q.grounding, "quaternion")
    res = evaluate(OraclePredictor(table, target), te, table, target)
    covered = np.mean([table.encode(q.answer) != table.unk for q in te]) * 100
    assert res["accuracy_all"] == pytest.approx(covered) and res["grounding_mse"] == 0.0
    res = evaluate(ConstantPredictor(table.unk), te, table, target)
    assert res["accuracy_all"] == 0.0 and res["grounding_mse"] is None
    with pytest.raises(ValueError):
        evaluate(ConstantPredictor(0), [], table)


def test_constant_box_mse_is_variance(bench):
    te = [q for q in bench.samples if q.grounding is not None]
    table = build_answer_table(bench.split("train"))
    target = lambda q: grounding_vector(q.grounding, "cartesian")
    tg = np.stack([target(q) for q in te])
    box = tg.mean(axis=0)
    res = evaluate(ConstantPredictor(0, box), te, table, target)
    # mean over coordinates of the per-coordinate population variance
    assert res["grounding_mse"] == pytest.approx(tg.var(axis=0).mean(), rel=1e-12)


def test_prior_baselines(bench):
    tr = bench.split("train")
    table = build_answer_table(tr)
    p = evaluate(prior_baseline(tr, table), tr, table)
    freq = Counter(q.answer for q in tr).most_common(1)[0][1] / len(tr) * 100
    assert p["accuracy_all"] == pytest.approx(freq)
    q = evaluate(qtype_prior_baseline(tr, table), tr, table)
    assert q["accuracy_all"] >= p["accuracy_all"]


def test_evaluate_order_invariant(bench):
    te = bench.split("test")
    table = build_answer_table(bench.split("train"))
    pred = qtype_prior_baseline(bench.split("train"), table)
    a = evaluate(pred, te, table)
    b = evaluate(pred, te[::-1], table)
    assert a == b


def test_benchmark_files_round_trip(tmp_path, bench):
    small = generate_benchmark(7, 15)
    write_benchmark(small, tmp_path / "a")
    write_benchmark(generate_benchmark(7, 15), tmp_path / "b")
    for name in ("scenes.jsonl", "qa.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    back = read_benchmark(tmp_path / "a")
    assert [q.to_json() for q in back.samples] == [q.to_json() for q in small.samples]
    rec = json.loads((tmp_path / "a" / "qa.jsonl").read_text().splitlines()[0])
    assert {"question_tokens", "answer", "type", "grounding", "scene_seed"} <= set(rec)


def test_tampered_scene_file_rejected(tmp_path):
    write_benchmark(generate_benchmark(7, 5), tmp_path)
    lines = (tmp_path / "scenes.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    rec["objects"][0]["color"] = "purple"
    lines[0] = json.dumps(rec, sort_keys=True)
    (tmp_path / "scenes.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 1"):
        read_benchmark(tmp_path)


def test_template_inventory():
    assert set(TEMPLATES.values()) == {SS, AV}
    assert len(TEMPLATES) == 6
