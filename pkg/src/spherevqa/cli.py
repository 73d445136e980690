"""Command-line entry point: geometry utilities, clip filters, dataset generation,
training, evaluation and gradient checks.

Every artifact-producing command writes ``manifest.json`` next to its outputs
with the command, its configuration, the root seed and a sha256 per output.
Exit status: 0 on success, 1 on invalid input (the message names the record),
2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import audio_events as ae
from . import media_filters as mf
from . import sphere_geom as sg


class InputError(Exception):
    """Bad user input; the message names the offending record."""


# ---------------------------------------------------------------------------
# shared plumbing


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def write_jsonl(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")
    return path


def read_jsonl(path) -> list[tuple[int, dict]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append((lineno, json.loads(line)))
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{lineno}: not valid JSON ({e.msg})") from None
    return out


def write_manifest(out_dir, command: str, config: dict, seed, outputs: dict[str, Path]) -> Path:
    digests = {name: {"path": Path(p).name, "sha256": sha256_file(p)}
               for name, p in sorted(outputs.items())}
    return write_json(Path(out_dir) / "manifest.json",
                      {"command": command, "config": config, "seed": seed, "outputs": digests})


def _config_of(args) -> dict:
    skip = {"func", "command"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k not in skip}


def _angle(v, degrees: bool) -> float:
    return math.radians(float(v)) if degrees else float(v)


def _box(rec: dict, degrees: bool, where: str) -> sg.SphericalBox:
    try:
        return sg.SphericalBox(_angle(rec["theta"], degrees), _angle(rec["phi"], degrees),
                               _angle(rec["w_theta"], degrees), _angle(rec["h_phi"], degrees),
                               float(rec.get("confidence", 1.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{where}: invalid box ({e})") from None


def _box_out(b: sg.SphericalBox) -> dict:
    return b.to_json()


# ---------------------------------------------------------------------------
# geometry commands


def cmd_calibrate(args) -> dict[str, Path]:
    """Lift NFoV points ``{x, y}`` or boxes ``{box: [[x0, y0], [x1, y1]]}`` onto the sphere."""
    try:
        persp = sg.Perspective(_angle(args.theta, args.degrees), _angle(args.phi, args.degrees))
    except ValueError as e:
        raise InputError(f"perspective: {e}") from None
    out = []
    for lineno, rec in read_jsonl(args.input):
        where = f"{args.input}:{lineno}"
        try:
            if "box" in rec:
                b = sg.nfov_box_to_spherical(rec["box"], persp, float(rec.get("confidence", 1.0)))
                out.append({"box": _box_out(b)})
            else:
                x, y = float(rec["x"]), float(rec["y"])
                v = sg.calibrate_point(x, y, persp)
                th, ph = v.to_angles()
                out.append({"x": v.x, "y": v.y, "z": v.z, "theta": th, "phi": ph})
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{where}: {e}") from None
    return {"calibrated": write_jsonl(Path(args.out) / "calibrated.jsonl", out)}


def cmd_nms(args) -> dict[str, Path]:
    boxes = [_box(rec, args.degrees, f"{args.input}:{n}") for n, rec in read_jsonl(args.input)]
    keep = sg.spherical_nms(boxes, tau=args.tau, max_keep=args.max_keep)
    return {"kept": write_jsonl(Path(args.out) / "kept.jsonl", [_box_out(b) for b in keep])}


def cmd_relation(args) -> dict[str, Path]:
    """Each record holds boxes ``a`` and ``b``; output is the relation of b to a."""
    out = []
    for n, rec in read_jsonl(args.input):
        where = f"{args.input}:{n}"
        if "a" not in rec or "b" not in rec:
            raise InputError(f"{where}: record needs boxes 'a' and 'b'")
        a, b = _box(rec["a"], args.degrees, where), _box(rec["b"], args.degrees, where)
        try:
            rel = sg.classify_relation(a, b)
        except ValueError as e:
            raise InputError(f"{where}: {e}") from None
        out.append({"relation": rel.value, "distance": sg.great_circle(a.center(), b.center())})
    return {"relations": write_jsonl(Path(args.out) / "relations.jsonl", out)}


# ---------------------------------------------------------------------------
# audio / frame commands


def _read_wav(path) -> mf.AudioTrack:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    try:
        return mf.read_wav(path)
    except ValueError as e:
        raise InputError(f"{path}: {e}") from None


def cmd_clips(args) -> dict[str, Path]:
    """Peak clips from a WAV, then dedup and (given frames) the visual filters.

    Frames are PNG files in ``--frames``, sorted by name and spaced ``1/--fps``
    seconds apart; each clip sees the frames inside its interval.
    """
    track = _read_wav(args.wav)
    try:
        clips = mf.extract_peak_clips(track, args.clip_len)
    except ValueError as e:
        raise InputError(f"{args.wav}: {e}") from None
    frames = []
    if args.frames:
        fdir = Path(args.frames)
        if not fdir.is_dir():
            raise InputError(f"{fdir}: not a directory")
        for i, p in enumerate(sorted(fdir.glob("*.png"))):
            try:
                frames.append((i / args.fps, mf.read_frame(p)))
            except Exception as e:  # PIL raises several unrelated types
                raise InputError(f"{p}: unreadable frame ({e})") from None
    cands = []
    rate = track.sample_rate
    for c in clips:
        a, b = int(round(c.start * rate)), int(round((c.start + c.duration) * rate))
        sub = mf.AudioTrack(track.samples[:, a:b], rate)
        inside = [f for t, f in frames if c.start <= t < c.start + c.duration]
        cands.append(mf.ClipCandidate(c, mf.mel_coefficients(sub), inside))
    kept, rejected = mf.filter_clips(cands, args.dedup_threshold, args.skew_threshold)
    out = Path(args.out)
    return {
        "clips": write_jsonl(out / "clips.jsonl",
                             [{"start": k.interval.start, "duration": k.interval.duration}
                              for k in kept]),
        "rejected": write_jsonl(out / "rejected.jsonl", rejected),
    }


def cmd_skewness(args) -> dict[str, Path]:
    """Skewness of a stereo WAV, whole-track or per ``{start, duration}`` span."""
    track = _read_wav(args.wav)
    if track.channels != 2:
        raise InputError(f"{args.wav}: expected 2 channels, got {track.channels}")
    left, right = track.samples
    spans = ([(f"{args.events}:{n}", r) for n, r in read_jsonl(args.events)] if args.events
             else [("track", {"start": 0.0, "duration": track.duration})])
    out = []
    for where, rec in spans:
        try:
            s, d = float(rec["start"]), float(rec["duration"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{where}: invalid span ({e})") from None
        a = int(round(s * track.sample_rate))
        b = min(left.size, int(round((s + d) * track.sample_rate)))
        if d <= 0 or a < 0 or b <= a:
            raise InputError(f"{where}: span outside the track")
        db = ae.sh_skewness(left[a:b], right[a:b])
        out.append({"start": s, "duration": d, "skewness_db": db,
                    "skewness": ae.normalize_skewness(db)})
    return {"skewness": write_jsonl(Path(args.out) / "skewness.jsonl", out)}


# ---------------------------------------------------------------------------
# dataset / model commands


def cmd_gen(args) -> dict[str, Path]:
    from .qa_harness import generate_benchmark, write_benchmark

    if args.n_scenes < 1:
        raise InputError("--n-scenes must be positive")
    bench = generate_benchmark(args.seed, args.n_scenes, args.pairs, args.counterexamples)
    paths = write_benchmark(bench, args.out)
    paths["meta"] = write_json(Path(args.out) / "meta.json",
                               dict(bench.meta, root_seed=args.seed))
    return paths


def _load_data(path):
    from .qa_harness import read_benchmark

    d = Path(path)
    if not (d / "qa.jsonl").exists() or not (d / "scenes.jsonl").exists():
        raise InputError(f"{d}: missing scenes.jsonl or qa.jsonl (run `gen` first)")
    try:
        return read_benchmark(d)
    except (KeyError, ValueError) as e:
        raise InputError(f"{d}: {e}") from None


def _train_cmd(args, phase: str) -> dict[str, Path]:
    from .lavit import TrainConfig, save_model, train
    from .lavit.config import apply_env_overrides
    from .lavit.experiment import setup

    bench = _load_data(args.data)
    samples = bench.split("train")
    if args.limit:
        samples = samples[: args.limit]
    if not samples:
        raise InputError(f"{args.data}: no training samples")
    init = None
    if args.init:
        from .lavit import load_model

        init, extra = load_model(args.init)
        answers = extra["answers"]
    else:
        answers = None
    exp = setup(bench, args.mode, args.preset, answers=answers, init=init, seed=args.seed)
    base = TrainConfig.paper(phase) if args.preset == "paper" else TrainConfig.desk(phase)
    over = {k: v for k, v in (("epochs", args.epochs), ("lr", args.lr),
                              ("batch_size", args.batch_size)) if v is not None}
    cfg = apply_env_overrides(TrainConfig(**dict(base.to_json(), seed=args.seed, **over)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = out / f"{phase}_log.jsonl"
    res = train(exp.model, samples, exp.featurizer, cfg, phase, log_path=log)
    ckpt = Path(save_model(exp.model, out / "checkpoint",
                           {"answers": exp.table.to_json(), "train": cfg.to_json(),
                            "phase": phase}))
    acc = write_json(out / "train_accuracy.json", res.train_accuracy)
    args.resolved_train_config = cfg.to_json()
    args.resolved_model_config = exp.model.cfg.to_json()
    return {"log": log, "params": ckpt / "params.bin", "checkpoint": ckpt / "manifest.json",
            "train_accuracy": acc}


def cmd_pretrain(args):
    return _train_cmd(args, "pretrain")


def cmd_finetune(args):
    return _train_cmd(args, "finetune")


REPORT_ROWS = ("prior", "qtype_prior", "model")


def emit_report(metrics: dict[str, dict], meta: dict | None = None) -> dict:
    """Shape per-predictor metrics into the results table.

    ``metrics`` maps row name to an ``evaluate`` result. A missing grounding
    prediction stays ``null`` rather than becoming zero.
    """
    rows = []
    for name in REPORT_ROWS:
        m = metrics.get(name)
        if m is None:
            continue
        rows.append({"method": name, "Ground MSE": m.get("grounding_mse"),
                     "SS": m.get("accuracy_SS"), "AV": m.get("accuracy_AV"),
                     "All": m.get("accuracy_all")})
    return {"columns": ["Ground MSE", "SS", "AV", "All"], "rows": rows, "meta": meta or {}}


def report_schema() -> dict:
    return json.loads(resources.files("spherevqa").joinpath("report.schema.json").read_text())


def cmd_eval(args) -> dict[str, Path]:
    from .lavit import ModelPredictor, load_model
    from .lavit.experiment import setup
    from .qa_harness import evaluate, prior_baseline, qtype_prior_baseline

    bench = _load_data(args.data)
    ckpt = Path(args.checkpoint)
    if not (ckpt / "manifest.json").exists():
        raise InputError(f"{ckpt}: not a checkpoint directory")
    try:
        model, extra = load_model(ckpt)
    except (KeyError, ValueError) as e:
        raise InputError(f"{ckpt}: {e}") from None
    exp = setup(bench, model.cfg.spatial_mode, "desk", answers=extra["answers"], init=model)
    train_s, test_s = bench.split("train"), bench.split(args.split)
    if not test_s:
        raise InputError(f"{args.data}: split {args.split!r} is empty")
    gt = exp.featurizer.grounding_target
    metrics = {
        "prior": evaluate(prior_baseline(train_s, exp.table), test_s, exp.table, gt),
        "qtype_prior": evaluate(qtype_prior_baseline(train_s, exp.table), test_s, exp.table, gt),
        "model": evaluate(ModelPredictor(model, exp.featurizer), test_s, exp.table, gt),
    }
    report = emit_report(metrics, {"split": args.split, "n": len(test_s),
                                   "spatial_mode": model.cfg.spatial_mode})
    return {"report": write_json(Path(args.out) / "report.json", report)}


def cmd_gradcheck(args) -> dict[str, Path]:
    from .lavit.experiment import end_to_end_gradcheck

    err = end_to_end_gradcheck(args.preset, seed=args.seed, n_params=args.n_params)
    ok = err < args.tol
    args.gradcheck_passed = ok
    path = write_json(Path(args.out) / "gradcheck.json",
                      {"preset": args.preset, "max_rel_err": err, "tol": args.tol,
                       "n_params": args.n_params, "passed": ok})
    return {"gradcheck": path}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spherevqa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="command")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", type=Path, default=Path("out") / name, help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="root seed")
        sp.set_defaults(func=func)
        return sp

    def geo(sp):
        sp.add_argument("--input", type=Path, required=True, help="JSON-lines input")
        sp.add_argument("--degrees", action="store_true", help="input angles are in degrees")

    sp = add("calibrate", cmd_calibrate, "lift NFoV points/boxes onto the sphere")
    geo(sp)
    sp.add_argument("--theta", type=float, default=0.0, help="view azimuth")
    sp.add_argument("--phi", type=float, default=0.0, help="view elevation")

    sp = add("nms", cmd_nms, "spherical non-maximum suppression")
    geo(sp)
    sp.add_argument("--tau", type=float, default=sg.NMS_TAU)
    sp.add_argument("--max-keep", type=int, default=sg.NMS_MAX_KEEP)

    sp = add("relation", cmd_relation, "classify the spatial relation of box pairs")
    geo(sp)

    sp = add("clips", cmd_clips, "peak clip extraction and quality filters")
    sp.add_argument("--wav", type=Path, required=True)
    sp.add_argument("--frames", type=Path, help="directory of PNG frames")
    sp.add_argument("--fps", type=float, default=1.0)
    sp.add_argument("--clip-len", type=float, default=5.0)
    sp.add_argument("--dedup-threshold", type=float, default=1.0)
    sp.add_argument("--skew-threshold", type=float, default=2.0)

    sp = add("skewness", cmd_skewness, "left/right spatial skewness of a stereo WAV")
    sp.add_argument("--wav", type=Path, required=True)
    sp.add_argument("--events", type=Path, help="JSON lines of {start, duration}")

    sp = add("gen", cmd_gen, "generate the synthetic QA benchmark")
    sp.add_argument("--n-scenes", type=int, default=200)
    sp.add_argument("--pairs", type=int, default=2, help="spatial questions per scene")
    sp.add_argument("--counterexamples", type=float, default=0.2)

    for name, func in (("pretrain", cmd_pretrain), ("finetune", cmd_finetune)):
        sp = add(name, func, f"{name} the transformer")
        sp.add_argument("--data", type=Path, required=True, help="directory written by gen")
        sp.add_argument("--preset", choices=("desk", "paper"), default="desk")
        sp.add_argument("--mode", choices=[m.value for m in sg.SpatialMode], default="quaternion")
        sp.add_argument("--init", type=Path, help="checkpoint to start from")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--batch-size", type=int)
        sp.add_argument("--limit", type=int, help="use only the first N training samples")

    sp = add("eval", cmd_eval, "evaluate a checkpoint and the prior baselines")
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.add_argument("--split", choices=("train", "val", "test"), default="test")

    sp = add("gradcheck", cmd_gradcheck, "finite-difference check of the full model loss")
    sp.add_argument("--preset", choices=("desk",), default="desk")
    sp.add_argument("--n-params", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-3)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        outputs = args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    config = _config_of(args)
    write_manifest(args.out, args.command, config, args.seed, outputs)
    for name, p in sorted(outputs.items()):
        print(f"{name}: {p}")
    if getattr(args, "gradcheck_passed", True) is False:
        print("error: gradient check above tolerance", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
