"""Command-line entry point.

Subcommands cover the whole pipeline: structure analysis, catalog
export, dataset generation, training, evaluation, and the three
visualization outputs.  Everything is driven by flags (no environment
variables), every stochastic command takes --seed, and identical argv
produces identical output bytes.

Exit codes: 0 success, 1 domain error (bad structure file, label
mismatch, unreadable checkpoint, ...), 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import sys
from pathlib import Path

import numpy as np

from .catalog import builtin_catalog
from .dataset import Split, build_dataset, load_manifest
from .interpret import (ASCENT_STEPS, ASCENT_STEP_SIZE,
                        class_activation_heatmap, intermediate_activations,
                        maximize_filter)
from .nn import load_checkpoint
from .nn.model import BCE_EPSILON, build_table1_model
from .oracle import Classification, binary_label, classify_stability
from .png_io import read_png, write_png
from .structures import parse_structure, serialize_structure
from .trainer import (METRICS_HEADER, TrainConfig, TrainerError, evaluate,
                      resume, save_predictions, train)

_DOMAIN_ERRORS = (ValueError, TrainerError, OSError)

_CLASS_WORDS = {
    Classification.STABLE: "stable",
    Classification.UNSTABLE: "unstable",
    Classification.INSTANTANEOUSLY_UNSTABLE: "instantaneously unstable",
}


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _index_list(text: str) -> tuple[int, ...]:
    """Comma-separated grid indices, e.g. '0,4,8'."""
    try:
        out = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated "
                                         "integer list")
    if not out or len(set(out)) != len(out) or any(not 0 <= i <= 8 for i in out):
        raise argparse.ArgumentTypeError(
            f"{text!r}: indices must be distinct and in 0..8")
    return out


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _cmd_analyze(args) -> int:
    s = parse_structure(Path(args.structure).read_text(encoding="utf-8"))
    v = classify_stability(s, seed=args.seed)
    if args.as_json:
        print(json.dumps({
            "name": v.name,
            "classification": v.classification.value,
            "binary_label": binary_label(v),
            "connected": v.connected,
            "body_count": v.body_count,
            "pin_pair_count": v.pin_pair_count,
            "nullity_given": v.nullity_given,
            "nullity_generic": v.nullity_generic,
            "mechanism_dof": v.mechanism_dof,
        }, indent=2))
        return 0
    print(_CLASS_WORDS[v.classification])
    print(f"  structure          {v.name}")
    print(f"  binary label       {binary_label(v)}")
    print(f"  connected          {'yes' if v.connected else 'no'}")
    print(f"  rigid bodies       {v.body_count}")
    print(f"  pin constraints    {v.pin_pair_count}")
    print(f"  nullity (given)    {v.nullity_given}")
    print(f"  nullity (generic)  {v.nullity_generic}")
    print(f"  mechanism dof      {v.mechanism_dof}")
    return 0


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _cmd_catalog(args) -> int:
    cat = builtin_catalog()
    out = Path(args.out)
    for group, structures in (("training", cat.training_examples),
                              ("holdout", cat.holdout_examples)):
        (out / group).mkdir(parents=True, exist_ok=True)
        for s in structures:
            (out / group / f"{s.name}.json").write_text(
                serialize_structure(s), encoding="utf-8")
            label = cat.intended_labels[s.name]
            print(f"{group}/{s.name}.json  label={label}")
    print(f"wrote {len(cat.training_examples)} training + "
          f"{len(cat.holdout_examples)} holdout structures under {out}")
    return 0


# ---------------------------------------------------------------------------
# gen-dataset
# ---------------------------------------------------------------------------

def _cmd_gen_dataset(args) -> int:
    cat = builtin_catalog()
    if args.structures:
        structures = []
        for name in args.structures.split(","):
            try:
                structures.append(cat.by_name(name.strip()))
            except KeyError:
                raise ValueError(f"unknown structure name {name.strip()!r}")
    else:
        structures = list(cat.holdout_examples if args.holdout
                          else cat.training_examples)
    manifest = build_dataset(
        structures, cat.intended_labels, args.out, seed=args.seed,
        holdout=args.holdout, split_by_structure=args.split_by_structure,
        scale_indices=args.scales, rot_indices=args.rotations,
        trans_indices=args.translations, jobs=args.jobs)
    counts = manifest.split_counts()
    per_split = " ".join(f"{name}={counts[name]}"
                         for name in ("Train", "Val", "Test", "Holdout")
                         if name in counts)
    print(f"{len(manifest.samples)} images from {len(structures)} structures "
          f"({per_split})")
    print(f"manifest: {Path(args.out) / 'manifest.csv'}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _cmd_train(args) -> int:
    manifest = load_manifest(Path(args.data) / "manifest.csv")
    out = Path(args.out)
    cfg = TrainConfig(epochs=args.epochs, checkpoint_dir=out / "checkpoints",
                      metrics_path=out / "metrics.csv",
                      batch_size=args.batch_size, seed=args.seed, lr=args.lr)
    print(METRICS_HEADER)
    log = lambda rec: print(rec.to_line(), flush=True)
    if args.resume:
        model, records, exact = resume(args.resume, manifest, cfg, log=log)
        if not exact:
            print("note: no optimizer sidecar next to the checkpoint; "
                  "Adam moments restarted", file=sys.stderr)
    else:
        model = build_table1_model(seed=args.seed)
        model, records = train(model, manifest, cfg, log=log)
    last = records[-1] if records else None
    if last is not None:
        print(f"done: epoch {last.epoch} val_acc={last.val_acc:.8f} "
              f"checkpoints in {cfg.checkpoint_dir}")
    else:
        print("nothing to do: checkpoint already at the requested epoch")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _eval_chunk(task):
    model, manifest, split_value, batch_size = task
    _, _, records = evaluate(model, manifest, Split(split_value),
                             batch_size=batch_size)
    return records


def _eval_records(model, manifest, split: Split, batch_size: int, jobs: int):
    chosen = manifest.of_split(split)
    if not chosen:
        raise TrainerError(f"empty split {split.value}")
    jobs = min(jobs, len(chosen))
    if jobs <= 1:
        _, _, records = evaluate(model, manifest, split,
                                 batch_size=batch_size)
        return records
    bounds = np.linspace(0, len(chosen), jobs + 1).astype(int)
    tasks = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi > lo:
            sub = dataclasses.replace(manifest, samples=chosen[lo:hi])
            tasks.append((model, sub, split.value, batch_size))
    with multiprocessing.get_context("fork").Pool(len(tasks)) as pool:
        chunks = pool.map(_eval_chunk, tasks)
    return [rec for chunk in chunks for rec in chunk]


def _cmd_eval(args) -> int:
    manifest = load_manifest(Path(args.data) / "manifest.csv")
    model, _ = load_checkpoint(args.ckpt)
    split = Split(args.split)
    records = _eval_records(model, manifest, split, args.batch_size,
                            args.jobs)
    # one fixed aggregation order so the printed numbers cannot depend on
    # how the work was chunked across jobs
    p = np.array([r.probability for r in records], dtype=np.float64)
    y = np.array([r.label for r in records], dtype=np.float64)
    terms = (y * np.log(1.0 / (p + BCE_EPSILON))
             + (1.0 - y) * np.log(1.0 / (1.0 - p + BCE_EPSILON)))
    loss = float(terms.sum() / len(records))
    acc = float(np.mean([r.predicted == r.label for r in records]))
    print(f"split={split.value} n={len(records)} "
          f"loss={loss:.8f} acc={acc:.8f}")
    if args.out:
        save_predictions(records, args.out)
        print(f"predictions: {args.out}")
    return 0


# ---------------------------------------------------------------------------
# visualization commands
# ---------------------------------------------------------------------------

def _cmd_viz_activations(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    image = read_png(args.image)
    sheet = intermediate_activations(model, image, args.layer)
    write_png(args.out, sheet.sheet)
    h, w = sheet.sheet.shape
    print(f"layer {args.layer}: {len(sheet.channels)} channels, "
          f"sheet {h}x{w} -> {args.out}")
    return 0


def _cmd_viz_filter(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    if args.all:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        indices = range(model.convs[args.layer].filters)
    elif args.filter is None:
        raise TrainerError("pass --filter N or --all")
    else:
        indices = [args.filter]
    for idx in indices:
        pattern = maximize_filter(model, args.layer, idx, steps=args.steps,
                                  step_size=args.step_size, seed=args.seed)
        target = (Path(args.out) / f"layer{args.layer}_filter{idx}.png"
                  if args.all else Path(args.out))
        write_png(target, pattern.image)
        note = " (dead filter: zero kernel, left at initialization)" \
            if pattern.dead else ""
        print(f"layer {args.layer} filter {idx}: response "
              f"{pattern.initial_score:+.6f} -> {pattern.score:+.6f}"
              f"{note} -> {target}")
    return 0


def _cmd_viz_cam(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    image = read_png(args.image)
    heat = class_activation_heatmap(model, image, pre_pool=not args.post_pool)
    write_png(args.out, heat.overlay)
    g = heat.grid.shape[0]
    print(f"predicted class {heat.predicted_class} "
          f"(p={heat.probability:.6f}, logit={heat.logit:+.6f}), "
          f"grid {g}x{g} -> {args.out}")
    if args.heat_out:
        gray = np.rint(heat.upsampled * 255.0).astype(np.uint8)
        write_png(args.heat_out, gray)
        print(f"heatmap: {args.heat_out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinebench",
        description="Stability analysis of plane bar structures, dataset "
                    "generation, CNN training, and visual explanations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify one structure JSON file")
    p.add_argument("structure", help="structure JSON file")
    p.add_argument("--json", dest="as_json", action="store_true",
                   help="machine-readable report (default: text)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the generic-position probe (default 0)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("catalog",
                       help="write the built-in structures as JSON files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_catalog)

    p = sub.add_parser("gen-dataset", help="render the image dataset")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--holdout", action="store_true",
                   help="use the holdout structures, single Holdout split")
    p.add_argument("--seed", type=int, default=0,
                   help="split-assignment seed (default 0)")
    p.add_argument("--split-by-structure", action="store_true",
                   help="assign whole structures to splits instead of images")
    p.add_argument("--structures", default="",
                   help="comma-separated catalog names (default: all "
                        "training, or all holdout with --holdout)")
    p.add_argument("--scales", type=_index_list, default=None,
                   metavar="I,J,...", help="scale grid indices (default all 9)")
    p.add_argument("--rotations", type=_index_list, default=None,
                   metavar="I,J,...",
                   help="rotation grid indices (default all 9)")
    p.add_argument("--translations", type=_index_list, default=None,
                   metavar="I,J,...",
                   help="translation grid indices (default all 9)")
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="parallel render processes (output bytes identical "
                        "for any value; default 1)")
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("train", help="train the classifier on a dataset")
    p.add_argument("--data", required=True,
                   help="dataset directory (holds manifest.csv)")
    p.add_argument("--out", required=True,
                   help="run directory (checkpoints/ and metrics.csv)")
    p.add_argument("--epochs", type=_positive_int, required=True,
                   help="total epochs to reach (>= 1)")
    p.add_argument("--batch-size", type=_positive_int, default=32,
                   help="minibatch size (default 32)")
    p.add_argument("--seed", type=int, default=0,
                   help="weights/shuffle/dropout seed (default 0)")
    p.add_argument("--lr", type=float, default=1e-3,
                   help="Adam learning rate (default 1e-3)")
    p.add_argument("--resume", default="",
                   help="checkpoint file to continue from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--split", default="Val",
                   choices=[s.value for s in Split],
                   help="split to evaluate (default Val)")
    p.add_argument("--batch-size", type=_positive_int, default=32,
                   help="minibatch size (default 32)")
    p.add_argument("--out", default="",
                   help="write per-image predictions CSV here")
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="parallel evaluation processes (same output bytes "
                        "for any value; default 1)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("viz-activations",
                       help="stitch one conv layer's activation maps")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--image", required=True, help="input PNG")
    p.add_argument("--layer", type=int, default=0,
                   help="conv layer index 0..5 (default 0)")
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=_cmd_viz_activations)

    p = sub.add_parser("viz-filter",
                       help="synthesize the pattern a filter responds to")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--layer", type=int, default=0,
                   help="conv layer index 0..5 (default 0)")
    p.add_argument("--filter", type=int, default=None,
                   help="filter index within the layer")
    p.add_argument("--all", action="store_true",
                   help="write every filter of the layer into --out dir")
    p.add_argument("--steps", type=_positive_int, default=ASCENT_STEPS,
                   help=f"ascent iterations (default {ASCENT_STEPS})")
    p.add_argument("--step-size", type=float, default=ASCENT_STEP_SIZE,
                   help="ascent step size (default 10/255)")
    p.add_argument("--seed", type=int, default=0,
                   help="init-noise seed (default 0)")
    p.add_argument("--out", required=True,
                   help="output PNG (or directory with --all)")
    p.set_defaults(func=_cmd_viz_filter)

    p = sub.add_parser("viz-cam",
                       help="class-activation heatmap overlay for one image")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--image", required=True, help="input PNG")
    p.add_argument("--out", required=True, help="overlay PNG")
    p.add_argument("--heat-out", default="",
                   help="also write the bare heatmap as grayscale PNG")
    p.add_argument("--post-pool", action="store_true",
                   help="take features after the last pooling (4x4 grid) "
                        "instead of before it (8x8)")
    p.set_defaults(func=_cmd_viz_cam)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
