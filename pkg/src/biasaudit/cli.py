"""Command line entry point.

Exit status: 0 on success, 1 for usage or validation errors, 2 for errors
raised while doing the work.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import imgproc
from .errors import AuditError, ValidationError

log = logging.getLogger("biasaudit")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_cfg(args, need=()):
    from dataclasses import replace

    from .config import AuditConfig, load_config

    cfg = load_config(args.config) if args.config else AuditConfig()
    overrides = {}
    if getattr(args, "manifest", None):
        overrides["manifest"] = os.path.abspath(args.manifest)
    if getattr(args, "output", None):
        overrides["output_dir"] = os.path.abspath(args.output)
    cfg = replace(cfg, **overrides)
    cfg.validate(need_paths=need)
    return cfg


def cmd_synth(args):
    from .synth import SynthSpec, synth_dataset

    cfg = _load_cfg(args, need=("output_dir",))
    s = cfg.synth
    spec = SynthSpec(subjects_per_group=s.subjects_per_group, images_per_emotion=s.images_per_emotion,
                     size=s.size, noise_std=s.noise_std, max_roll_deg=s.max_roll_deg)
    entries = synth_dataset(spec, s.seed, cfg.output_dir)
    print(f"wrote {len(entries)} images and {os.path.join(cfg.output_dir, 'manifest.csv')}")


def cmd_prepare(args):
    from .dataset import ManifestEntry, load_manifest, write_manifest

    cfg = _load_cfg(args, need=("manifest", "output_dir"))
    entries = load_manifest(cfg.manifest)
    img_dir = os.path.join(cfg.output_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    size = cfg.net.input_size
    out_entries = []
    for e in entries:
        if args.no_augment:
            variants = [imgproc.load_entry(e, size)]
        else:
            variants = imgproc.load_training_variants(e, cfg.augment, size)
        stem = os.path.splitext(os.path.basename(e.path))[0]
        for i, v in enumerate(variants):
            name = f"{stem}_v{i:02d}.pgm"
            imgproc.write_pgm(os.path.join(img_dir, name), v)
            out_entries.append(ManifestEntry(os.path.join("images", name), e.label, e.group, e.subject_id))
    write_manifest(out_entries, os.path.join(cfg.output_dir, "manifest.csv"))
    per = "1 variant" if args.no_augment else f"{cfg.augment.variant_count} variants"
    print(f"prepared {len(out_entries)} output images from {len(entries)} inputs ({per} each)")


def cmd_train(args):
    from .audit import train_group_model
    from .dataset import GroupSelector, load_manifest, split_by_subject
    from .nn import save_weights

    cfg = _load_cfg(args, need=("manifest", "output_dir"))
    try:
        selector = GroupSelector.parse(args.group)
    except ValueError as exc:
        raise UsageError(f"--group: {exc}") from None
    entries = load_manifest(cfg.manifest)
    split = split_by_subject(entries, cfg.split.train_fraction, cfg.split.seed,
                             cfg.split.stratify)
    model, history, used = train_group_model(split.train, selector, cfg)
    os.makedirs(os.path.join(cfg.output_dir, "models"), exist_ok=True)
    path = args.weights or os.path.join(cfg.output_dir, "models", f"{selector.value}.weights")
    save_weights(model, path)
    print(f"trained {selector.name} on {len(used)} images; final loss {history[-1]:.4f}; saved {path}")


def cmd_evaluate(args):
    from .audit import predict_entries
    from .bias import confusion, confusion_csv
    from .dataset import load_manifest, split_by_subject
    from .nn import load_weights

    cfg = _load_cfg(args, need=("manifest",))
    model = load_weights(args.weights, cfg.net)
    entries = load_manifest(cfg.manifest)
    if args.split_test:
        entries = list(split_by_subject(entries, cfg.split.train_fraction, cfg.split.seed,
                                        cfg.split.stratify).test)
    probs, _ = predict_entries(model, entries, cfg.net.input_size)
    cm = confusion(((int(e.label), int(p)) for e, p in zip(entries, probs.argmax(axis=1))), args.id)
    out = args.out or f"{args.id}_confusion.csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(confusion_csv(cm))
    print(f"accuracy {cm.accuracy() * 100:.2f}% over {cm.total} images; wrote {out}")


def cmd_explain(args):
    from .dataset import EmotionLabel
    from .errors import ShapeMismatch
    from .lime import explain, write_explanation
    from .nn import load_weights, predict

    cfg = _load_cfg(args)
    model = load_weights(args.weights, cfg.net)
    img = imgproc.read_image(args.image)
    if img.ndim == 3:
        img = imgproc.to_gray(img)
    s = cfg.net.input_size
    if img.shape != (s, s):
        raise ShapeMismatch(f"image is {img.shape[1]}x{img.shape[0]}, model expects {s}x{s}")
    label, _ = predict(model, img)
    try:
        target = EmotionLabel.parse(args.target) if args.target else label
    except ValueError as exc:
        raise UsageError(f"--target: {exc}") from None
    expl = explain(model.classifier(), img, target, cfg.lime)
    stem = args.out or os.path.splitext(args.image)[0] + f"_{target.display}"
    ppm, txt = write_explanation(stem, img, expl.segmentation, expl)
    print(f"predicted {label.display}; explained {target.display}; fidelity {expl.fidelity:.3f}; wrote {ppm}, {txt}")


def cmd_audit(args):
    from .audit import run_audit

    cfg = _load_cfg(args, need=("manifest", "output_dir"))
    result = run_audit(cfg)
    for key, cm in result.report.matrices.items():
        print(f"{key}: accuracy {cm.accuracy() * 100:6.2f}% ({cm.total} images)")
    for gap in result.report.gaps:
        print(f"gap {gap.experiment_a} - {gap.experiment_b}: {gap.overall:+.2f} points")
    print(f"summary: {os.path.join(cfg.output_dir, 'audit_summary.json')}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="biasaudit", description="Group-fairness audit of a facial-expression CNN.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="config file (section.key = value)")
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic two-group dataset and manifest")
    sp.add_argument("--output", help="dataset directory (overrides audit.output_dir)")

    sp = add("prepare", cmd_prepare, "preprocess and augment a manifest into a directory")
    sp.add_argument("--manifest")
    sp.add_argument("--output")
    sp.add_argument("--no-augment", action="store_true", help="test-time preprocessing only")

    sp = add("train", cmd_train, "train one model on the training split of one group")
    sp.add_argument("--manifest")
    sp.add_argument("--output")
    sp.add_argument("--group", default="B", help="B, F or M")
    sp.add_argument("--weights", help="output weight file")

    sp = add("evaluate", cmd_evaluate, "confusion matrix of a model on a test manifest")
    sp.add_argument("--manifest")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--id", default="eval")
    sp.add_argument("--out")
    sp.add_argument("--split-test", action="store_true", help="use only the test side of the configured split")

    sp = add("explain", cmd_explain, "LIME overlay and sidecar for one image")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--target", help="emotion to explain (default: predicted)")
    sp.add_argument("--out", help="output path stem")

    sp = add("audit", cmd_audit, "full audit over the experiment plan")
    sp.add_argument("--manifest")
    sp.add_argument("--output")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:   # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (AuditError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
