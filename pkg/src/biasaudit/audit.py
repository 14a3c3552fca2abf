"""End-to-end audit: split, train one model per training group, evaluate the
plan cells, explain misclassifications and write every report."""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import imgproc
from .bias import AuditReport, confusion, emit_report, group_gap
from .config import AuditConfig, DEFAULT_PLAN, dump_config, flatten, parse_cell
from .dataset import EmotionLabel, GroupSelector, ManifestEntry, filter_group, load_manifest, split_by_subject
from .errors import AuditError
from .lime import explain, write_explanation
from .nn import CnnModel, init_model, normalize, save_weights, train
from .nn.model import forward

log = logging.getLogger(__name__)

GAP_PAIRS = (("B-F", "B-M"), ("F-F", "F-M"), ("M-F", "M-M"))


@dataclass(frozen=True)
class ExperimentPlan:
    cells: tuple[tuple[GroupSelector, GroupSelector], ...]

    @classmethod
    def from_ids(cls, ids) -> "ExperimentPlan":
        return cls(tuple(parse_cell(i) for i in ids))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(f"{a.value}-{b.value}" for a, b in self.cells)

    @property
    def training_selectors(self) -> tuple[GroupSelector, ...]:
        seen = []
        for a, _ in self.cells:
            if a not in seen:
                seen.append(a)
        return tuple(seen)


def default_plan() -> ExperimentPlan:
    return ExperimentPlan.from_ids(DEFAULT_PLAN)


@dataclass
class AuditResult:
    report: AuditReport
    models: dict[GroupSelector, CnnModel]
    histories: dict[GroupSelector, list[float]]
    predictions: dict[str, list[tuple[ManifestEntry, int, np.ndarray]]] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)


class PurityError(AuditError):
    pass


def dataset_fingerprint(entries) -> str:
    h = hashlib.sha256()
    for e in entries:
        # basenames only, so the same data in another directory hashes the same
        h.update(",".join([os.path.basename(e.path), e.label.display, e.group.value, e.subject_id]).encode())
        with open(e.path, "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()


def build_training_arrays(entries, augment_cfg, size):
    xs, ys = [], []
    for e in entries:
        variants = imgproc.load_training_variants(e, augment_cfg, size)
        xs.extend(variants)
        ys.extend([int(e.label)] * len(variants))
    return normalize(np.stack(xs)), np.array(ys, dtype=np.int64)


def check_purity(entries, selector: GroupSelector) -> None:
    bad = [e for e in entries if not selector.admits(e.group)]
    if bad:
        raise PurityError(f"{len(bad)} entries in the {selector.name} training set violate its group filter")


def train_group_model(train_entries, selector, cfg: AuditConfig):
    entries = filter_group(train_entries, selector)
    check_purity(entries, selector)
    x, y = build_training_arrays(entries, cfg.augment, cfg.net.input_size)
    model = init_model(cfg.net, seed=cfg.train.seed)
    log.info("training %s model on %d images (%d originals)", selector.name, len(y), len(entries))
    model, history = train(model, x, y, cfg.train)
    return model, history, entries


def predict_entries(model: CnnModel, entries, size, batch_size=256):
    if not entries:
        return np.zeros((0, 6)), []
    imgs = np.stack([imgproc.load_entry(e, size) for e in entries])
    probs = np.concatenate([forward(model, normalize(imgs[i:i + batch_size]))
                            for i in range(0, len(imgs), batch_size)])
    return probs, imgs


def run_audit(cfg: AuditConfig) -> AuditResult:
    cfg.validate()
    out = cfg.output_dir
    for sub in ("models", "matrices", "explanations"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    with open(os.path.join(out, "resolved_config"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(cfg))

    entries = load_manifest(cfg.manifest)
    split = split_by_subject(entries, cfg.split.train_fraction, cfg.split.seed,
                             cfg.split.stratify)
    plan = ExperimentPlan.from_ids(cfg.plan)
    size = cfg.net.input_size

    models, histories, train_sets = {}, {}, {}
    for sel in plan.training_selectors:
        model, history, used = train_group_model(split.train, sel, cfg)
        models[sel], histories[sel], train_sets[sel] = model, history, used
        save_weights(model, os.path.join(out, "models", f"{sel.value}.weights"))

    matrices, cells, preds, explanations = {}, {}, {}, {}
    cell_meta = {}
    for (train_sel, test_sel), cell_id in zip(plan.cells, plan.ids):
        test_entries = filter_group(split.test, test_sel)
        train_subjects = {e.subject_id for e in train_sets[train_sel]}
        if train_subjects & {e.subject_id for e in test_entries}:
            raise PurityError(f"cell {cell_id}: test subjects overlap the training set")
        cells[cell_id] = {"train": train_sel.value, "test": test_sel.value}
        cell_meta[cell_id] = {"train_images": len(train_sets[train_sel]), "test_images": len(test_entries)}
        if not test_entries:
            log.warning("cell %s has no test images; skipped", cell_id)
            cell_meta[cell_id]["skipped"] = True
            continue
        probs, imgs = predict_entries(models[train_sel], test_entries, size)
        predicted = probs.argmax(axis=1)
        matrices[cell_id] = confusion(((int(e.label), int(p)) for e, p in zip(test_entries, predicted)),
                                      cell_id, test_sel)
        preds[cell_id] = list(zip(test_entries, predicted.tolist(), probs))
        if cfg.explain_misclassified and cfg.max_explanations_per_cell > 0:
            explanations[cell_id] = _explain_cell(models[train_sel], test_entries, imgs, predicted,
                                                  cfg, os.path.join(out, "explanations", cell_id))

    gaps = [group_gap(matrices[a], matrices[b]) for a, b in GAP_PAIRS if a in matrices and b in matrices]
    metadata = {
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in flatten(cfg, include_paths=False).items()},
        "dataset_fingerprint": dataset_fingerprint(entries),
        "split": {"seed": split.seed, "train_fraction": split.train_fraction,
                  "train_subjects": sorted(split.train_subjects),
                  "test_subjects": sorted(split.test_subjects)},
        "training": {sel.value: {"originals": len(train_sets[sel]), "loss_history": histories[sel]}
                     for sel in plan.training_selectors},
        "cells": cell_meta,
        "explanations": explanations,
        "plan": list(plan.ids),
    }
    report = AuditReport(matrices, gaps, metadata, {k: v for k, v in cells.items() if k in matrices})
    files = emit_report(report, out)
    return AuditResult(report, models, histories, preds, files)


def _explain_cell(model, entries, imgs, predicted, cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    classify = model.classifier()
    root = os.path.dirname(os.path.dirname(out_dir))
    done = []
    for i, (e, p) in enumerate(zip(entries, predicted)):
        if len(done) >= cfg.max_explanations_per_cell:
            break
        if int(p) == int(e.label):
            continue
        stem = os.path.splitext(os.path.basename(e.path))[0]
        record = {"image": os.path.basename(e.path), "true": e.label.display,
                  "predicted": EmotionLabel(int(p)).display, "files": [], "top_features": {}}
        for role, cls in (("pred", int(p)), ("true", int(e.label))):
            expl = explain(classify, imgs[i], cls, cfg.lime)
            name = f"{stem}_{role}-{EmotionLabel(cls).display}"
            ppm, txt = write_explanation(os.path.join(out_dir, name), imgs[i], expl.segmentation, expl)
            record["files"] += [os.path.relpath(f, root) for f in (ppm, txt)]
            record["top_features"][role] = [[sp, w] for sp, w in expl.top_features]
        done.append(record)
    return done

