"""Desk-scale reproduction of the single-group training bias on synthetic faces."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace

from .audit import predict_entries, train_group_model
from .bias import confusion
from .config import AuditConfig
from .dataset import GroupSelector, GroupTag, filter_group, load_manifest, split_by_subject
from .synth import SynthSpec, synth_dataset


@dataclass(frozen=True)
class BiasOutcome:
    seed: int
    single_a: float     # accuracy (%) on group A of the model trained on A only
    single_b: float
    both_a: float
    both_b: float

    @property
    def single_gap(self) -> float:
        return self.single_a - self.single_b

    @property
    def both_gap(self) -> float:
        return self.both_a - self.both_b

    @property
    def reproduced(self) -> bool:
        return self.single_gap >= 10.0 and abs(self.both_gap) < abs(self.single_gap)


def synthetic_bias_run(seed: int, cfg: AuditConfig | None = None, spec: SynthSpec | None = None,
                       workdir: str | None = None) -> BiasOutcome:
    """Train on group A (male-styled faces) only and on both groups, test per group.

    ``seed`` drives the data, the split and the training run.
    """
    cfg = cfg or AuditConfig()
    spec = spec or SynthSpec()
    cfg = replace(cfg, split=replace(cfg.split, seed=seed), train=replace(cfg.train, seed=seed))
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        synth_dataset(spec, seed, tmp)
        entries = load_manifest(os.path.join(tmp, "manifest.csv"))
        split = split_by_subject(entries, cfg.split.train_fraction, cfg.split.seed,
                                 cfg.split.stratify)
        test_a = filter_group(split.test, GroupSelector.MALE_ONLY)
        test_b = filter_group(split.test, GroupSelector.FEMALE_ONLY)

        def accuracy(model, test):
            probs, _ = predict_entries(model, test, cfg.net.input_size)
            cm = confusion((int(e.label), int(p)) for e, p in zip(test, probs.argmax(axis=1)))
            return cm.accuracy() * 100.0

        single, _, _ = train_group_model(split.train, GroupSelector.MALE_ONLY, cfg)
        both, _, _ = train_group_model(split.train, GroupSelector.BOTH, cfg)
        return BiasOutcome(seed, accuracy(single, test_a), accuracy(single, test_b),
                           accuracy(both, test_a), accuracy(both, test_b))


GROUP_A = GroupTag.MALE
GROUP_B = GroupTag.FEMALE
