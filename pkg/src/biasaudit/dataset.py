"""Labeled, group-tagged image manifests and subject-disjoint splits."""

from __future__ import annotations

import enum
import math
import os
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (EmptyResult, MalformedLine, MissingFile, TooFewSubjects,
                     UnknownGroup, UnknownLabel)


class EmotionLabel(enum.IntEnum):
    ANGRY = 0
    DISGUST = 1
    FEAR = 2
    HAPPY = 3
    SAD = 4
    SURPRISE = 5

    @property
    def display(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "EmotionLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown emotion label {text!r}") from None


LABELS = tuple(EmotionLabel)
NUM_CLASSES = len(LABELS)


class GroupTag(enum.Enum):
    FEMALE = "female"
    MALE = "male"

    @classmethod
    def parse(cls, text: str) -> "GroupTag":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown group {text!r}") from None


class GroupSelector(enum.Enum):
    BOTH = "B"
    FEMALE_ONLY = "F"
    MALE_ONLY = "M"

    def admits(self, group: GroupTag) -> bool:
        if self is GroupSelector.BOTH:
            return True
        if self is GroupSelector.FEMALE_ONLY:
            return group is GroupTag.FEMALE
        return group is GroupTag.MALE

    @classmethod
    def parse(cls, text: str) -> "GroupSelector":
        key = text.strip().lower().replace("_", "").replace("-", "")
        table = {"b": cls.BOTH, "both": cls.BOTH,
                 "f": cls.FEMALE_ONLY, "female": cls.FEMALE_ONLY, "femaleonly": cls.FEMALE_ONLY,
                 "m": cls.MALE_ONLY, "male": cls.MALE_ONLY, "maleonly": cls.MALE_ONLY}
        if key not in table:
            raise ValueError(f"unknown group selector {text!r}")
        return table[key]


Point = tuple[float, float]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: EmotionLabel
    group: GroupTag
    subject_id: str
    eye_landmarks: Optional[tuple[Point, Point]] = None

    def __post_init__(self):
        if not self.path:
            raise ValueError("empty path")
        if not self.subject_id:
            raise ValueError("empty subject_id")
        if self.eye_landmarks is not None:
            (lx, _), (rx, _) = self.eye_landmarks
            if not lx < rx:
                raise ValueError("left eye must lie left of right eye")

    def to_line(self) -> str:
        fields = [self.path, self.label.display, self.group.value, self.subject_id]
        if self.eye_landmarks is not None:
            (lx, ly), (rx, ry) = self.eye_landmarks
            fields += [repr(float(v)) for v in (lx, ly, rx, ry)]
        return ",".join(fields)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[ManifestEntry, ...]
    test: tuple[ManifestEntry, ...]
    seed: int
    train_fraction: float

    @property
    def train_subjects(self) -> frozenset[str]:
        return frozenset(e.subject_id for e in self.train)

    @property
    def test_subjects(self) -> frozenset[str]:
        return frozenset(e.subject_id for e in self.test)


def parse_manifest_line(line: str, line_no: int) -> ManifestEntry:
    fields = [f.strip() for f in line.split(",")]
    if len(fields) not in (4, 8):
        raise MalformedLine(line_no, f"expected 4 or 8 fields, got {len(fields)}")
    path, label, group, subject = fields[:4]
    try:
        label = EmotionLabel.parse(label)
    except ValueError as exc:
        raise UnknownLabel(line_no, str(exc)) from None
    try:
        group = GroupTag.parse(group)
    except ValueError as exc:
        raise UnknownGroup(line_no, str(exc)) from None
    eyes = None
    if len(fields) == 8:
        try:
            lx, ly, rx, ry = (float(v) for v in fields[4:])
        except ValueError:
            raise MalformedLine(line_no, "landmarks must be numbers") from None
        eyes = ((lx, ly), (rx, ry))
    try:
        return ManifestEntry(path, label, group, subject, eyes)
    except ValueError as exc:
        raise MalformedLine(line_no, str(exc)) from None


def load_manifest(path, resolve: bool = True) -> list[ManifestEntry]:
    """Read a ``path,label,group,subject_id[,lx,ly,rx,ry]`` manifest.

    With ``resolve`` set, relative image paths are made relative to the
    manifest's own directory so the manifest can be loaded from anywhere.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"manifest not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            entry = parse_manifest_line(line, line_no)
            if resolve and not os.path.isabs(entry.path):
                entry = ManifestEntry(os.path.join(base, entry.path), entry.label,
                                      entry.group, entry.subject_id, entry.eye_landmarks)
            entries.append(entry)
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path, header: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# path,label,group,subject_id[,lx,ly,rx,ry]\n")
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for e in entries:
            fh.write(e.to_line() + "\n")


def round_half_up(x: float) -> int:
    # 1e-9 guards against 0.8*n landing just below an exact .5
    return int(math.floor(x + 0.5 + 1e-9))


def split_by_subject(entries: Sequence[ManifestEntry], train_fraction: float = 0.8,
                     seed: int = 0, stratify: bool = False) -> DatasetSplit:
    """Partition entries so that no subject appears on both sides.

    Subjects are sorted, shuffled with ``seed`` and the first
    ``round(train_fraction * n_subjects)`` go to train. The count is clamped
    to ``[1, n_subjects - 1]`` so neither side is empty.

    With ``stratify`` the same rule is applied inside each group (in group
    order, drawing from one generator), so both groups reach the test side.
    A group with a single subject then goes to train whole.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    subjects = sorted({e.subject_id for e in entries})
    if len(subjects) < 2:
        raise TooFewSubjects(f"need at least 2 subjects, got {len(subjects)}")
    rng = np.random.default_rng(seed)
    if stratify:
        pools = [sorted({e.subject_id for e in entries if e.group is g}) for g in GroupTag]
    else:
        pools = [subjects]
    train_subjects = set()
    for pool in pools:
        if len(pool) < 2:
            train_subjects.update(pool)
            continue
        order = rng.permutation(len(pool))
        n_train = min(max(round_half_up(train_fraction * len(pool)), 1), len(pool) - 1)
        train_subjects.update(pool[i] for i in order[:n_train])
    train = tuple(e for e in entries if e.subject_id in train_subjects)
    test = tuple(e for e in entries if e.subject_id not in train_subjects)
    if not test:
        raise TooFewSubjects("every group has a single subject; the test side would be empty")
    return DatasetSplit(train, test, seed, train_fraction)


def filter_group(entries: Sequence[ManifestEntry], selector: GroupSelector) -> list[ManifestEntry]:
    """Order-preserving subset admitted by ``selector``.

    Emits an :class:`EmptyResult` warning when some emotion ends up with no
    samples at all.
    """
    kept = [e for e in entries if selector.admits(e.group)]
    missing = set(LABELS) - {e.label for e in kept}
    if missing:
        names = ", ".join(m.display for m in sorted(missing))
        warnings.warn(f"selector {selector.name}: no samples for {names}", EmptyResult, stacklevel=2)
    return kept


def class_counts(entries: Sequence[ManifestEntry]) -> list[int]:
    counts = [0] * NUM_CLASSES
    for e in entries:
        counts[e.label] += 1
    return counts
