"""Per-group confusion matrices, misclassification tables and group gaps."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .dataset import LABELS, NUM_CLASSES, EmotionLabel, GroupSelector
from .errors import EmptyInput

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray          # (6, 6) int64, rows = true, cols = predicted
    experiment_id: str = ""
    group_scope: Optional[GroupSelector] = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (NUM_CLASSES, NUM_CLASSES) or (counts < 0).any():
            raise ValueError(f"counts must be a non-negative 6x6 matrix, got {counts.shape}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def accuracy(self) -> float:
        if self.total == 0:
            raise EmptyInput("accuracy of an empty matrix")
        return self.correct / self.total

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)
                and self.experiment_id == other.experiment_id and self.group_scope == other.group_scope)

    __hash__ = None


def confusion(pairs: Iterable[tuple], experiment_id: str = "",
              group_scope: Optional[GroupSelector] = None) -> ConfusionMatrix:
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    n = 0
    for true, pred in pairs:
        counts[int(true), int(pred)] += 1
        n += 1
    if n == 0:
        raise EmptyInput("no prediction pairs")
    return ConfusionMatrix(counts, experiment_id, group_scope)


@dataclass(frozen=True)
class RowPercentages:
    exact: tuple[tuple[Fraction, ...], ...]
    empty_rows: tuple[bool, ...]

    @property
    def rounded(self) -> np.ndarray:
        """Percentages rounded half-up to two decimals."""
        return np.array([[_round2(v) for v in row] for row in self.exact])

    @property
    def raw(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.exact])


def _round2(v: Fraction) -> float:
    hundredths = (v * 100 + Fraction(1, 2)).__floor__()
    return hundredths / 100


def format_pct(v: Fraction) -> str:
    hundredths = int((v * 100 + Fraction(1, 2)).__floor__())
    return f"{hundredths // 100}.{hundredths % 100:02d}"


def row_normalize(cm: ConfusionMatrix) -> RowPercentages:
    rows, empty = [], []
    for r in range(NUM_CLASSES):
        n = int(cm.counts[r].sum())
        empty.append(n == 0)
        if n == 0:
            rows.append(tuple(Fraction(0) for _ in range(NUM_CLASSES)))
        else:
            rows.append(tuple(Fraction(100 * int(c), n) for c in cm.counts[r]))
    return RowPercentages(tuple(rows), tuple(empty))


def misclassification_table(cm) -> dict[EmotionLabel, tuple[EmotionLabel, ...]]:
    """For each true class, the classes it was mistaken for (canonical order).

    Accepts a :class:`ConfusionMatrix` or any non-negative 6x6 array, such
    as a row-normalised one; only which cells are non-zero matters.
    """
    counts = cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm)
    if counts.shape != (NUM_CLASSES, NUM_CLASSES) or (counts < 0).any():
        raise ValueError(f"need a non-negative 6x6 matrix, got shape {counts.shape}")
    return {t: tuple(p for p in LABELS if p != t and counts[t, p] > 0) for t in LABELS}


@dataclass(frozen=True)
class FlaggedCell:
    true: EmotionLabel
    predicted: EmotionLabel
    pct_a: float
    pct_b: float

    @property
    def gap(self) -> float:
        return self.pct_a - self.pct_b


@dataclass(frozen=True)
class GapReport:
    experiment_a: str
    experiment_b: str
    per_class: tuple[Optional[float], ...]     # None where either row is empty
    overall: float
    undefined_classes: tuple[EmotionLabel, ...]
    off_diagonal: tuple[tuple[Optional[float], ...], ...]
    flagged_cells: tuple[FlaggedCell, ...] = field(default=())

    def gap(self, label: EmotionLabel) -> Optional[float]:
        return self.per_class[label]


def group_gap(cm_a: ConfusionMatrix, cm_b: ConfusionMatrix, flag_threshold: float = 20.0) -> GapReport:
    """Recognition-rate differences a - b, in percentage points.

    Off-diagonal cells whose row-percentage difference reaches
    ``flag_threshold`` points are listed in ``flagged_cells``.
    """
    if cm_a.total == 0 or cm_b.total == 0:
        raise EmptyInput("gap between empty matrices")
    pa, pb = row_normalize(cm_a), row_normalize(cm_b)
    ra, rb = pa.raw, pb.raw
    undefined = tuple(l for l in LABELS if pa.empty_rows[l] or pb.empty_rows[l])
    per_class = tuple(None if l in undefined else float(ra[l, l] - rb[l, l]) for l in LABELS)
    overall = float(cm_a.correct / cm_a.total * 100 - cm_b.correct / cm_b.total * 100)
    off = []
    flagged = []
    for t in LABELS:
        row = []
        for p in LABELS:
            if t in undefined:
                row.append(None)
                continue
            diff = float(ra[t, p] - rb[t, p])
            row.append(diff)
            if t != p and abs(diff) >= flag_threshold:
                flagged.append(FlaggedCell(t, p, float(ra[t, p]), float(rb[t, p])))
        off.append(tuple(row))
    return GapReport(cm_a.experiment_id, cm_b.experiment_id, per_class, overall, undefined,
                     tuple(off), tuple(flagged))


# -- reports ---------------------------------------------------------------

def confusion_csv(cm: ConfusionMatrix) -> str:
    """Counts block, blank line, two-decimal percentage block."""
    pct = row_normalize(cm)
    names = [l.display for l in LABELS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["counts"] + names + ["total"])
    for t in LABELS:
        w.writerow([t.display] + [int(c) for c in cm.counts[t]] + [int(cm.counts[t].sum())])
    w.writerow([])
    w.writerow(["percent"] + names + ["empty_row"])
    for t in LABELS:
        w.writerow([t.display] + [format_pct(v) for v in pct.exact[t]] + [int(pct.empty_rows[t])])
    return buf.getvalue()


def read_confusion_csv(text: str, experiment_id: str = "") -> ConfusionMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    counts = [[int(v) for v in row[1:1 + NUM_CLASSES]] for row in rows[1:1 + NUM_CLASSES]]
    return ConfusionMatrix(np.array(counts), experiment_id)


@dataclass
class AuditReport:
    matrices: dict[str, ConfusionMatrix]
    gaps: list[GapReport]
    metadata: dict = field(default_factory=dict)
    cells: dict[str, dict] = field(default_factory=dict)   # id -> {"train": "B", "test": "F"}

    def tables(self) -> dict[str, dict]:
        return {k: misclassification_table(cm) for k, cm in self.matrices.items()}

    def to_json_obj(self) -> dict:
        experiments = {}
        for key, cm in self.matrices.items():
            pct = row_normalize(cm)
            experiments[key] = {
                "cell": self.cells.get(key, {}),
                "test_scope": cm.group_scope.name if cm.group_scope else None,
                "counts": cm.counts.tolist(),
                "total": cm.total,
                "accuracy": cm.correct / cm.total if cm.total else None,
                "percent": pct.rounded.tolist(),
                "raw_percent": pct.raw.tolist(),
                "empty_rows": [LABELS[i].display for i, e in enumerate(pct.empty_rows) if e],
                "misclassified": {t.display: [p.display for p in ps]
                                  for t, ps in misclassification_table(cm).items()},
            }
        gaps = []
        for g in self.gaps:
            gaps.append({
                "a": g.experiment_a,
                "b": g.experiment_b,
                "overall": g.overall,
                "per_class": {l.display: g.per_class[l] for l in LABELS},
                "undefined": [l.display for l in g.undefined_classes],
                "off_diagonal": [list(r) for r in g.off_diagonal],
                "flagged_cells": [{"true": c.true.display, "predicted": c.predicted.display,
                                   "pct_a": c.pct_a, "pct_b": c.pct_b} for c in g.flagged_cells],
            })
        return {"schema_version": SCHEMA_VERSION, "labels": [l.display for l in LABELS],
                "metadata": self.metadata, "experiments": experiments, "gaps": gaps}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AuditReport":
        obj = json.loads(text)
        matrices, cells = {}, {}
        for key, e in obj["experiments"].items():
            scope = GroupSelector[e["test_scope"]] if e["test_scope"] else None
            matrices[key] = ConfusionMatrix(np.array(e["counts"]), key, scope)
            cells[key] = e["cell"]
        gaps = []
        for g in obj["gaps"]:
            per_class = tuple(g["per_class"][l.display] for l in LABELS)
            undefined = tuple(EmotionLabel.parse(n) for n in g["undefined"])
            flagged = tuple(FlaggedCell(EmotionLabel.parse(c["true"]), EmotionLabel.parse(c["predicted"]),
                                        c["pct_a"], c["pct_b"]) for c in g["flagged_cells"])
            gaps.append(GapReport(g["a"], g["b"], per_class, g["overall"], undefined,
                                  tuple(tuple(r) for r in g["off_diagonal"]), flagged))
        return cls(matrices, gaps, obj["metadata"], cells)

    def __eq__(self, other):
        return (isinstance(other, AuditReport) and self.matrices == other.matrices
                and self.gaps == other.gaps and self.metadata == other.metadata
                and self.cells == other.cells)


def emit_report(report: AuditReport, out_dir, matrices_subdir: str = "matrices") -> list[str]:
    """Write ``<id>_confusion.csv`` per matrix and ``audit_summary.json``."""
    mdir = os.path.join(out_dir, matrices_subdir)
    os.makedirs(mdir, exist_ok=True)
    written = []
    for key, cm in report.matrices.items():
        path = os.path.join(mdir, f"{key}_confusion.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(confusion_csv(cm))
        written.append(path)
    path = os.path.join(out_dir, "audit_summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
    written.append(path)
    return written


def load_report(path) -> AuditReport:
    with open(path, encoding="utf-8") as fh:
        return AuditReport.from_json(fh.read())


def counts_from_percentages(rows: Sequence[Sequence[float]], max_n: int = 200) -> np.ndarray:
    """Smallest integer counts per row that reproduce two-decimal row percentages.

    Used to turn the published percentage matrices back into count matrices.
    """
    out = []
    for row in rows:
        for n in range(1, max_n + 1):
            c = [round(v * n / 100) for v in row]
            if sum(c) == n and all(_round2(Fraction(100 * ci, n)) == round(v, 2) for ci, v in zip(c, row)):
                out.append(c)
                break
        else:
            raise ValueError(f"no denominator <= {max_n} reproduces row {row}")
    return np.array(out, dtype=np.int64)
