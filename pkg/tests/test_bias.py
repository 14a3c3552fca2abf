import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from biasaudit.bias import (AuditReport, ConfusionMatrix, confusion, confusion_csv,
                            counts_from_percentages, emit_report, format_pct, group_gap,
                            load_report, misclassification_table, read_confusion_csv,
                            row_normalize)
from biasaudit.dataset import LABELS, EmotionLabel, GroupSelector
from biasaudit.errors import EmptyInput
from biasaudit.reference import (REFERENCE_MISCLASSIFIED, REFERENCE_PERCENTAGES,
                                 reference_matrix, unit_row_matrix)

A, D, F, H, S, U = LABELS
count_matrices = arrays(np.int64, (6, 6), elements=st.integers(0, 30))
pairs = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=200)


def names(labels):
    return {l.display for l in labels}


# -- confusion -------------------------------------------------------------

def test_confusion_tally():
    cm = confusion([(0, 0), (0, 4), (0, 0), (5, 5)], "x", GroupSelector.FEMALE_ONLY)
    assert cm.counts[0].tolist() == [2, 0, 0, 0, 1, 0]
    assert cm.total == 4 and cm.correct == 3
    assert cm.accuracy() == 0.75
    assert cm.group_scope is GroupSelector.FEMALE_ONLY


@given(pairs, st.randoms())
def test_confusion_order_invariant_and_total(ps, rnd):
    cm = confusion(ps)
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    assert np.array_equal(cm.counts, confusion(shuffled).counts)
    assert cm.total == len(ps)
    for t in range(6):
        assert cm.counts[t].sum() == sum(1 for a, _ in ps if a == t)


def test_confusion_empty():
    with pytest.raises(EmptyInput):
        confusion([])


def test_matrix_read_only():
    cm = confusion([(1, 2)])
    with pytest.raises(ValueError):
        cm.counts[0, 0] = 5


# -- percentages -----------------------------------------------------------

def test_row_normalize_rounding():
    cm = ConfusionMatrix(np.diag([0, 0, 0, 0, 0, 21]) + np.pad([[2, 1, 0, 0, 0, 0]], ((0, 5), (0, 0))))
    pct = row_normalize(cm)
    assert pct.rounded[0].tolist() == [66.67, 33.33, 0, 0, 0, 0]
    assert pct.rounded[5, 5] == 100.0
    assert pct.empty_rows == (False, True, True, True, True, False)
    assert pct.rounded[1].tolist() == [0.0] * 6


def test_format_pct():
    assert format_pct(Fraction(1700, 21)) == "80.95"
    assert format_pct(Fraction(100)) == "100.00"
    assert format_pct(Fraction(0)) == "0.00"
    assert format_pct(Fraction(1, 800)) == "0.00"
    assert format_pct(Fraction(1, 200)) == "0.01"      # exact half rounds up


@given(count_matrices)
def test_rows_sum_to_100_exactly(counts):
    pct = row_normalize(ConfusionMatrix(counts))
    for r in range(6):
        total = sum(pct.exact[r])
        assert total == (0 if pct.empty_rows[r] else 100)


# -- misclassification tables ----------------------------------------------

@given(count_matrices)
def test_misclassification_brute_force(counts):
    table = misclassification_table(ConfusionMatrix(counts))
    for t in range(6):
        expected = [LABELS[p] for p in range(6) if p != t and counts[t][p] != 0]
        assert list(table[LABELS[t]]) == expected


@given(count_matrices)
def test_misclassification_same_for_normalized_rows(counts):
    rows = counts.sum(axis=1, keepdims=True)
    unit = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    assert misclassification_table(unit) == misclassification_table(ConfusionMatrix(counts))


@pytest.mark.parametrize("key", sorted(REFERENCE_MISCLASSIFIED))
def test_reference_tables(key):
    for source in (reference_matrix(key), unit_row_matrix(key)):
        table = misclassification_table(source)
        for true_name, expected in REFERENCE_MISCLASSIFIED[key].items():
            assert names(table[EmotionLabel.parse(true_name)]) == expected, (key, true_name)


def test_female_sad_row_not_in_listed_rows():
    # the reference lists skip Sad for the female-only training; our table still reports it
    table = misclassification_table(reference_matrix("F-F"))
    assert "Sad" not in REFERENCE_MISCLASSIFIED["F-F"]
    assert names(table[S]) == {"Angry", "Fear"}


@pytest.mark.parametrize("key", sorted(REFERENCE_PERCENTAGES))
def test_counts_reproduce_percentages(key):
    cm = reference_matrix(key)
    assert row_normalize(cm).rounded.tolist() == np.round(REFERENCE_PERCENTAGES[key], 2).tolist()


def test_counts_from_percentages_small():
    assert counts_from_percentages([[66.67, 33.33, 0, 0, 0, 0]]).tolist() == [[2, 1, 0, 0, 0, 0]]
    with pytest.raises(ValueError):
        counts_from_percentages([[50.0, 49.0, 0, 0, 0, 0]], max_n=50)


# -- gaps ------------------------------------------------------------------

def test_angry_gap_on_reference():
    male, female = reference_matrix("M-M"), reference_matrix("M-F")
    gap = group_gap(male, female)
    assert round(gap.gap(A), 2) == 17.27
    assert round(group_gap(female, male).gap(A), 2) == -17.27


def test_flagged_cells_on_reference():
    gap = group_gap(reference_matrix("M-F"), reference_matrix("M-M"))
    flagged = {(c.true, c.predicted): (round(c.pct_a, 2), round(c.pct_b, 2)) for c in gap.flagged_cells}
    assert flagged[(A, S)] == (70.00, 27.27)
    assert flagged[(F, H)] == (66.67, 28.57)
    assert all(t != p for t, p in flagged)
    # every flagged cell and only those meet the threshold
    pa = np.array(REFERENCE_PERCENTAGES["M-F"])
    pb = np.array(REFERENCE_PERCENTAGES["M-M"])
    by_hand = {(LABELS[t], LABELS[p]) for t in range(6) for p in range(6)
               if t != p and abs(pa[t, p] - pb[t, p]) >= 20}
    assert set(flagged) == by_hand


@settings(max_examples=60)
@given(count_matrices, count_matrices)
def test_gap_antisymmetric(a, b):
    if a.sum() == 0 or b.sum() == 0:
        return
    ga = group_gap(ConfusionMatrix(a), ConfusionMatrix(b))
    gb = group_gap(ConfusionMatrix(b), ConfusionMatrix(a))
    assert ga.overall == -gb.overall
    for x, y in zip(ga.per_class, gb.per_class):
        assert (x is None and y is None) or x == -y
    assert ga.undefined_classes == gb.undefined_classes


@given(count_matrices)
def test_gap_identity(a):
    if a.sum() == 0:
        return
    g = group_gap(ConfusionMatrix(a), ConfusionMatrix(a))
    assert g.overall == 0
    assert all(v is None or v == 0 for v in g.per_class)
    assert not g.flagged_cells


def test_gap_undefined_class():
    a = confusion([(0, 0), (1, 1)])
    b = confusion([(0, 1), (2, 2)])
    g = group_gap(a, b)
    assert g.per_class[0] == 100.0
    assert g.per_class[1] is None and g.per_class[2] is None
    assert set(g.undefined_classes) == {D, F, H, S, U}


# -- serialisation ---------------------------------------------------------

def test_csv_layout_and_round_trip():
    cm = reference_matrix("B-B")
    text = confusion_csv(cm)
    lines = text.splitlines()
    assert lines[0] == "counts,Angry,Disgust,Fear,Happy,Sad,Surprise,total"
    assert lines[7] == ""
    assert lines[9].startswith("Angry,80.95,4.76,0.00,4.76,9.52,0.00,0")
    assert np.array_equal(read_confusion_csv(text).counts, cm.counts)


def _report():
    mats = {k: ConfusionMatrix(reference_matrix(k).counts, k) for k in ("M-M", "M-F")}
    gaps = [group_gap(mats["M-F"], mats["M-M"])]
    return AuditReport(mats, gaps, {"note": "x", "seed": 3},
                       {"M-M": {"train": "M", "test": "M"}, "M-F": {"train": "M", "test": "F"}})


def test_json_round_trip():
    rep = _report()
    back = AuditReport.from_json(rep.to_json())
    assert back == rep
    assert back.to_json() == rep.to_json()
    obj = json.loads(rep.to_json())
    assert obj["experiments"]["M-F"]["percent"][0] == [10.0, 0.0, 10.0, 10.0, 70.0, 0.0]


def test_emit_byte_identical(tmp_path):
    emit_report(_report(), tmp_path / "a")
    emit_report(_report(), tmp_path / "b")
    for rel in ("audit_summary.json", "matrices/M-F_confusion.csv", "matrices/M-M_confusion.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert load_report(tmp_path / "a" / "audit_summary.json") == _report()
