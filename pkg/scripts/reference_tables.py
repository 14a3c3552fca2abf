"""Recompute misclassification tables and group gaps from the reference matrices."""

from biasaudit.bias import group_gap, misclassification_table, row_normalize
from biasaudit.dataset import LABELS
from biasaudit.reference import REFERENCE_PERCENTAGES, reference_matrix


def show_table(train, a, b):
    print(f"\ntrained on {train}:  {'test ' + a:36s} test {b}")
    ta = misclassification_table(reference_matrix(a))
    tb = misclassification_table(reference_matrix(b))
    for label in LABELS:
        left = ", ".join(l.display for l in ta[label]) or "-"
        right = ", ".join(l.display for l in tb[label]) or "-"
        print(f"  {label.display:9s} {left:36s} {right}")


def main():
    for key in REFERENCE_PERCENTAGES:
        cm = reference_matrix(key)
        sizes = cm.counts.sum(axis=1).tolist()
        assert row_normalize(cm).rounded.tolist() == REFERENCE_PERCENTAGES[key]
        print(f"{key}: smallest row sizes reproducing the percentages {sizes}")

    show_table("females", "F-F", "F-M")
    show_table("males", "M-F", "M-M")

    for a, b in (("B-F", "B-M"), ("F-F", "F-M"), ("M-F", "M-M")):
        g = group_gap(reference_matrix(a), reference_matrix(b))
        per = "  ".join(f"{l.display[:3]} {v:+7.2f}" for l, v in zip(LABELS, g.per_class))
        print(f"\n{a} minus {b}: {per}")
        for c in g.flagged_cells:
            print(f"  flagged {c.true.display} -> {c.predicted.display}: {c.pct_a:.2f} vs {c.pct_b:.2f}")


if __name__ == "__main__":
    main()
