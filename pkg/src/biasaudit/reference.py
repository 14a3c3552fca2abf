"""Row-percentage confusion matrices from the original BU-4DFE audit.

Keys are experiment ids ``<train>-<test>``; rows are true classes and
columns predicted classes, both in ``LABELS`` order.
"""

import numpy as np

from .bias import ConfusionMatrix, counts_from_percentages

REFERENCE_PERCENTAGES = {
    "B-B": [[80.95, 4.76, 0.00, 4.76, 9.52, 0.00],
            [4.76, 57.14, 9.52, 28.57, 0.00, 0.00],
            [12.50, 0.00, 12.50, 62.50, 12.50, 0.00],
            [0.00, 10.53, 10.53, 73.68, 5.26, 0.00],
            [40.00, 0.00, 6.67, 0.00, 53.33, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.00, 100.00]],
    "B-M": [[81.82, 0.00, 0.00, 0.00, 18.18, 0.00],
            [11.11, 66.67, 22.22, 0.00, 0.00, 0.00],
            [28.57, 0.00, 14.29, 28.57, 28.57, 0.00],
            [0.00, 20.00, 20.00, 50.00, 10.00, 0.00],
            [42.86, 0.00, 0.00, 0.00, 57.14, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.00, 100.00]],
    "B-F": [[80.00, 10.00, 0.00, 10.00, 0.00, 0.00],
            [0.00, 50.00, 0.00, 50.00, 0.00, 0.00],
            [0.00, 0.00, 11.11, 88.89, 0.00, 0.00],
            [0.00, 0.00, 0.00, 100.00, 0.00, 0.00],
            [37.50, 0.00, 12.50, 0.00, 50.00, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.00, 100.00]],
    "M-M": [[27.27, 45.45, 0.00, 0.00, 27.27, 0.00],
            [0.00, 55.56, 22.22, 11.11, 11.11, 0.00],
            [0.00, 0.00, 71.43, 28.57, 0.00, 0.00],
            [0.00, 10.00, 40.00, 50.00, 0.00, 0.00],
            [0.00, 0.00, 14.29, 0.00, 85.71, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.00, 100.00]],
    "M-F": [[10.00, 0.00, 10.00, 10.00, 70.00, 0.00],
            [0.00, 50.00, 16.67, 25.00, 0.00, 8.33],
            [0.00, 0.00, 33.33, 66.67, 0.00, 0.00],
            [0.00, 0.00, 33.33, 66.67, 0.00, 0.00],
            [0.00, 0.00, 12.50, 0.00, 87.50, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.00, 100.00]],
    "F-F": [[50.00, 20.00, 10.00, 0.00, 0.00, 20.00],
            [0.00, 50.00, 0.00, 25.00, 0.00, 25.00],
            [0.00, 22.22, 11.11, 66.67, 0.00, 0.00],
            [0.00, 0.00, 0.00, 100.00, 0.00, 0.00],
            [25.00, 0.00, 12.50, 0.00, 62.50, 0.00],
            [0.00, 0.00, 0.00, 0.00, 0.00, 100.00]],
    "F-M": [[90.91, 0.00, 0.00, 0.00, 9.09, 0.00],
            [0.00, 77.78, 11.11, 0.00, 11.11, 0.00],
            [28.57, 28.57, 42.86, 0.00, 0.00, 0.00],
            [10.00, 40.00, 0.00, 30.00, 20.00, 0.00],
            [42.86, 0.00, 0.00, 0.00, 57.14, 0.00],
            [0.00, 0.00, 20.00, 0.00, 0.00, 80.00]],
}

# misclassification lists reported for the single-group trainings, as class names
REFERENCE_MISCLASSIFIED = {
    "F-F": {"Angry": {"Disgust", "Fear", "Surprise"}, "Disgust": {"Happy", "Surprise"},
            "Fear": {"Disgust", "Happy"}, "Happy": set(), "Surprise": set()},
    "F-M": {"Angry": {"Sad"}, "Disgust": {"Fear", "Sad"}, "Fear": {"Disgust", "Angry"},
            "Happy": {"Angry", "Disgust", "Sad"}, "Surprise": {"Fear"}},
    "M-F": {"Angry": {"Fear", "Happy", "Sad"}, "Fear": {"Happy"}},
    "M-M": {"Angry": {"Disgust", "Sad"}, "Fear": {"Happy"}},
}


def reference_matrix(key: str) -> ConfusionMatrix:
    """Smallest-count matrix reproducing the published row percentages."""
    return ConfusionMatrix(counts_from_percentages(REFERENCE_PERCENTAGES[key]), key)


def unit_row_matrix(key: str) -> np.ndarray:
    """The percentage matrix scaled so every row sums to one."""
    return np.array(REFERENCE_PERCENTAGES[key]) / 100.0
