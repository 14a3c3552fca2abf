from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..dataset import EmotionLabel
from ..errors import DegenerateModel, DimensionMismatch, FewSamplesWarning, LengthMismatch
from .segment import Segmentation, slic_segment
from .surrogate import fit_weighted_ridge, kernel_weight, sample_perturbations, weighted_r2

# (n, h, w) uint8 images -> (n, 6) class probabilities
Predictor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LimeParams:
    num_samples: int = 1000
    kernel_width: float = 0.25
    ridge_lambda: float = 1.0
    top_k: int = 10
    seed: int = 0
    num_segments: int = 40
    compactness: float = 10.0
    iterations: int = 10
    # "mean" replaces a switched-off superpixel by its own mean; an int fills a constant
    fudge: str | int = "mean"
    batch_size: int = 100

    def validate(self) -> None:
        if self.num_samples < 2 or self.top_k < 1 or self.batch_size < 1:
            raise ValueError("num_samples >= 2, top_k >= 1 and batch_size >= 1 required")
        if not self.kernel_width > 0 or self.ridge_lambda < 0:
            raise ValueError("kernel_width must be positive and ridge_lambda non-negative")
        if self.fudge != "mean" and not (isinstance(self.fudge, int) and 0 <= self.fudge <= 255):
            raise ValueError(f"fudge must be 'mean' or an intensity, got {self.fudge!r}")


@dataclass(frozen=True)
class Explanation:
    target_class: EmotionLabel
    weights: tuple[float, ...]
    intercept: float
    top_features: tuple[tuple[int, float], ...]
    fidelity: float
    original_prob: float
    degenerate: bool = False
    segmentation: Optional[Segmentation] = field(default=None, compare=False, repr=False)

    def ranked(self, k: int | None = None, positive_only: bool = False) -> list[tuple[int, float]]:
        """Superpixels by |weight| (or by weight, keeping positives only)."""
        items = list(enumerate(self.weights))
        if positive_only:
            items = sorted((i for i in items if i[1] > 0), key=lambda t: (-t[1], t[0]))
        else:
            items = sorted(items, key=lambda t: (-abs(t[1]), t[0]))
        return items if k is None else items[:k]


def superpixel_means(img: np.ndarray, seg: Segmentation) -> np.ndarray:
    flat = seg.labels.ravel()
    sums = np.bincount(flat, weights=img.ravel().astype(np.float64), minlength=seg.d)
    return np.floor(sums / seg.sizes() + 0.5).astype(np.uint8)


def mask_image(img: np.ndarray, seg: Segmentation, z, fudge="mean", means=None) -> np.ndarray:
    """Keep superpixels with z=1, replace the others by the fudge value."""
    z = np.asarray(z)
    if z.shape != (seg.d,):
        raise LengthMismatch(f"z has length {z.size}, segmentation has {seg.d} superpixels")
    if img.shape != seg.labels.shape:
        raise DimensionMismatch(f"image {img.shape} vs segmentation {seg.labels.shape}")
    off = (z == 0)[seg.labels]
    out = img.copy()
    if fudge == "mean":
        fill = superpixel_means(img, seg) if means is None else means
        out[off] = fill[seg.labels[off]]
    else:
        out[off] = fudge
    return out


def explain(predictor: Predictor, img: np.ndarray, target_class, params: LimeParams = LimeParams(),
            segmentation: Segmentation | None = None) -> Explanation:
    """Local linear explanation of ``predictor`` around ``img`` for one class.

    Perturbed images are predicted in sample order and in batches of
    ``params.batch_size``; the surrogate only sees the stacked results, so
    the outcome depends on nothing but the inputs and ``params.seed``.
    """
    params.validate()
    target = EmotionLabel(int(target_class))
    seg = segmentation if segmentation is not None else slic_segment(
        img, params.num_segments, params.compactness, params.iterations)
    if seg.labels.shape != img.shape:
        raise DimensionMismatch(f"image {img.shape} vs segmentation {seg.labels.shape}")
    d = seg.d
    if params.num_samples < d:
        warnings.warn(f"{params.num_samples} samples for {d} superpixels", FewSamplesWarning, stacklevel=2)
    z = sample_perturbations(d, params.num_samples, params.seed)
    means = superpixel_means(img, seg) if params.fudge == "mean" else None

    y = np.empty(params.num_samples, dtype=np.float64)
    for start in range(0, params.num_samples, params.batch_size):
        rows = z[start:start + params.batch_size]
        batch = np.stack([mask_image(img, seg, row, params.fudge, means) for row in rows])
        probs = np.asarray(predictor(batch), dtype=np.float64)
        y[start:start + len(rows)] = probs[:, target]

    weights = kernel_weight(z, params.kernel_width)
    k = min(params.top_k, d)
    if np.all(y == y[0]):
        warnings.warn("all perturbed predictions are identical", DegenerateModel, stacklevel=2)
        beta = np.zeros(d)
        return Explanation(target, tuple(beta.tolist()), float(y[0]),
                           tuple((i, 0.0) for i in range(k)), float("nan"), float(y[0]),
                           degenerate=True, segmentation=seg)

    beta, intercept = fit_weighted_ridge(z, y, weights, params.ridge_lambda)
    fidelity = weighted_r2(y, z @ beta + intercept, weights)
    order = sorted(range(d), key=lambda i: (-abs(beta[i]), i))[:k]
    top = tuple((i, float(beta[i])) for i in order)
    return Explanation(target, tuple(float(b) for b in beta), intercept, top, fidelity,
                       float(y[0]), segmentation=seg)
