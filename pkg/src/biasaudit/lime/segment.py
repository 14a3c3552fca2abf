"""SLIC-style superpixels for grayscale images.

k-means in (x, y, intensity) with grid-seeded centers, restricted to a
window around each center, then a connectivity pass so every superpixel is
one 4-connected region. Fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import BadK


@dataclass(frozen=True, eq=False)
class Segmentation:
    labels: np.ndarray   # (h, w) int32, dense ids 0..d-1
    d: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.d)

    def __eq__(self, other):
        return (isinstance(other, Segmentation) and self.d == other.d
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


def make_segmentation(labels) -> Segmentation:
    """Wrap a label image, relabeling ids densely in raster first-appearance order."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first), dtype=np.int32)
    dense = rank[inverse].reshape(labels.shape)
    dense.setflags(write=False)
    return Segmentation(dense, len(first))


def grid_centers(h: int, w: int, k: int) -> list[tuple[int, int]]:
    """Exactly k (y, x) seeds, spread over rows as evenly as possible."""
    rows = max(1, math.floor(math.sqrt(k * h / w)))
    rows = min(max(rows, math.ceil(k / w)), h, k)
    per_row = [k // rows + (1 if r < k % rows else 0) for r in range(rows)]
    seeds = []
    for r, count in enumerate(per_row):
        y = int((r + 0.5) * h / rows)
        for j in range(count):
            seeds.append((y, int((j + 0.5) * w / count)))
    return seeds


def _gradient_magnitude(img):
    p = np.pad(img, 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx * gx + gy * gy


def _perturb_seeds(img, seeds):
    """Move each seed to the lowest-gradient pixel of its 3x3 neighbourhood."""
    h, w = img.shape
    grad = _gradient_magnitude(img)
    out = []
    taken = set()
    for y, x in seeds:
        best = (grad[y, x], y, x)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and grad[yy, xx] < best[0] and (yy, xx) not in taken:
                    best = (grad[yy, xx], yy, xx)
        taken.add(best[1:])
        out.append(best[1:])
    return out


def _assign(img_flat, ys, xs, centers, step, m, window):
    # centers: (k, 3) = y, x, intensity
    dy = ys[None, :] - centers[:, 0:1]
    dx = xs[None, :] - centers[:, 1:2]
    di = img_flat[None, :] - centers[:, 2:3]
    dist2 = di * di + (m / step) ** 2 * (dx * dx + dy * dy)
    if window is not None:
        outside = (np.abs(dy) > window) | (np.abs(dx) > window)
        windowed = np.where(outside, np.inf, dist2)
        labels = windowed.argmin(axis=0)
        lost = ~np.isfinite(windowed.min(axis=0))
        if lost.any():
            labels[lost] = dist2[:, lost].argmin(axis=0)
        return labels
    return dist2.argmin(axis=0)


def _components(labels):
    """Connected components (4-neighbour) of equal-label pixels."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    right = labels[:, :-1] == labels[:, 1:]
    down = labels[:-1, :] == labels[1:, :]
    src = np.concatenate([idx[:, :-1][right], idx[:-1, :][down]])
    dst = np.concatenate([idx[:, 1:][right], idx[1:, :][down]])
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(h * w, h * w))
    _, comp = connected_components(graph, directed=False)
    return comp.reshape(h, w)


def enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Merge every fragment that is not its label's largest piece into its
    largest neighbouring superpixel, until each label is one region."""
    labels = labels.copy()
    h, w = labels.shape
    while True:
        comp = _components(labels)
        n_comp = comp.max() + 1
        comp_size = np.bincount(comp.ravel(), minlength=n_comp)
        comp_label = np.zeros(n_comp, dtype=labels.dtype)
        comp_label[comp.ravel()] = labels.ravel()
        # main component per label: largest, ties to the lowest component id
        order = np.lexsort((np.arange(n_comp), -comp_size))
        main = {}
        for c in order:
            main.setdefault(int(comp_label[c]), int(c))
        orphans = [c for c in range(n_comp) if main[int(comp_label[c])] != c]
        if not orphans:
            return labels
        orphans.sort(key=lambda c: (comp_size[c], c))
        for c in orphans:
            mask = comp == c
            ring = np.zeros_like(mask)
            ring[1:, :] |= mask[:-1, :]
            ring[:-1, :] |= mask[1:, :]
            ring[:, 1:] |= mask[:, :-1]
            ring[:, :-1] |= mask[:, 1:]
            neighbours = np.unique(labels[ring & ~mask])
            own = labels[mask][0]
            neighbours = neighbours[neighbours != own]
            if len(neighbours) == 0:
                continue
            sizes = np.bincount(labels.ravel())
            best = max(neighbours, key=lambda lab: (sizes[lab], -lab))
            labels[mask] = best


def slic_segment(img: np.ndarray, k: int, compactness: float = 10.0, iterations: int = 10) -> Segmentation:
    """Superpixels of a grayscale image.

    Distance is ``sqrt(d_int**2 + (compactness * d_xy / S)**2)`` with grid
    spacing ``S = sqrt(h * w / k)``. Each center only claims pixels within
    ``S`` of it along both axes; pixels no window reaches fall back to the
    globally nearest center.
    """
    h, w = img.shape
    if not 2 <= k <= h * w:
        raise BadK(f"k must be in [2, {h * w}], got {k}")
    data = img.astype(np.float64)
    step = math.sqrt(h * w / k)
    ys, xs = np.mgrid[0:h, 0:w]
    ys = ys.ravel().astype(np.float64)
    xs = xs.ravel().astype(np.float64)
    flat = data.ravel()

    seeds = _perturb_seeds(data, grid_centers(h, w, k))
    centers = np.array([(y, x, data[y, x]) for y, x in seeds], dtype=np.float64)
    labels = None
    for _ in range(max(iterations, 1)):
        new = _assign(flat, ys, xs, centers, step, compactness, step)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=len(centers))
        live = counts > 0
        for col, vals in enumerate((ys, xs, flat)):
            sums = np.bincount(labels, weights=vals, minlength=len(centers))
            centers[live, col] = sums[live] / counts[live]

    result = make_segmentation(enforce_connectivity(labels.reshape(h, w)))
    if result.d < 2:
        # all pixels collapsed into one cluster: fall back to the spatial grid
        labels = _assign(flat, ys, xs, np.array([(y, x, 0.0) for y, x in seeds]), step, 1.0, None)
        result = make_segmentation(enforce_connectivity(labels.reshape(h, w)))
    return result


def grid_segment(h: int, w: int, rows: int, cols: int) -> Segmentation:
    """Regular rows x cols blocks; handy for tests and fixed-region explanations."""
    yy = (np.arange(h) * rows) // h
    xx = (np.arange(w) * cols) // w
    return make_segmentation(yy[:, None] * cols + xx[None, :])
