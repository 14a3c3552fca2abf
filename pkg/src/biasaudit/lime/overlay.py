"""Colour overlays of explanations and their text sidecars."""

import numpy as np

from ..errors import DimensionMismatch
from ..imgproc import write_ppm
from .explain import Explanation
from .segment import Segmentation

GREEN = np.array([0, 255, 0], dtype=np.float64)
RED = np.array([255, 0, 0], dtype=np.float64)
YELLOW = np.array([255, 255, 0], dtype=np.uint8)
TINT = 0.4


def inner_boundary(mask: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Pixels of ``mask`` with a 4-neighbour carrying a different label."""
    edge = np.zeros_like(mask)
    edge[1:, :] |= labels[1:, :] != labels[:-1, :]
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    edge[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    return edge & mask


def render_overlay(img: np.ndarray, seg: Segmentation, expl: Explanation) -> np.ndarray:
    """Gray image as RGB; selected superpixels tinted 40% toward green
    (positive weight) or red (negative), their outlines drawn in yellow."""
    if img.shape != seg.labels.shape or len(expl.weights) != seg.d:
        raise DimensionMismatch(f"image {img.shape}, segmentation {seg.labels.shape} "
                                f"with {seg.d} ids, explanation with {len(expl.weights)} weights")
    rgb = np.repeat(img[..., None], 3, axis=2)
    selected = np.zeros(img.shape, dtype=bool)
    for sp, weight in expl.top_features:
        mask = seg.labels == sp
        colour = GREEN if weight >= 0 else RED
        blended = (1.0 - TINT) * rgb[mask].astype(np.float64) + TINT * colour
        rgb[mask] = np.floor(blended + 0.5).astype(np.uint8)
        selected |= mask
    rgb[inner_boundary(selected, seg.labels) | _outline(selected)] = YELLOW
    return rgb


def _outline(selected):
    # selected pixels on the image border also count as boundary
    edge = np.zeros_like(selected)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    return edge & selected


def sidecar_text(expl: Explanation) -> str:
    lines = [f"# target_class {expl.target_class.display}",
             f"# original_prob {expl.original_prob:.9g}",
             f"# intercept {expl.intercept:.9g}",
             f"fidelity {expl.fidelity!r}"]
    lines += [f"{sp} {w!r}" for sp, w in expl.top_features]
    return "\n".join(lines) + "\n"


def parse_sidecar(text: str):
    """Inverse of :func:`sidecar_text` for the machine-readable lines."""
    fidelity = None
    pairs = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        key, value = line.split()
        if key == "fidelity":
            fidelity = float(value)
        else:
            pairs.append((int(key), float(value)))
    return pairs, fidelity


def write_explanation(path_stem, img, seg, expl) -> tuple[str, str]:
    ppm = f"{path_stem}.ppm"
    txt = f"{path_stem}.txt"
    write_ppm(ppm, render_overlay(img, seg, expl))
    with open(txt, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(sidecar_text(expl))
    return ppm, txt
