from .explain import Explanation, LimeParams, explain, mask_image, superpixel_means
from .overlay import parse_sidecar, render_overlay, sidecar_text, write_explanation
from .segment import Segmentation, grid_segment, make_segmentation, slic_segment
from .surrogate import (cosine_distance_to_ones, fit_weighted_ridge, kernel_weight,
                        sample_perturbations, weighted_r2)

__all__ = [
    "Explanation", "LimeParams", "Segmentation", "cosine_distance_to_ones", "explain",
    "fit_weighted_ridge", "grid_segment", "kernel_weight", "make_segmentation", "mask_image",
    "parse_sidecar", "render_overlay", "sample_perturbations", "sidecar_text",
    "slic_segment", "superpixel_means", "weighted_r2", "write_explanation",
]
