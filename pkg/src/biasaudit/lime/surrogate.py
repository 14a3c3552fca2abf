"""Perturbation sampling, proximity kernel and the weighted ridge surrogate."""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import SingularSystem


def sample_perturbations(d: int, n: int, seed: int) -> np.ndarray:
    """(n, d) 0/1 matrix. Row 0 is all ones; other rows are fair coin flips."""
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, size=(n, d), dtype=np.uint8)
    z[0] = 1
    return z


def cosine_distance_to_ones(z) -> np.ndarray:
    """1 - cos(z, 1) for binary rows; an all-zero row counts as distance 1."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    d = z.shape[1]
    return 1.0 - np.sqrt(z.sum(axis=1) / d)


def kernel_weight(z, sigma: float):
    """``exp(-D**2 / sigma**2)``; scalar for one vector, array for a matrix."""
    if not sigma > 0:
        raise ValueError(f"kernel width must be positive, got {sigma}")
    dist = cosine_distance_to_ones(z)
    w = np.exp(-dist ** 2 / sigma ** 2)
    return float(w[0]) if np.ndim(z) == 1 else w


def fit_weighted_ridge(z, y, w, lam: float):
    """Minimise ``sum w_i (y_i - beta.z_i - b)**2 + lam |beta|**2``.

    The intercept is not penalised: the system is centred on the weighted
    means and the d x d normal equations are solved by Cholesky.
    Returns ``(beta, intercept)``.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, d = z.shape
    if n < 2 or y.shape != (n,) or w.shape != (n,):
        raise ValueError("need N >= 2 rows with matching y and w")
    if lam < 0 or np.any(w < 0):
        raise ValueError("lambda and weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise SingularSystem("all sample weights are zero")
    z_mean = w @ z / total
    y_mean = w @ y / total
    zc = z - z_mean
    yc = y - y_mean
    gram = zc.T @ (w[:, None] * zc)
    rhs = zc.T @ (w * yc)
    if lam == 0 and np.linalg.matrix_rank(np.sqrt(w)[:, None] * zc) < d:
        raise SingularSystem("design is rank deficient and lambda is 0")
    gram[np.diag_indices(d)] += lam
    try:
        beta = cho_solve(cho_factor(gram), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    return beta, float(y_mean - z_mean @ beta)


def weighted_r2(y, y_hat, w) -> float:
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    mean = w @ y / w.sum()
    ss_tot = w @ (y - mean) ** 2
    if ss_tot == 0:
        return float("nan")
    return float(1.0 - (w @ (y - y_hat) ** 2) / ss_tot)
