"""Central finite-difference checks for the backprop code. Float64 only."""

import numpy as np

from .model import CnnModel, loss_and_gradients


def relative_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def numerical_gradient(f, x, eps=1e-4, indices=None):
    """Central differences of scalar ``f()`` w.r.t. array ``x``, perturbed in place."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = indices if indices is not None else np.ndindex(*x.shape)
    for ix in it:
        old = x[ix]
        x[ix] = old + eps
        fp = f()
        x[ix] = old - eps
        fm = f()
        x[ix] = old
        grad[ix] = (fp - fm) / (2 * eps)
    return grad


def check_model_gradients(model: CnnModel, batch, labels, eps=1e-4, training=False, seed=0,
                          max_entries=None, rng=None):
    """Max relative error per parameter tensor between backprop and finite differences.

    With ``training`` the dropout mask is re-drawn from the same seed on
    every evaluation, so the function being differentiated stays fixed.
    """
    if model.dtype != np.float64:
        raise TypeError("gradient checks need a float64 model")

    def loss():
        r = np.random.default_rng(seed) if training else None
        return loss_and_gradients(model, batch, labels, training=training, rng=r)[0]

    r = np.random.default_rng(seed) if training else None
    _, analytic = loss_and_gradients(model, batch, labels, training=training, rng=r)
    report = {}
    for name, p in model.params.items():
        indices = None
        if max_entries is not None and p.size > max_entries:
            pick = (rng or np.random.default_rng(0)).choice(p.size, max_entries, replace=False)
            indices = [np.unravel_index(i, p.shape) for i in pick]
        num = numerical_gradient(loss, p, eps, indices)
        if indices is None:
            err = relative_error(analytic[name], num)
        else:
            sel = tuple(np.array(ix) for ix in zip(*indices))
            err = relative_error(analytic[name][sel], num[sel])
        report[name] = float(err.max())
    return report
