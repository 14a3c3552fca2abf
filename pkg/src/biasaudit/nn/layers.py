"""Forward/backward pairs for the layers of the emotion CNN.

Activations are NHWC. Every ``*_forward`` returns ``(out, cache)`` and the
matching ``*_backward`` takes ``(dout, cache)``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_forward(x, w, b, stride=1):
    """Zero-padded ("same" for stride 1) 2-D convolution.

    Inputs:
    - x: (N, H, W, C)
    - w: (K, K, C, F)
    - b: (F,)

    Returns (out, cache) with out of shape (N, Ho, Wo, F).
    """
    k = w.shape[0]
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, k - 1 - pad), (pad, k - 1 - pad), (0, 0)))
    # (N, H', W', C, K, K) -> strided -> (N, Ho, Wo, K, K, C)
    win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    n, ho, wo = win.shape[:3]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, -1)
    out = cols @ w.reshape(-1, w.shape[3]) + b
    return out.reshape(n, ho, wo, -1), (x.shape, xp.shape, cols, w, stride, pad)


def conv_backward(dout, cache):
    x_shape, xp_shape, cols, w, stride, pad = cache
    k, _, c, f = w.shape
    n, ho, wo, _ = dout.shape
    d2 = dout.reshape(-1, f)
    dw = (cols.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(-1, f).T).reshape(n, ho, wo, k, k, c)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += dcols[:, :, :, i, j, :]
    h, wd = x_shape[1:3]
    dx = dxp[:, pad:pad + h, pad:pad + wd, :]
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(dout, cache):
    return dout * (cache > 0)


def maxpool_forward(x):
    """2x2 max-pool, stride 2. Odd trailing rows/columns are dropped."""
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    xc = x[:, :2 * ho, :2 * wo, :]
    win = xc.reshape(n, ho, 2, wo, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, idx)


def maxpool_backward(dout, cache):
    x_shape, idx = cache
    n, h, w, c = x_shape
    ho, wo = h // 2, w // 2
    # ties go to the first maximum in window order, as argmax picks it
    dwin = np.zeros((n, ho, wo, c, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, c)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :2 * ho, :2 * wo, :] = dwin
    return dx


def affine_forward(x, w, b):
    flat = x.reshape(x.shape[0], -1)
    return flat @ w + b, (x.shape, flat, w)


def affine_backward(dout, cache):
    x_shape, flat, w = cache
    return (dout @ w.T).reshape(x_shape), flat.T @ dout, dout.sum(axis=0)


def dropout_forward(x, rate, rng):
    """Inverted dropout: kept units are scaled by 1/(1 - rate)."""
    if rate == 0.0 or rng is None:
        return x, None
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_p[np.arange(n), labels].mean()
    dlogits = np.exp(log_p)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n
