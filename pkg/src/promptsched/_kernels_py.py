"""Pure numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature. Inputs are 2-D float64 arrays (rows are independent) unless noted.
"""

import numpy as np

BACKEND = "python"


def softmax_forward(x, tau):
    z = x / tau
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(y, gy, tau):
    dot = (gy * y).sum(axis=1, keepdims=True)
    return y * (gy - dot) / tau


def layer_norm_forward(x, gain, bias, eps):
    """Returns (y, xhat, rstd); rstd has one entry per row."""
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layer_norm_backward(gy, xhat, rstd, gain):
    n = xhat.shape[1]
    ggain = (gy * xhat).sum(axis=0)
    gbias = gy.sum(axis=0)
    gxhat = gy * gain
    a = gxhat.sum(axis=1, keepdims=True)
    b = (gxhat * xhat).sum(axis=1, keepdims=True)
    gx = (gxhat - a / n - xhat * (b / n)) * rstd[:, None]
    return gx, ggain, gbias


def cross_entropy_forward(logits, labels):
    """Mean cross-entropy over rows; returns (loss, probs)."""
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(logits.shape[0])
    losses = lse - z[rows, labels]
    probs = np.exp(z - lse[:, None])
    return float(losses.mean()), probs


def cross_entropy_backward(probs, labels, gscale):
    g = probs.copy()
    g[np.arange(probs.shape[0]), labels] -= 1.0
    return g * (gscale / probs.shape[0])


def embedding_backward(ids, gy, vocab_size):
    """Scatter-add rows of ``gy`` into a (vocab_size, D) table, in row order."""
    out = np.zeros((vocab_size, gy.shape[1]))
    np.add.at(out, ids, gy)
    return out
