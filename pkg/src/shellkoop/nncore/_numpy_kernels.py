"""Pure-NumPy kernel backend.

Reference implementation of the fixed layer set; the compiled backend in
``_ckernels`` mirrors these signatures exactly. All arrays are float64 and
C-contiguous; backward formulas are the hand-derived chain-rule forms the
finite-difference checker validates.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def matmul_backward(g: np.ndarray, a: np.ndarray, b: np.ndarray):
    """d(a@b): grad_a = g @ b^T, grad_b = a^T @ g."""
    return g @ b.T, a.T @ g


def affine_forward(h: np.ndarray, w: np.ndarray, b: np.ndarray, activate: bool) -> np.ndarray:
    """out = h @ w + b, through tanh when ``activate``."""
    if h.shape[1] != w.shape[0]:
        raise ValueError(f"affine shape mismatch: {h.shape} @ {w.shape}")
    out = h @ w + b
    return np.tanh(out) if activate else out


def affine_backward(g: np.ndarray, h: np.ndarray, w: np.ndarray, out: np.ndarray, activate: bool):
    """Returns (d_h, d_w, d_b); ``out`` is the forward output (post-tanh)."""
    gpre = g * (1.0 - out * out) if activate else g
    return gpre @ w.T, h.T @ gpre, gpre.sum(axis=0, keepdims=True)


def gcn_forward(a_hat: np.ndarray, h: np.ndarray, w: np.ndarray, b: np.ndarray, activate: bool):
    """Graph convolution out = act(a_hat @ h @ w + b); returns (out, a_hat @ h)."""
    if a_hat.shape[1] != h.shape[0] or h.shape[1] != w.shape[0]:
        raise ValueError(f"gcn shape mismatch: {a_hat.shape}, {h.shape}, {w.shape}")
    ah = a_hat @ h
    out = ah @ w + b
    if activate:
        out = np.tanh(out)
    return out, ah


def gcn_backward(g, a_hat, ah, w, out, activate: bool):
    """Returns (d_h, d_w, d_b) given the cached aggregate ``ah``."""
    gpre = g * (1.0 - out * out) if activate else g
    d_w = ah.T @ gpre
    d_b = gpre.sum(axis=0, keepdims=True)
    d_h = a_hat.T @ (gpre @ w.T)
    return d_h, d_w, d_b


def mean_pool_forward(h: np.ndarray) -> np.ndarray:
    return h.mean(axis=0, keepdims=True)


def mean_pool_backward(g: np.ndarray, n: int) -> np.ndarray:
    return np.repeat(g / n, n, axis=0)


def _mse_select(pred, target, row_mask):
    if pred.shape != target.shape:
        raise ValueError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
    if row_mask is None:
        return pred, target
    row_mask = np.asarray(row_mask, dtype=bool)
    if row_mask.shape != (pred.shape[0],):
        raise ValueError(f"row mask must have shape ({pred.shape[0]},)")
    if not row_mask.any():
        raise ValueError("mse row mask selects no rows")
    return pred[row_mask], target[row_mask]


def mse_forward(pred: np.ndarray, target: np.ndarray, row_mask=None):
    """Returns (mse, sse, n_elements) over the selected rows."""
    p, t = _mse_select(pred, target, row_mask)
    diff = p - t
    sse = float((diff * diff).sum())
    return sse / diff.size, sse, diff.size


def mse_backward(pred: np.ndarray, target: np.ndarray, row_mask=None) -> np.ndarray:
    """d(mse)/d(pred): zero outside the selected rows."""
    p, t = _mse_select(pred, target, row_mask)
    g = np.zeros_like(pred)
    scaled = 2.0 * (p - t) / p.size
    if row_mask is None:
        g[:] = scaled
    else:
        g[np.asarray(row_mask, dtype=bool)] = scaled
    return g


def adam_update(value, grad, m, v, step, lr, beta1, beta2, eps):
    """In-place bias-corrected Adam step on one parameter block."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    value -= lr * m_hat / (np.sqrt(v_hat) + eps)
