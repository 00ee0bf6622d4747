"""Forward/backward kernels for the VGG-nano layer set.

Tensors are plain numpy arrays, float32 and row-major in the production path
(the kernels follow the input dtype so verification code can run them in
float64). Convolutions are im2col + one BLAS matmul, so the per-window
reductions happen inside a single deterministic call; batched variants reduce
over the batch axis the same way, which keeps results independent of any
worker count.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when tensor shapes do not satisfy a kernel's contract."""


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Promote a single sample to a batch of one. Returns (array, was_single)."""
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected 3D [C,H,W] or 4D [B,C,H,W] input, got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, k: int, stride: int, pad: int) -> tuple[np.ndarray, int, int]:
    """Unfold [B,C,H,W] into [B*H'*W', C*k*k] patch rows (zero padding)."""
    b, c, h, w = x.shape
    if pad > 0:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * out_h * out_w, c * k * k)
    return np.ascontiguousarray(cols), out_h, out_w


def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray,
                   stride: int = 1, pad: int = 1) -> np.ndarray:
    """2D convolution (cross-correlation) with zero padding.

    x: [C_in,H,W] or [B,C_in,H,W]; weights: [C_out,C_in,k,k]; bias: [C_out].
    Output H' = (H + 2*pad - k)//stride + 1, analogously W'.
    """
    x, single = _as_batch(x)
    if weights.ndim != 4:
        raise ShapeError(f"weights must be [C_out,C_in,k,k], got shape {weights.shape}")
    c_out, c_in, k, k2 = weights.shape
    if k != k2:
        raise ShapeError(f"non-square kernel in weights shape {weights.shape}")
    if x.shape[1] != c_in:
        raise ShapeError(
            f"input channel mismatch: input shape {tuple(x.shape[1:])} has "
            f"{x.shape[1]} channels but weights shape {tuple(weights.shape)} expect {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} does not match {c_out} output channels")
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    h, w = x.shape[2], x.shape[3]
    if k > h + 2 * pad or k > w + 2 * pad:
        raise ShapeError(f"kernel {k} exceeds padded input {h + 2 * pad}x{w + 2 * pad}")

    cols, out_h, out_w = _im2col(x, k, stride, pad)
    w_mat = weights.reshape(c_out, c_in * k * k)
    y = cols @ w_mat.T + bias
    y = np.ascontiguousarray(y.reshape(x.shape[0], out_h, out_w, c_out).transpose(0, 3, 1, 2))
    return y[0] if single else y


def conv2d_backward(x: np.ndarray, weights: np.ndarray, dy: np.ndarray,
                    stride: int = 1, pad: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward. Returns (dx, dweights, dbias)."""
    x, single = _as_batch(x)
    dy, _ = _as_batch(dy)
    c_out, c_in, k, _ = weights.shape
    b, _, h, w = x.shape
    out_h, out_w = dy.shape[2], dy.shape[3]

    cols, _, _ = _im2col(x, k, stride, pad)
    dy_mat = dy.transpose(0, 2, 3, 1).reshape(b * out_h * out_w, c_out)

    dw = (dy_mat.T @ cols).reshape(weights.shape)
    db = dy_mat.sum(axis=0)

    w_mat = weights.reshape(c_out, c_in * k * k)
    dcols = dy_mat @ w_mat
    dgrid = dcols.reshape(b, out_h, out_w, c_in, k, k).transpose(0, 3, 1, 2, 4, 5)

    dx_pad = np.zeros((b, c_in, h + 2 * pad, w + 2 * pad), dtype=dgrid.dtype)
    for ki in range(k):
        rows = slice(ki, ki + stride * (out_h - 1) + 1, stride)
        for kj in range(k):
            dx_pad[:, :, rows, kj:kj + stride * (out_w - 1) + 1:stride] += dgrid[:, :, :, :, ki, kj]
    dx = dx_pad[:, :, pad:pad + h, pad:pad + w] if pad else dx_pad
    dx = np.ascontiguousarray(dx)
    return (dx[0], dw, db) if single else (dx, dw, db)


# ---------------------------------------------------------------------------
# max pooling 2x2 stride 2
# ---------------------------------------------------------------------------

def maxpool2x2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2/stride-2 max pooling. Returns (output, argmax_mask).

    The mask holds, per output cell, the row-major index 0..3 of the winning
    element inside its 2x2 window (ties go to the first, i.e. row-major,
    maximum).
    """
    x, single = _as_batch(x)
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial extents, got {h}x{w}")
    windows = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = windows.reshape(b, c, h // 2, w // 2, 4)
    mask = flat.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(flat, mask[..., None].astype(np.intp), axis=-1)[..., 0]
    y = np.ascontiguousarray(y)
    return (y[0], mask[0]) if single else (y, mask)


def maxpool2x2_backward(mask: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Scatter upstream gradients back to the argmax positions."""
    if mask.ndim == 3:
        mask, dy = mask[None], dy[None]
        single = True
    else:
        single = False
    b, c, oh, ow = dy.shape
    flat = np.zeros((b, c, oh, ow, 4), dtype=dy.dtype)
    np.put_along_axis(flat, mask[..., None].astype(np.intp), dy[..., None], axis=-1)
    dx = flat.reshape(b, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, oh * 2, ow * 2)
    dx = np.ascontiguousarray(dx)
    return dx[0] if single else dx


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------

def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine layer: out[i] = sum_j weights[i,j]*x[j] + bias[i]. x: [n] or [B,n]."""
    if weights.ndim != 2:
        raise ShapeError(f"dense weights must be 2D [m,n], got shape {weights.shape}")
    m, n = weights.shape
    if x.shape[-1] != n:
        raise ShapeError(f"dense input length {x.shape[-1]} does not match weights shape {weights.shape}")
    if bias.shape != (m,):
        raise ShapeError(f"dense bias shape {bias.shape} does not match {m} output units")
    return x @ weights.T + bias


def dense_backward(x: np.ndarray, weights: np.ndarray, dy: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of dense_forward. Returns (dx, dweights, dbias)."""
    if x.ndim == 1:
        dw = np.outer(dy, x)
        db = dy.copy()
    else:
        dw = dy.T @ x
        db = dy.sum(axis=0)
    dx = dy @ weights
    return dx, dw, db


# ---------------------------------------------------------------------------
# relu
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


# ---------------------------------------------------------------------------
# softmax + cross entropy
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss -log softmax(logits)[target] and its gradient softmax - onehot."""
    if logits.ndim != 1:
        raise ShapeError(f"expected a single logits vector, got shape {logits.shape}")
    c = logits.shape[0]
    if not 0 <= target < c:
        raise ValueError(f"target {target} out of range for {c} classes")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = float(log_z - shifted[target])
    grad = softmax(logits)
    grad[target] -= 1
    return loss, grad.astype(logits.dtype, copy=False)


def softmax_cross_entropy_batch(logits: np.ndarray, targets: np.ndarray
                                ) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch and the gradient of that mean."""
    b, c = logits.shape
    if targets.min() < 0 or targets.max() >= c:
        raise ValueError(f"targets out of range for {c} classes")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float((log_z - shifted[np.arange(b), targets]).mean())
    grad = softmax(logits)
    grad[np.arange(b), targets] -= 1
    grad /= b
    return loss, grad.astype(logits.dtype, copy=False)
