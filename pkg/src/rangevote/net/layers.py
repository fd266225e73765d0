"""Network layers as forward/backward pairs on (batch, channels, length) arrays.

forward returns (out, cache); backward takes the upstream gradient and the
cache and returns gradients for the inputs (and parameters where present).
All backward passes are exact reverse-mode derivatives of the forward math.
"""
import numpy as np


def _im2col3(x):
    # x: (B, C, L) -> (B, C*3, L) columns for a kernel-3, padding-1 conv
    B, C, L = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1)))
    cols = np.empty((B, C, 3, L), dtype=x.dtype)
    for k in range(3):
        cols[:, :, k, :] = xp[:, :, k:k + L]
    return cols.reshape(B, C * 3, L)


def conv1d_forward(x, w, b):
    # x: (B, C, L), w: (O, C, 3), b: (O,) -> (B, O, L); zero padding 1
    O = w.shape[0]
    cols = _im2col3(x)
    out = np.matmul(w.reshape(O, -1), cols)
    out += b.reshape(1, O, 1)
    return out, (x, w)


def conv1d_backward(dout, cache):
    x, w = cache
    B, C, L = x.shape
    O = w.shape[0]
    cols = _im2col3(x)
    db = dout.sum(axis=(0, 2))
    dw = np.tensordot(dout, cols, axes=([0, 2], [0, 2])).reshape(O, C, 3)
    dcols = np.matmul(w.reshape(O, -1).T, dout).reshape(B, C, 3, L)
    dxp = np.zeros((B, C, L + 2), dtype=dout.dtype)
    for k in range(3):
        dxp[:, :, k:k + L] += dcols[:, :, k, :]
    return dxp[:, :, 1:L + 1], dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train,
                      momentum=0.1, eps=1e-5):
    # Per-channel statistics over batch and length. In train mode the
    # running statistics are updated in place (EMA with the given momentum).
    if train:
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean, var = running_mean, running_var
    istd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(1, -1, 1)) * istd.reshape(1, -1, 1)
    out = gamma.reshape(1, -1, 1) * xhat + beta.reshape(1, -1, 1)
    return out, (xhat, gamma, istd, train)


def batchnorm_backward(dout, cache):
    xhat, gamma, istd, train = cache
    B, C, L = dout.shape
    n = B * L
    dgamma = (dout * xhat).sum(axis=(0, 2))
    dbeta = dout.sum(axis=(0, 2))
    dxhat = dout * gamma.reshape(1, -1, 1)
    if train:
        dx = (istd.reshape(1, -1, 1) / n) * (
            n * dxhat
            - dxhat.sum(axis=(0, 2), keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        )
    else:
        dx = dxhat * istd.reshape(1, -1, 1)
    return dx, dgamma, dbeta


def leaky_relu_forward(x, leak=0.1):
    pos = x > 0
    return np.where(pos, x, leak * x), (pos, leak)


def leaky_relu_backward(dout, cache):
    pos, leak = cache
    return np.where(pos, dout, leak * dout)


def maxpool2_forward(x):
    # Non-overlapping pooling of size 2; an odd trailing element is dropped.
    B, C, L = x.shape
    half = L // 2
    xv = x[:, :, :2 * half].reshape(B, C, half, 2)
    idx = xv.argmax(axis=3)
    out = np.take_along_axis(xv, idx[..., None], axis=3)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(dout, cache):
    idx, shape = cache
    B, C, L = shape
    half = L // 2
    dx = np.zeros(shape, dtype=dout.dtype)
    dxv = dx[:, :, :2 * half].reshape(B, C, half, 2)
    np.put_along_axis(dxv, idx[..., None], dout[..., None], axis=3)
    return dx


def dropout_forward(x, rate, rng, train):
    # Inverted dropout: kept units are scaled by 1/(1-rate) in train mode.
    if not train or rate <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype)
    keep *= 1.0 / (1.0 - rate)
    return x * keep, keep


def dropout_backward(dout, cache):
    return dout if cache is None else dout * cache


def global_avg_pool_forward(x):
    # (B, C, L) -> (B, C)
    return x.mean(axis=2), x.shape[2]


def global_avg_pool_backward(dout, length):
    return np.repeat(dout[:, :, None], length, axis=2) / length


def linear_forward(x, w, b):
    # x: (B, D), w: (M, D), b: (M,)
    return x @ w.T + b, x


def linear_backward(dout, cache, w):
    x = cache
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ w
    return dx, dw, db


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
