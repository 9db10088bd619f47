"""Forward and backward passes for the few layer types the network needs.

Activations are laid out as ``(batch, length, channels)`` for the
convolutional part and ``(batch, features)`` after flattening.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def same_padding(kernel_size):
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def conv1d_forward(x, weight, bias):
    """Stride-1 'same' convolution. ``weight`` has shape (kernel, in, out)."""
    batch, length, in_ch = x.shape
    kernel = weight.shape[0]
    left, right = same_padding(kernel)
    padded = np.pad(x, ((0, 0), (left, right), (0, 0)))
    # (B, L, C, k) -> (B*L, k*C), matching weight.reshape(k*C, out)
    cols = sliding_window_view(padded, kernel, axis=1).transpose(0, 1, 3, 2)
    cols = cols.reshape(batch * length, kernel * in_ch)
    out = cols @ weight.reshape(kernel * in_ch, -1) + bias
    return out.reshape(batch, length, -1), cols


def conv1d_backward(dout, cols, weight, input_shape):
    batch, length, in_ch = input_shape
    kernel = weight.shape[0]
    flat = dout.reshape(batch * length, -1)
    dweight = (cols.T @ flat).reshape(weight.shape)
    dbias = flat.sum(axis=0)
    dcols = (flat @ weight.reshape(kernel * in_ch, -1).T).reshape(batch, length, kernel, in_ch)
    left, _ = same_padding(kernel)
    dpadded = np.zeros((batch, length + kernel - 1, in_ch))
    for j in range(kernel):
        dpadded[:, j : j + length] += dcols[:, :, j]
    return dpadded[:, left : left + length], dweight, dbias


def maxpool_forward(x, pool):
    """Non-overlapping max pooling along the length axis; a ragged tail is dropped."""
    batch, length, ch = x.shape
    out_len = length // pool
    windows = x[:, : out_len * pool].reshape(batch, out_len, pool, ch)
    argmax = windows.argmax(axis=2)[:, :, None, :]
    out = np.take_along_axis(windows, argmax, axis=2)[:, :, 0, :]
    return out, argmax


def maxpool_backward(dout, argmax, input_shape, pool):
    batch, length, ch = input_shape
    out_len = dout.shape[1]
    dwindows = np.zeros((batch, out_len, pool, ch))
    np.put_along_axis(dwindows, argmax, dout[:, :, None, :], axis=2)
    dx = np.zeros(input_shape)
    dx[:, : out_len * pool] = dwindows.reshape(batch, out_len * pool, ch)
    return dx


def dense_forward(x, weight, bias):
    return x @ weight + bias


def dense_backward(dout, x, weight):
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


def relu(z):
    return np.maximum(z, 0.0)


def dropout_mask(shape, rate, rng):
    """Inverted-dropout mask: kept units are scaled by ``1 / (1 - rate)``."""
    if rate <= 0.0:
        return None
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def glorot_uniform(shape, fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
