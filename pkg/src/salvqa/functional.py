"""Differentiable array operations built on :class:`~salvqa.tensor.Tensor`.

Convolutions are cross-correlations (no kernel flip) over the trailing 2 or 3
axes of a channels-first batch. Pooling and interpolation act on trailing
spatial axes; interpolation and adaptive pooling are separable linear maps
applied one axis at a time.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, is_grad_enabled

# im2col copies are processed in slices of at most this many bytes
_COL_BUDGET = 64 * 2**20


def _tuple(v, n: int) -> tuple:
    if isinstance(v, int):
        return (v,) * n
    v = tuple(int(x) for x in v)
    if len(v) != n:
        raise ValueError(f"expected {n} values, got {v}")
    return v


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _conv_windows(xp: np.ndarray, k: tuple, stride: tuple) -> np.ndarray:
    nd = len(k)
    win = sliding_window_view(xp, k, axis=tuple(range(2, 2 + nd)))
    return win[(slice(None), slice(None)) + tuple(slice(None, None, s) for s in stride)]


def _im2col(win: np.ndarray) -> np.ndarray:
    """``win[B,C,*out,*k]`` -> contiguous ``[B*prod(out), prod(k)*C]``."""
    nd = (win.ndim - 2) // 2
    order = (0,) + tuple(range(2, 2 + nd)) + tuple(range(2 + nd, 2 + 2 * nd)) + (1,)
    rows = win.shape[0] * int(np.prod(win.shape[2:2 + nd]))
    return np.ascontiguousarray(win.transpose(order)).reshape(rows, -1)


def _conv(x: Tensor, weight: Tensor, bias: Tensor | None, stride, padding, nd: int, name: str) -> Tensor:
    if x.ndim != nd + 2 or weight.ndim != nd + 2:
        raise ValueError(f"{name}: expected {nd + 2}-D input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"{name}: input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ValueError(f"{name}: bias shape {bias.shape} != ({weight.shape[0]},)")
    stride = _tuple(stride, nd)
    padding = _tuple(padding, nd)
    k = weight.shape[2:]
    padded = tuple(s + 2 * p for s, p in zip(x.shape[2:], padding))
    if any(kk > s for kk, s in zip(k, padded)):
        raise ValueError(f"{name}: kernel {k} larger than padded input {padded}")

    xd, wd = x.data, weight.data
    B, C = xd.shape[:2]
    O = wd.shape[0]
    xp = np.pad(xd, [(0, 0), (0, 0)] + [(p, p) for p in padding]) if any(padding) else xd
    win = _conv_windows(xp, k, stride)
    out_sp = win.shape[2:2 + nd]
    w_mat = np.moveaxis(wd, 1, -1).reshape(O, -1)  # [O, *k, C] flattened
    tracked = is_grad_enabled() and (x.requires_grad or weight.requires_grad or (bias is not None and bias.requires_grad))

    if tracked:
        cols = _im2col(win)
        out = cols @ w_mat.T
    else:
        # chunk along the first output axis to bound the im2col copy
        cols = None
        row_bytes = B * C * int(np.prod(win.shape[3:])) * 8
        step = max(1, _COL_BUDGET // max(row_bytes, 1))
        out = np.concatenate(
            [_im2col(win[:, :, i:i + step]).reshape(B, -1, C * math.prod(k)) @ w_mat.T
             for i in range(0, out_sp[0], step)],
            axis=1,
        ).reshape(-1, O)
    if bias is not None:
        out = out + bias.data
    out = np.moveaxis(out.reshape((B,) + out_sp + (O,)), -1, 1)

    def backward(g):
        g_mat = np.moveaxis(g, 1, -1).reshape(-1, O)
        g_w = None
        if weight.requires_grad:
            g_w = np.moveaxis((g_mat.T @ cols).reshape((O,) + k + (C,)), -1, 1)
        g_b = g_mat.sum(axis=0) if bias is not None and bias.requires_grad else None
        g_x = None
        if x.requires_grad:
            g_cols = (g_mat @ w_mat).reshape((B,) + out_sp + k + (C,))
            g_xp = np.zeros((B,) + xp.shape[2:] + (C,))  # channels-last accumulator
            for off in itertools.product(*(range(kk) for kk in k)):
                region = tuple(slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(off, stride, out_sp))
                g_xp[(slice(None),) + region] += g_cols[(slice(None),) * (1 + nd) + off]
            crop = tuple(slice(p, p + s) for p, s in zip(padding, xd.shape[2:]))
            g_x = np.moveaxis(g_xp[(slice(None),) + crop], -1, 1)
        return g_x, g_w, g_b

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, lambda g: backward(g)[: len(parents)], name)


def conv3d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """Cross-correlate ``x[B,C,T,H,W]`` with ``weight[O,C,kt,kh,kw]``."""
    return _conv(x, weight, bias, stride, padding, 3, "conv3d")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """Cross-correlate ``x[B,C,H,W]`` with ``weight[O,C,kh,kw]``."""
    return _conv(x, weight, bias, stride, padding, 2, "conv2d")


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def _pool_setup(x: Tensor, window, stride, name: str):
    window = tuple(int(w) for w in window)
    nd = len(window)
    stride = window if stride is None else _tuple(stride, nd)
    if any(w < 1 for w in window):
        raise ValueError(f"{name}: empty window {window}")
    extents = x.shape[-nd:]
    if any(w > e for w, e in zip(window, extents)):
        raise ValueError(f"{name}: window {window} exceeds extents {extents}")
    axes = tuple(range(x.ndim - nd, x.ndim))
    win = sliding_window_view(x.data, window, axis=axes)
    win = win[(Ellipsis,) + tuple(slice(None, None, s) for s in stride) + (slice(None),) * nd]
    return window, stride, nd, win


def _scatter_windows(shape, window, stride, out_sp, piece_fn) -> np.ndarray:
    nd = len(window)
    g_x = np.zeros(shape)
    for j, off in enumerate(itertools.product(*(range(w) for w in window))):
        region = tuple(slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(off, stride, out_sp))
        g_x[(Ellipsis,) + region] += piece_fn(j, off)
    return g_x


def max_pool(x: Tensor, window: Sequence[int], stride=None) -> Tensor:
    window, stride, nd, win = _pool_setup(x, window, stride, "max_pool")
    flat = win.reshape(win.shape[: x.ndim] + (-1,))
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    shape = x.shape

    def backward(g):
        return (_scatter_windows(shape, window, stride, out.shape[-nd:], lambda j, off: g * (arg == j)),)

    return Tensor._from_op(out, (x,), backward, "max_pool")


def avg_pool(x: Tensor, window: Sequence[int], stride=None) -> Tensor:
    window, stride, nd, win = _pool_setup(x, window, stride, "avg_pool")
    out = win.mean(axis=tuple(range(x.ndim, x.ndim + nd)))
    shape = x.shape
    scale = 1.0 / math.prod(window)

    def backward(g):
        return (_scatter_windows(shape, window, stride, out.shape[-nd:], lambda j, off: g * scale),)

    return Tensor._from_op(out, (x,), backward, "avg_pool")


def global_avg_pool(x: Tensor, nd: int = 2) -> Tensor:
    """Mean over the trailing ``nd`` axes, kept as size-1 axes."""
    return x.mean(axis=tuple(range(x.ndim - nd, x.ndim)), keepdims=True)


@lru_cache(maxsize=256)
def _adaptive_matrix(n_in: int, n_out: int) -> np.ndarray:
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        start = (i * n_in) // n_out
        stop = -((-(i + 1) * n_in) // n_out)
        m[i, start:stop] = 1.0 / (stop - start)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=256)
def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Linear interpolation weights, half-pixel centres (align_corners=False)."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = max((i + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(math.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        m[i, i0] += 1.0 - lam
        m[i, i1] += lam
    m.flags.writeable = False
    return m


def axis_linear(x: Tensor, matrix: np.ndarray, axis: int) -> Tensor:
    """Apply ``matrix[out, in]`` along one axis of ``x``."""
    axis %= x.ndim
    if matrix.shape[1] != x.shape[axis]:
        raise ValueError(f"matrix expects extent {matrix.shape[1]}, axis {axis} has {x.shape[axis]}")
    if matrix.shape[0] == matrix.shape[1] and np.array_equal(matrix, np.eye(matrix.shape[0])):
        return x
    out = np.moveaxis(np.tensordot(matrix, x.data, axes=([1], [axis])), 0, axis)

    def backward(g):
        return (np.moveaxis(np.tensordot(matrix.T, g, axes=([1], [axis])), 0, axis),)

    return Tensor._from_op(out, (x,), backward, "axis_linear")


def _separable(x: Tensor, target: Sequence[int], builder) -> Tensor:
    target = tuple(int(t) for t in target)
    if any(t < 1 for t in target):
        raise ValueError(f"target extents must be positive, got {target}")
    nd = len(target)
    for i, t in enumerate(target):
        axis = x.ndim - nd + i
        x = axis_linear(x, builder(x.shape[axis], t), axis)
    return x


def adaptive_avg_pool(x: Tensor, target: Sequence[int]) -> Tensor:
    """Average over near-equal buckets so the trailing axes become ``target``."""
    return _separable(x, target, _adaptive_matrix)


def resize_bilinear(x: Tensor, target: Sequence[int]) -> Tensor:
    return _separable(x, _tuple(target, 2), _interp_matrix)


def upsample_trilinear(x: Tensor, target: Sequence[int]) -> Tensor:
    return _separable(x, _tuple(target, 3), _interp_matrix)


def pool(x: Tensor, kind: str, window=None, stride=None, target=None, nd: int = 2) -> Tensor:
    if kind == "max":
        return max_pool(x, window, stride)
    if kind == "avg":
        return avg_pool(x, window, stride)
    if kind == "global_avg":
        return global_avg_pool(x, nd)
    if kind == "adaptive_avg":
        return adaptive_avg_pool(x, target)
    raise ValueError(f"unknown pool kind {kind!r}")


# ---------------------------------------------------------------------------
# elementwise, normalisation, shape
# ---------------------------------------------------------------------------

def sigmoid(x: Tensor) -> Tensor:
    return as_tensor(x).sigmoid()


def relu(x: Tensor) -> Tensor:
    return as_tensor(x).relu()


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ndim = tensors[0].ndim
    if not -ndim <= axis < ndim:
        raise IndexError(f"axis {axis} out of range for {ndim}-D tensors")
    axis %= ndim
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != axis):
            raise ValueError(f"concat: shapes {ref} and {t.shape} differ off axis {axis}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward, "concat"
    )


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    a = x.data
    e = np.exp(a - a.max(axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(y, (x,), backward, "softmax")


def layernorm(x: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalise to zero mean and unit population variance along ``axis``."""
    if not -x.ndim <= axis < x.ndim:
        raise IndexError(f"axis {axis} out of range for {x.ndim}-D tensor")
    centred = x - x.mean(axis=axis, keepdims=True)
    var = (centred * centred).mean(axis=axis, keepdims=True)
    return centred / (var + eps).sqrt()


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight[out, in]``."""
    y = x @ weight.transpose()
    return y if bias is None else y + bias


def pad(x: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    widths = [(0, 0)] * (x.ndim - len(widths)) + [tuple(w) for w in widths]
    crop = tuple(slice(lo, lo + s) for (lo, _), s in zip(widths, x.shape))
    return Tensor._from_op(np.pad(x.data, widths), (x,), lambda g: (g[crop],), "pad")


__all__ = [
    "adaptive_avg_pool",
    "avg_pool",
    "axis_linear",
    "concat",
    "conv2d",
    "conv3d",
    "global_avg_pool",
    "layernorm",
    "linear",
    "max_pool",
    "pad",
    "pool",
    "relu",
    "resize_bilinear",
    "sigmoid",
    "softmax",
    "upsample_trilinear",
]
