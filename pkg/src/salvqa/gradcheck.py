"""Central finite-difference checks against reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import NonFiniteError, Tensor, no_grad


def numerical_grad(f: Callable[[], Tensor], param: Tensor, eps: float = 1e-5) -> np.ndarray:
    flat = param.data.reshape(-1)
    out = np.zeros(flat.size)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f().item()
            flat[i] = orig - eps
            f_minus = f().item()
            flat[i] = orig
            out[i] = (f_plus - f_minus) / (2.0 * eps)
    return out.reshape(param.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-7) -> float:
    """``|a - n| / max(|a|, |n|, atol)`` in the Euclidean norm."""
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), atol)
    return float(diff / scale)


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    atol: float = 1e-7,
) -> float:
    """Worst relative error between backprop and finite differences.

    ``f`` is called with no arguments and must read ``params`` (which are
    perturbed in place) and return a scalar tensor.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    for p in params:
        p.grad = None
    out = f()
    if out.size != 1:
        raise ValueError(f"grad_check needs a scalar function, got shape {out.shape}")
    if not np.isfinite(out.data).all():
        raise NonFiniteError("grad_check: non-finite function value")
    out.backward()
    worst = 0.0
    for p in params:
        analytic = np.zeros(p.shape) if p.grad is None else p.grad
        numeric = numerical_grad(f, p, eps)
        worst = max(worst, relative_error(analytic, numeric, atol))
    for p in params:
        p.grad = None
    return worst
