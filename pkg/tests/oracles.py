"""Plain numpy/loop reference implementations used as independent oracles."""

import itertools
import math

import numpy as np


def naive_conv(x, w, b, stride, pad):
    """Direct nested-loop cross-correlation over any number of spatial axes."""
    nd = x.ndim - 2
    xp = np.pad(x, [(0, 0), (0, 0)] + [(p, p) for p in pad])
    k = w.shape[2:]
    out_sp = [(xp.shape[2 + i] - k[i]) // stride[i] + 1 for i in range(nd)]
    out = np.zeros((x.shape[0], w.shape[0], *out_sp))
    for bi in range(x.shape[0]):
        for o in range(w.shape[0]):
            for pos in itertools.product(*(range(n) for n in out_sp)):
                acc = 0.0 if b is None else b[o]
                for c in range(x.shape[1]):
                    for off in itertools.product(*(range(kk) for kk in k)):
                        idx = tuple(p * s + q for p, s, q in zip(pos, stride, off))
                        acc += xp[(bi, c) + idx] * w[(o, c) + off]
                out[(bi, o) + pos] = acc
    return out


def conv_same(x, w, b):
    return naive_conv(x, w, b, (1,) * (x.ndim - 2), tuple(k // 2 for k in w.shape[2:]))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def relu(x):
    return np.maximum(x, 0.0)


def max_pool_122(x):
    """Max over non-overlapping 1x2x2 windows of [B,C,T,H,W]."""
    B, C, T, H, W = x.shape
    return x.reshape(B, C, T, H // 2, 2, W // 2, 2).max(axis=(4, 6))


def interp_1d(x, axis, n_out):
    """Linear interpolation along one axis, half-pixel centres, clamped borders."""
    n_in = x.shape[axis]
    x = np.moveaxis(x, axis, -1)
    out = np.empty(x.shape[:-1] + (n_out,))
    for i in range(n_out):
        src = min(max((i + 0.5) * n_in / n_out - 0.5, 0.0), n_in - 1)
        lo = int(math.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        out[..., i] = (1 - frac) * x[..., lo] + frac * x[..., hi]
    return np.moveaxis(out, -1, axis)


def trilinear(x, size):
    for axis, n in zip((2, 3, 4), size):
        x = interp_1d(x, axis, n)
    return x


def pearson(a, b):
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    am, bm = a - a.mean(), b - b.mean()
    return float((am * bm).sum() / math.sqrt((am * am).sum() * (bm * bm).sum()))


def auc_judd_bruteforce(m, fix):
    """Enumerate every fixated value as a threshold and integrate the ROC with loops."""
    m, fix = np.asarray(m, float).ravel(), np.asarray(fix).ravel() > 0
    fixated = [v for v, f in zip(m, fix) if f]
    others = [v for v, f in zip(m, fix) if not f]
    points = [(0.0, 0.0)]
    for thr in sorted(set(fixated), reverse=True):
        tpr = sum(v >= thr for v in fixated) / len(fixated)
        fpr = sum(v >= thr for v in others) / len(others)
        points.append((fpr, tpr))
    points.append((1.0, 1.0))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


def nss_bruteforce(m, fix):
    vals = list(np.asarray(m, float).ravel())
    mu = sum(vals) / len(vals)
    sd = math.sqrt(sum((v - mu) ** 2 for v in vals) / len(vals))
    picked = [(v - mu) / sd for v, f in zip(vals, np.asarray(fix).ravel()) if f]
    return sum(picked) / len(picked)


def ranks_bruteforce(x):
    """Rank = 1 + #smaller + (#equal - 1) / 2, straight from the definition."""
    return [1 + sum(y < v for y in x) + (sum(y == v for y in x) - 1) / 2 for v in x]


def t_two_sided_bruteforce(t, df, steps=20_000):
    """1 - 2 * integral_0^|t| of the Student-t density, by composite Simpson."""
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    pdf = lambda x: c * (1 + x * x / df) ** (-(df + 1) / 2)  # noqa: E731
    h = abs(t) / steps
    acc = pdf(0) + pdf(abs(t))
    for i in range(1, steps):
        acc += (4 if i % 2 else 2) * pdf(i * h)
    return 1 - 2 * acc * h / 3


def wilcoxon_bruteforce(d):
    """Two-sided exact p over all 2^n sign flips of the midranked |d|."""
    d = [v for v in d if v != 0]
    r = ranks_bruteforce([abs(v) for v in d])
    w = sum(ri for ri, v in zip(r, d) if v > 0)
    centre = sum(r) / 2
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        s = sum(ri for ri, si in zip(r, signs) if si)
        hits += abs(s - centre) >= abs(w - centre) - 1e-9
    return hits / 2 ** len(d)


def t_two_sided_series(t, df):
    """Two-sided Student-t p-value from the finite trigonometric series for integer df."""
    theta = math.atan(abs(t) / math.sqrt(df))
    s, c = math.sin(theta), math.cos(theta)
    if df % 2:
        total, term = 0.0, c
        if df > 1:
            total = term
            for k in range(3, df - 1, 2):
                term *= (k - 1) / k * c * c
                total += term
        a = 2 / math.pi * (theta + s * total)
    else:
        total, term = 1.0, 1.0
        for k in range(2, df - 1, 2):
            term *= (k - 1) / k * c * c
            total += term
        a = s * total
    return 1 - a
