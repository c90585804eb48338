"""Rank/linear correlation, paired significance tests and k-fold splitting."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as _sps

from .rng import RngState

EXACT_WILCOXON_MAX_N = 15


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite input")
    return a, b


def midranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def plcc(a, b) -> float:
    a, b = _pair(a, b)
    if a.size < 2:
        raise ValueError("correlation needs at least two samples")
    ac, bc = a - a.mean(), b - b.mean()
    denom = math.sqrt(float((ac * ac).sum()) * float((bc * bc).sum()))
    if denom == 0:
        raise ValueError("zero variance; correlation undefined")
    return float((ac * bc).sum() / denom)


def srcc(a, b) -> float:
    """Spearman rank correlation with midranks for ties."""
    a, b = _pair(a, b)
    return plcc(midranks(a), midranks(b))


def paired_t_test(a, b) -> dict:
    """Two-sided paired t test on ``a - b``."""
    a, b = _pair(a, b)
    n = a.size
    if n < 2:
        raise ValueError("paired t test needs at least two pairs")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0:
        if d.mean() == 0:
            return {"statistic": 0.0, "p_value": 1.0, "df": n - 1}
        raise ValueError("constant non-zero differences; t statistic undefined")
    t = d.mean() / (sd / math.sqrt(n))
    p = 2.0 * _sps.t.sf(abs(t), n - 1)
    return {"statistic": float(t), "p_value": float(min(p, 1.0)), "df": n - 1}


def _exact_wilcoxon_p(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided p by enumerating every sign assignment of the (mid)ranks."""
    n = len(ranks)
    total = ranks.sum()
    mean = total / 2.0
    dist = abs(w_plus - mean)
    signs = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    sums = signs @ ranks
    hits = int(np.count_nonzero(np.abs(sums - mean) >= dist - 1e-9))
    return min(1.0, hits / 2.0**n)


def wilcoxon_signed_rank(a, b, method: str = "auto") -> dict:
    """Two-sided Wilcoxon signed-rank test on ``a - b``; zero differences are dropped.

    ``method="auto"`` enumerates exactly for ``n <= 15`` non-zero pairs and
    otherwise uses a normal approximation with tie and continuity corrections;
    ``"exact"`` and ``"normal"`` force one path.
    """
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    a, b = _pair(a, b)
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise ValueError("all paired differences are zero")
    if n < 5:
        raise ValueError(f"need at least 5 non-zero differences, got {n}")
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if method == "exact" or (method == "auto" and n <= EXACT_WILCOXON_MAX_N):
        p = _exact_wilcoxon_p(ranks, w_plus)
        method = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, counts = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float((counts**3 - counts).sum()) / 48.0
        z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * _sps.norm.sf(max(z, 0.0)))
        method = "normal"
    return {"statistic": min(w_plus, w_minus), "w_plus": w_plus, "p_value": float(p), "n": n, "method": method}


def kfold_split(ids, k: int, seed: int = 0, test_ids=None) -> list[tuple[list, list]]:
    """``k`` (train, test) folds over a seeded permutation of ``ids``.

    Fold sizes differ by at most one. With ``test_ids`` (cross-dataset mode)
    fold ``f`` trains on ``ids`` minus its held-out slice and always tests on
    the full ``test_ids`` list.
    """
    ids = list(ids)
    if k < 2 or k > len(ids):
        raise ValueError(f"k must lie in [2, {len(ids)}], got {k}")
    order = RngState(seed).permutation(len(ids))
    folds = [[ids[i] for i in part] for part in np.array_split(order, k)]
    out = []
    for test in folds:
        held = set(test)
        train = [i for i in ids if i not in held]
        out.append((train, list(test) if test_ids is None else list(test_ids)))
    return out
