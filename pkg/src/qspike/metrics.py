"""Confusion-matrix metrics and the two-sided paired Wilcoxon signed-rank
test.

Metrics are one-vs-rest per class, macro-averaged by default (micro
available). Ratios with empty denominators are defined as 0 so reports
never carry missing cells. The Wilcoxon test drops zero differences,
averages tied ranks, uses W = min(W+, W-), and switches from exact
enumeration to a tie-corrected normal approximation above EXACT_LIMIT
effective pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_LIMIT = 20


def confusion(preds, truth, n_classes: int) -> np.ndarray:
    """Counts[t, p]: rows are true class, columns predicted class."""
    p = np.asarray(preds, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"preds {p.shape} and truth {t.shape} must be equal 1-d")
    for name, arr in (("preds", p), ("truth", t)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} contain labels outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass(frozen=True)
class MetricBundle:
    acc: float
    dsc: float
    ppv: float
    ss: float


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def bundle(cm: np.ndarray, average: str = "macro") -> MetricBundle:
    """ACC, DSC, PPV, SS from a confusion matrix."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {cm.shape}")
    if np.any(cm < 0):
        raise ValueError("confusion matrix entries must be nonnegative")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    if average not in ("macro", "micro"):
        raise ValueError("average must be 'macro' or 'micro'")
    tp = np.diagonal(cm).astype(np.float64)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    tn = total - tp - fn - fp
    if average == "micro":
        tp, fp, fn, tn = tp.sum(), fp.sum(), fn.sum(), tn.sum()
        return MetricBundle(
            acc=_ratio(tp + tn, tp + tn + fp + fn),
            dsc=_ratio(2 * tp, 2 * tp + fp + fn),
            ppv=_ratio(tp, tp + fp),
            ss=_ratio(tp, tp + fn),
        )
    per = {
        "acc": [_ratio(tp[c] + tn[c], total) for c in range(cm.shape[0])],
        "dsc": [_ratio(2 * tp[c], 2 * tp[c] + fp[c] + fn[c]) for c in range(cm.shape[0])],
        "ppv": [_ratio(tp[c], tp[c] + fp[c]) for c in range(cm.shape[0])],
        "ss": [_ratio(tp[c], tp[c] + fn[c]) for c in range(cm.shape[0])],
    }
    return MetricBundle(**{k: float(np.mean(v)) for k, v in per.items()})


def _rankdata_average(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties given their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    p_value: float
    n_effective: int


def _exact_p(ranks: np.ndarray, w_obs: float) -> float:
    """P(min(S+, S-) <= w_obs) over all 2^n equiprobable sign assignments,
    by dynamic programming on doubled ranks (halves from ties become ints)."""
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total2 = int(r2.sum())
    counts = np.zeros(total2 + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        counts[r:] += counts[:counts.size - r].copy()
    w2 = int(math.floor(2.0 * w_obs + 1e-9))
    low = counts[:w2 + 1].sum()
    high = counts[max(total2 - w2, 0):].sum()
    overlap = 0.0
    if total2 - w2 <= w2:
        overlap = counts[total2 - w2:w2 + 1].sum()
    return float((low + high - overlap) / 2.0 ** len(ranks))


def _normal_p(ranks: np.ndarray, w_obs: float, n: int) -> float:
    """Tie-corrected normal approximation with continuity correction."""
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w_obs + 0.5 - mean) / math.sqrt(var)
    phi = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return min(1.0, 2.0 * phi)


def wilcoxon(x, y) -> WilcoxonResult:
    """Two-sided paired signed-rank test of x against y."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1 or xa.size < 1:
        raise ValueError("x and y must be equal-length 1-d samples")
    d = xa - ya
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return WilcoxonResult(w_statistic=0.0, p_value=1.0, n_effective=0)
    ranks = _rankdata_average(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= EXACT_LIMIT:
        p = _exact_p(ranks, w)
    else:
        p = _normal_p(ranks, w, n)
    return WilcoxonResult(w_statistic=w, p_value=p, n_effective=n)
