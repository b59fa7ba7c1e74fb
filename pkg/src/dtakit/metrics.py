"""Regression metrics for affinity prediction: CI, r_m^2, PCC, MSE.

The concordance index counts, over all pairs with distinct truth values,
full credit when predictions order the pair the same way and half credit
for prediction ties.  It is computed with a Fenwick tree over prediction
ranks (O(n log n)); the test suite cross-checks it against a brute-force
O(n^2) pair count.

r_m^2 follows the modified squared-correlation definition
r^2 * (1 - sqrt(|r^2 - r0^2|)) with r^2 the squared Pearson correlation
and r0^2 the coefficient of determination of the through-origin
regression of predictions on truth (that orientation is a documented
convention here).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoComparablePairs(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


class _Fenwick:
    def __init__(self, size):
        self.tree = np.zeros(size + 1, dtype=np.int64)

    def add(self, i):
        i += 1
        while i < self.tree.shape[0]:
            self.tree[i] += 1
            i += i & (-i)

    def prefix(self, i):
        """Count of inserted ranks <= i."""
        i += 1
        total = 0
        while i > 0:
            total += self.tree[i]
            i -= i & (-i)
        return total


def _check_lengths(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size < 2:
        raise ValueError("need at least two samples")
    return pred, truth


def concordance_index(pred, truth) -> float:
    pred, truth = _check_lengths(pred, truth)
    n = pred.size
    _, ranks = np.unique(pred, return_inverse=True)
    order = np.argsort(truth, kind="stable")
    truth_sorted = truth[order]
    ranks_sorted = ranks[order]

    group_sizes = []
    start = 0
    for i in range(1, n + 1):
        if i == n or truth_sorted[i] != truth_sorted[start]:
            group_sizes.append(i - start)
            start = i
    total = n * (n - 1) // 2 - sum(g * (g - 1) // 2 for g in group_sizes)
    if total == 0:
        raise NoComparablePairs("all truth values are equal")

    tree = _Fenwick(int(ranks.max()) + 1)
    concordant = 0
    tied = 0
    i = 0
    while i < n:
        j = i
        while j < n and truth_sorted[j] == truth_sorted[i]:
            j += 1
        for k in range(i, j):
            r = int(ranks_sorted[k])
            upto = tree.prefix(r)
            upto_prev = tree.prefix(r - 1) if r > 0 else 0
            concordant += upto_prev
            tied += upto - upto_prev
        for k in range(i, j):  # equal-truth group enters only after scoring
            tree.add(int(ranks_sorted[k]))
        i = j
    return (concordant + 0.5 * tied) / total


def pearson(pred, truth) -> float:
    pred, truth = _check_lengths(pred, truth)
    pc = pred - pred.mean()
    tc = truth - truth.mean()
    denom = np.sqrt((pc * pc).sum() * (tc * tc).sum())
    if denom == 0.0:
        raise DegenerateInput("constant input to pearson")
    return float((pc * tc).sum() / denom)


def r_m_squared(pred, truth) -> float:
    pred, truth = _check_lengths(pred, truth)
    r = pearson(pred, truth)
    r2 = r * r
    tt = (truth * truth).sum()
    if tt == 0.0:
        raise DegenerateInput("truth is identically zero")
    k = (pred * truth).sum() / tt
    resid = pred - k * truth
    pc = pred - pred.mean()
    ss_pred = (pc * pc).sum()
    if ss_pred == 0.0:
        raise DegenerateInput("constant predictions")
    r0_sq = 1.0 - (resid * resid).sum() / ss_pred
    return float(r2 * (1.0 - np.sqrt(abs(r2 - r0_sq))))


def mse(pred, truth) -> float:
    pred, truth = _check_lengths(pred, truth)
    diff = pred - truth
    return float((diff * diff).mean())


@dataclass
class MetricsReport:
    ci: float
    rm2: float
    pcc: float
    mse: float
    n: int

    @classmethod
    def compute(cls, pred, truth):
        pred = np.asarray(pred, dtype=np.float64).ravel()
        truth = np.asarray(truth, dtype=np.float64).ravel()
        return cls(ci=concordance_index(pred, truth),
                   rm2=r_m_squared(pred, truth),
                   pcc=pearson(pred, truth),
                   mse=mse(pred, truth),
                   n=int(pred.size))

    def to_text(self) -> str:
        return "\n".join([
            f"n={self.n}",
            f"ci={self.ci:.6f}",
            f"rm2={self.rm2:.6f}",
            f"pcc={self.pcc:.6f}",
            f"mse={self.mse:.6f}",
        ])

    CSV_HEADER = "n,ci,rm2,pcc,mse"

    def to_csv_row(self) -> str:
        return (f"{self.n},{self.ci:.6f},{self.rm2:.6f},"
                f"{self.pcc:.6f},{self.mse:.6f}")
