"""Edge recovery by exact one-dimensional two-cluster splitting.

The estimated off-diagonal entries are split into two clusters by the
optimal 1-D two-means partition (sorted scan over all contiguous split
points, no iterative refinement, no initialization ambiguity). The
smaller-mean cluster is labeled non-interacting. Label assignment is
invariant under positive affine maps of the values, so the reporting
scale never affects recovery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tomography import TomographyResult

DEGENERATE_SPAN = 1e-12


@dataclass(frozen=True)
class ClusterOutcome:
    """Binary labels (1 = interacting), cluster means, and the realized threshold.

    Every value strictly above ``split_value`` is labeled 1, every value at
    or below it 0; ``centroids`` is (low mean, high mean).
    """

    labels: np.ndarray
    centroids: tuple[float, float]
    split_value: float


@dataclass(frozen=True)
class EdgeMetrics:
    false_detections: int
    misses: int
    error_rate: float


def two_means_1d(values) -> ClusterOutcome:
    """Optimal two-cluster split of scalars by within-cluster sum of squares.

    Scans all n-1 contiguous split points of the sorted values; ties are
    broken toward the smaller interacting cluster. An all-equal input
    (span below 1e-12) carries no separation evidence and is labeled
    entirely non-interacting.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if n < 2:
        raise ValueError("need at least 2 values to split")
    if float(v.max() - v.min()) < DEGENERATE_SPAN:
        m = float(v.mean())
        return ClusterOutcome(
            labels=np.zeros(n, dtype=np.int8), centroids=(m, m), split_value=float(v.max())
        )
    s = np.sort(v, kind="stable")
    prefix = np.concatenate(([0.0], np.cumsum(s)))
    prefix2 = np.concatenate(([0.0], np.cumsum(s * s)))
    k = np.arange(1, n)
    low = prefix2[k] - prefix[k] ** 2 / k
    high = (prefix2[n] - prefix2[k]) - (prefix[n] - prefix[k]) ** 2 / (n - k)
    wcss = low + high
    # reversed argmin picks the largest k among ties (fewer label-1 values)
    best = n - 1 - int(np.argmin(wcss[::-1]))
    split_value = (s[best - 1] + s[best]) / 2.0
    labels = (v > split_value).astype(np.int8)
    return ClusterOutcome(
        labels=labels,
        centroids=(float(v[labels == 0].mean()), float(v[labels == 1].mean())),
        split_value=float(split_value),
    )


def classify_edges(result: TomographyResult) -> tuple[np.ndarray, ClusterOutcome]:
    """Cluster the off-diagonal estimated entries and map labels to a 0/1 block.

    The returned matrix carries a unit diagonal; entry order inside the
    clustering is column-major, matching the scatter export.
    """
    k = result.k
    if k < 2:
        raise ValueError("need at least 2 observed agents")
    off_flat = ~np.eye(k, dtype=bool).flatten(order="F")
    values = result.a_hat_obs.flatten(order="F")[off_flat]
    outcome = two_means_1d(values)
    g_flat = np.eye(k, dtype=np.int8).flatten(order="F")
    g_flat[off_flat] = outcome.labels
    g_hat = g_flat.reshape((k, k), order="F")
    return g_hat, outcome


def threshold_edges(a_hat_obs: np.ndarray, threshold: float) -> np.ndarray:
    """Alternative recovery when a decision threshold is known a priori."""
    a_hat_obs = np.asarray(a_hat_obs, dtype=np.float64)
    g_hat = (a_hat_obs > threshold).astype(np.int8)
    np.fill_diagonal(g_hat, 1)
    return g_hat


def edge_metrics(g_hat: np.ndarray, g_true: np.ndarray) -> EdgeMetrics:
    """Off-diagonal disagreement counts, split by direction."""
    g_hat = np.asarray(g_hat)
    g_true = np.asarray(g_true)
    if g_hat.shape != g_true.shape:
        raise ValueError("label matrices must share a shape")
    for g in (g_hat, g_true):
        if not np.all((g == 0) | (g == 1)):
            raise ValueError("label matrices must be binary")
        if not np.all(np.diag(g) == 1):
            raise ValueError("label matrices must carry unit diagonals")
    k = g_hat.shape[0]
    off = ~np.eye(k, dtype=bool)
    false_det = int(np.count_nonzero((g_hat == 1) & (g_true == 0) & off))
    misses = int(np.count_nonzero((g_hat == 0) & (g_true == 1) & off))
    return EdgeMetrics(
        false_detections=false_det,
        misses=misses,
        error_rate=(false_det + misses) / (k * (k - 1)),
    )
