"""Clustering evaluation: NMI, novelty, clustering quality and cost."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.metrics import normalized_mutual_info_score

from .kernels import gaussian_kernel, hsic, normalize_kernel


@dataclass
class MetricsReport:
    nmi_vs_truth: Optional[float]
    novelty: Optional[float]
    clustering_quality: float
    objective_cost: float
    wall_time_s: float
    iterations: int
    clustering_quality_hsic: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


def nmi(a, b) -> float:
    """I(a, b) / sqrt(H(a) H(b)), natural log.

    Zero-entropy partitions give 0, except two single-cluster partitions,
    which are identical and give 1.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors must be 1-D of equal length, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise ValueError("label vectors must be non-empty")
    # canonical labels and argument order make the score bitwise invariant
    # under relabeling and swapping
    ca, cb = _canonical(a), _canonical(b)
    if tuple(cb) < tuple(ca):
        ca, cb = cb, ca
    val = normalized_mutual_info_score(ca, cb, average_method="geometric")
    return float(min(1.0, max(0.0, val)))


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Relabel by order of first appearance."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty_like(first)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse]


def indicator_embedding(labels, k: Optional[int] = None) -> np.ndarray:
    """Column-normalized cluster indicator, so that U^T U = I on non-empty clusters."""
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if k is None else k
    Y = np.zeros((labels.size, k))
    Y[np.arange(labels.size), labels] = 1.0
    counts = Y.sum(axis=0)
    counts[counts == 0] = 1.0
    return Y / np.sqrt(counts)


def clustering_quality(X, W, sigma: float, labels, k: Optional[int] = None,
                       scaling: str = "trace") -> float:
    """HSIC between the projected data kernel (degree-normalized) and the
    final partition.

    ``scaling="trace"`` reports Tr(D^{-1/2} K D^{-1/2} U U^T) for the
    column-normalized indicator U of ``labels``: for k perfectly separated
    clusters this approaches k. ``scaling="hsic"`` is the centered estimator
    with the 1/(n-1)^2 factor.
    """
    Kn = normalize_kernel(gaussian_kernel(X, W, sigma))
    U = indicator_embedding(labels, k)
    if scaling == "trace":
        return float(np.sum(Kn * (U @ U.T)))
    if scaling == "hsic":
        return hsic(Kn, U @ U.T)
    raise ValueError(f"unknown scaling {scaling!r}")
