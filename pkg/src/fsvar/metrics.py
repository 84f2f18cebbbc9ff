"""Simulation-study metrics: permutation-matched accuracy, Frobenius error."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

MAX_K = 6  # K! enumeration bound


@dataclass
class BenchmarkRecord:
    N: int
    method: str
    replication: int
    state_accuracy: float | None
    frob_sq_error: list[float] | None  # per true regime; None = missing
    runtime_ms: float | None


def state_accuracy(est, truth, K: int):
    """Fraction of correctly classified time points, maximized over label
    permutations of the estimate.

    Returns (accuracy, perm) where perm[k-1] is the true label assigned to
    estimated label k; apply the same permutation to align per-regime
    coefficient estimates with the ground truth.
    """
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {truth.shape}")
    if K > MAX_K:
        raise ValueError(f"K={K} exceeds the K! enumeration bound {MAX_K}")
    # hits[a, b] = count of (est == a+1) & (truth == b+1)
    hits = np.zeros((K, K))
    for a in range(K):
        mask = est == a + 1
        for b in range(K):
            hits[a, b] = np.count_nonzero(mask & (truth == b + 1))
    best_acc = -1.0
    best_perm = None
    for perm in permutations(range(1, K + 1)):
        acc = sum(hits[a, perm[a] - 1] for a in range(K)) / est.size
        if acc > best_acc:
            best_acc = acc
            best_perm = perm
    return float(best_acc), best_perm


def frob_error(est: np.ndarray, truth: np.ndarray) -> float:
    """Total squared entrywise error ||est - truth||_F^2."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    return float(np.sum((est - truth) ** 2))


def aligned_frob_errors(est_mats, truth_mats, perm) -> list[float]:
    """Per-true-regime squared errors after applying the label permutation
    from state_accuracy (est regime k explains true regime perm[k-1])."""
    K = len(truth_mats)
    out = [0.0] * K
    for k in range(K):
        out[perm[k] - 1] = frob_error(est_mats[k], truth_mats[perm[k] - 1])
    return out
