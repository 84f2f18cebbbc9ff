"""Benchmark method: sliding-window ridge TV-VAR + K-means with L1 distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tsdata import Dataset, valid_lag_rows


@dataclass
class TvVarResult:
    window: int
    shift: int
    ridge: float
    order: int
    centers: np.ndarray  # (n_windows,) 1-based center time index
    coeffs: np.ndarray  # (n_windows, N*P*N) vectorized per-window coefficients
    n_channels: int

    def coeff_matrices(self, w: int) -> np.ndarray:
        """Window w's coefficients as (P, N, N), column -> row direction."""
        return unvec_coeffs(self.coeffs[w], self.n_channels, self.order)


@dataclass
class KMeansResult:
    K: int
    labels: np.ndarray  # (n_points,) in 1..K
    centroids: np.ndarray  # (K, dim)
    inertia: float
    expanded_labels: np.ndarray | None = None  # (T,) in 1..K


def unvec_coeffs(vec: np.ndarray, N: int, P: int) -> np.ndarray:
    """Invert the TV-VAR vectorization back to (P, N, N) lag matrices."""
    B = vec.reshape(N * P, N)
    return np.stack([B[l * N : (l + 1) * N, :].T for l in range(P)])


def sliding_ridge_tvvar(
    d: Dataset, window: int = 30, shift: int = 1, ridge: float = 0.1, P: int = 1
) -> TvVarResult:
    """Ridge-regularized VAR(P) on each sliding window.

    Each window is centered (its own column means removed), the lagged
    design matrix is built inside the window (rows straddling concatenation
    joins are dropped), and (X'X + ridge*I) B = X'Y is solved. No intercept.
    """
    T, N = d.values.shape
    if window > T:
        raise ValueError(f"window {window} longer than series T={T}")
    if window <= P:
        raise ValueError("window must exceed the VAR order")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    good = np.zeros(T, dtype=bool)
    good[valid_lag_rows(T, P, d.segment_boundaries)] = True
    starts = range(0, T - window + 1, shift)
    centers = []
    coeffs = []
    for s in starts:
        seg = d.values[s : s + window] - d.values[s : s + window].mean(axis=0)
        rows = np.flatnonzero(good[s + P : s + window]) + P  # window-local target rows
        X = np.hstack([seg[rows - l] for l in range(1, P + 1)])
        Y = seg[rows]
        G = X.T @ X + ridge * np.eye(N * P)
        try:
            B = np.linalg.solve(G, X.T @ Y)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                f"singular window design at start t={s + 1}; increase ridge"
            ) from None
        centers.append(s + window // 2 + 1)  # 1-based center
        coeffs.append(B.ravel())
    return TvVarResult(
        window=window,
        shift=shift,
        ridge=ridge,
        order=P,
        centers=np.asarray(centers, dtype=np.int64),
        coeffs=np.asarray(coeffs),
        n_channels=N,
    )


def _l1_dists(X: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.abs(X - c[None, :]).sum(axis=1)


def _seed_centroids(X: np.ndarray, K: int, rng) -> np.ndarray:
    """k-means++-style seeding under L1: next seed drawn with probability
    proportional to distance from the nearest already-chosen seed."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    dist = _l1_dists(X, X[chosen[0]])
    for _ in range(1, K):
        total = dist.sum()
        if total <= 0:  # all points identical to a seed
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=dist / total))
        chosen.append(idx)
        dist = np.minimum(dist, _l1_dists(X, X[idx]))
    return X[chosen].copy()


def kmeans_l1(
    features,
    K: int,
    n_init: int = 10,
    max_iter: int = 100,
    seed=None,
    centers: np.ndarray | None = None,
    T: int | None = None,
) -> KMeansResult:
    """Lloyd iteration under L1 distance (K-medians).

    Assignment is by nearest centroid in L1; the centroid update is the
    coordinatewise median, the exact L1 minimizer. The best of n_init
    seeded initializations by total L1 inertia wins. When window centers
    and the series length T are given, labels are expanded to a per-time
    sequence by the nearest window center.
    """
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    if K > n:
        raise ValueError(f"K={K} exceeds {n} feature vectors")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        C = _seed_centroids(X, K, rng)
        labels = np.zeros(n, dtype=np.int64)
        for _ in range(max_iter):
            D = np.stack([_l1_dists(X, C[k]) for k in range(K)], axis=1)
            new_labels = np.argmin(D, axis=1)
            for k in range(K):
                members = new_labels == k
                if not members.any():
                    # Re-seed an emptied cluster at the farthest point.
                    far = int(np.argmax(D[np.arange(n), new_labels]))
                    C[k] = X[far]
                    new_labels[far] = k
                    members = new_labels == k
                C[k] = np.median(X[members], axis=0)
            if np.array_equal(new_labels, labels):
                labels = new_labels
                break
            labels = new_labels
        D = np.stack([_l1_dists(X, C[k]) for k in range(K)], axis=1)
        labels = np.argmin(D, axis=1)
        inertia = float(D[np.arange(n), labels].sum())
        if best is None or inertia < best[2]:
            best = (labels, C.copy(), inertia)
    labels, C, inertia = best
    expanded = None
    if centers is not None and T is not None:
        expanded = expand_window_labels(labels + 1, centers, T)
    return KMeansResult(
        K=K, labels=labels + 1, centroids=C, inertia=inertia, expanded_labels=expanded
    )


def expand_window_labels(labels: np.ndarray, centers: np.ndarray, T: int) -> np.ndarray:
    """Per-time labels: each t takes the label of the nearest window center
    (1-based times; ties go to the earlier window)."""
    t = np.arange(1, T + 1)
    nearest = np.argmin(np.abs(t[:, None] - np.asarray(centers)[None, :]), axis=1)
    return np.asarray(labels)[nearest]


def pooled_ridge_var(
    d: Dataset, labels: np.ndarray, K: int, P: int = 1, ridge: float = 0.1
) -> np.ndarray:
    """Ridge VAR(P) refit on the rows assigned to each label, -> (K, P, N, N).

    The per-regime design pools every usable target row of that regime:
    a row qualifies when it and its P predecessors carry the same label and
    do not straddle a concatenation join. Each regime's rows are centered
    before the fit. A regime without usable rows gets zero matrices.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != d.T:
        raise ValueError("labels length must match T")
    N = d.N
    good = np.zeros(d.T, dtype=bool)
    good[valid_lag_rows(d.T, P, d.segment_boundaries)] = True
    out = np.zeros((K, P, N, N))
    for j in range(1, K + 1):
        rows = [
            t
            for t in range(P, d.T)
            if good[t] and np.all(labels[t - P : t + 1] == j)
        ]
        if not rows:
            continue
        rows = np.asarray(rows)
        seg = d.values - d.values[labels == j].mean(axis=0)
        X = np.hstack([seg[rows - l] for l in range(1, P + 1)])
        Y = seg[rows]
        B = np.linalg.solve(X.T @ X + ridge * np.eye(N * P), X.T @ Y)
        out[j - 1] = unvec_coeffs(B.ravel(), N, P)
    return out


@dataclass
class BaselineFit:
    tvvar: TvVarResult
    kmeans: KMeansResult
    coeff_matrices: np.ndarray  # (K, P, N, N) ridge refit on clustered rows


def fit_kmeans_baseline(
    d: Dataset,
    K: int,
    window: int = 30,
    shift: int = 1,
    ridge: float = 0.1,
    P: int = 1,
    n_init: int = 10,
    max_iter: int = 100,
    seed=None,
) -> BaselineFit:
    """TV-VAR + K-means pipeline.

    The per-regime coefficient estimate is the ridge VAR refit pooled over
    the time points the expanded cluster labels assign to that regime (the
    clustering only segments; the regime matrices come from the refit).
    """
    tv = sliding_ridge_tvvar(d, window=window, shift=shift, ridge=ridge, P=P)
    km = kmeans_l1(
        tv.coeffs, K, n_init=n_init, max_iter=max_iter, seed=seed,
        centers=tv.centers, T=d.T,
    )
    mats = pooled_ridge_var(d, km.expanded_labels, K, P=P, ridge=ridge)
    return BaselineFit(tvvar=tv, kmeans=km, coeff_matrices=mats)
