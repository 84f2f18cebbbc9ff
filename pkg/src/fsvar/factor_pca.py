"""Step 1: PCA factor extraction, BIC factor-count selection, LS VAR fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tsdata import Dataset, valid_lag_rows

# ln() floor so exact low-rank data does not produce -inf in the BIC.
_RESID_FLOOR = 1e-300


@dataclass
class FactorModelFit:
    """Output of the PCA step.

    loadings is the N x r orthonormal map Q, factors the T x r series
    f_t = Q' y_t, eigenvalues the full non-increasing spectrum of the sample
    covariance, noise_cov_diag the diagonal of the residual covariance.
    """

    loadings: np.ndarray
    factors: np.ndarray
    eigenvalues: np.ndarray
    noise_cov_diag: np.ndarray
    r: int


@dataclass
class VARCoeffs:
    """VAR(P) coefficient matrices and innovation covariance on the factors."""

    order: int
    matrices: np.ndarray  # (P, r, r), matrices[l] multiplies f_{t-l-1}
    innovation_cov: np.ndarray  # (r, r) symmetric PSD


def _fix_signs(Q: np.ndarray) -> np.ndarray:
    # Resolve the eigenvector sign ambiguity: largest-|entry| per column >= 0.
    idx = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return Q * signs


def _spectrum(Y: np.ndarray, gram: bool | None = None):
    """Eigenpairs of S_y = (1/T) Y'Y, descending, via the cheaper route.

    Returns (eigenvalues length N, eigvec provider) where the provider
    materializes the top-r eigenvector block on demand.
    """
    T, N = Y.shape
    if gram is None:
        gram = N > T
    if not gram:
        S = (Y.T @ Y) / T
        lam, V = np.linalg.eigh(S)
        lam = lam[::-1]
        V = V[:, ::-1]
        return np.maximum(lam, 0.0), lambda r: _fix_signs(V[:, :r].copy())

    G = (Y @ Y.T) / T
    mu, U = np.linalg.eigh(G)
    mu = np.maximum(mu[::-1], 0.0)
    U = U[:, ::-1]
    lam = np.zeros(N)
    lam[: min(T, N)] = mu[: min(T, N)]

    def top_r(r: int) -> np.ndarray:
        # Y'u / sqrt(T mu) is a unit eigenvector of S_y for eigenvalue mu.
        scale = np.sqrt(np.maximum(T * mu[:r], _RESID_FLOOR))
        return _fix_signs((Y.T @ U[:, :r]) / scale)

    return lam, top_r


def estimate_pca(d: Dataset, r: int, gram: bool | None = None) -> FactorModelFit:
    """PCA estimate of the r-factor model on centered data.

    Parameters
    ----------
    d : Dataset
        Observations, assumed column-centered.
    r : int
        Number of factors, 1 <= r <= min(N, T).
    gram : bool, optional
        Force the T x T Gram route (True) or the direct N x N route (False).
        Default picks the Gram route when N > T.

    Returns
    -------
    FactorModelFit
        Loadings are the top-r eigenvectors of S_y = (1/T) Y'Y with a
        deterministic sign convention; noise covariance is the diagonal of
        the reconstruction-residual covariance.
    """
    Y = d.values
    T, N = Y.shape
    if not 1 <= r <= min(N, T):
        raise ValueError(f"r={r} out of range [1, {min(N, T)}]")
    lam, top_r = _spectrum(Y, gram)
    Q = top_r(r)
    F = Y @ Q
    E = Y - F @ Q.T
    noise_diag = np.einsum("ti,ti->i", E, E) / T
    return FactorModelFit(
        loadings=Q, factors=F, eigenvalues=lam, noise_cov_diag=noise_diag, r=r
    )


def select_num_factors(d: Dataset, max_r: int, gram: bool | None = None):
    """BIC selection of the factor count.

    For each r in 1..max_r,
    BIC(r) = ln(V(r)) + r * ((N+T)/(NT)) * ln(NT/(N+T)) with V(r) the mean
    squared PCA residual, computed spectrally as sum of discarded
    eigenvalues / N. Returns (r_hat, bic_values) with r_hat the argmin
    (ties toward smaller r).
    """
    Y = d.values
    T, N = Y.shape
    if not 1 <= max_r <= min(N, T):
        raise ValueError(f"max_r={max_r} out of range [1, {min(N, T)}]")
    lam, _ = _spectrum(Y, gram)
    # Eigenvalue dust below the numerical-rank tolerance would otherwise
    # dominate ln(V(r)) on exact low-rank data; zero it so those r tie at
    # the floor and the penalty decides.
    lam = np.where(lam > lam[0] * max(N, T) * np.finfo(np.float64).eps, lam, 0.0)
    # Residual SS after keeping r components is T * sum_{i>r} lambda_i.
    tail = np.cumsum(lam[::-1])[::-1]  # tail[i] = sum(lam[i:])
    penalty = (N + T) / (N * T) * np.log(N * T / (N + T))
    rs = np.arange(1, max_r + 1)
    resid = np.maximum(np.concatenate([tail[1:], [0.0]])[:max_r] / N, _RESID_FLOOR)
    bic = np.log(resid) + rs * penalty
    r_hat = int(np.argmin(bic)) + 1
    return r_hat, bic.tolist()


def fit_var_ls(factors: np.ndarray, P: int, boundaries=()) -> VARCoeffs:
    """Least-squares VAR(P) fit on a factor series, no intercept.

    Parameters
    ----------
    factors : (T, r) array
    P : VAR order >= 1
    boundaries : segment joins (1-based), rows straddling a join are skipped

    Returns
    -------
    VARCoeffs
        matrices[l] is the coefficient on lag l+1; innovation_cov uses
        divisor (rows_used - r*P).
    """
    F = np.asarray(factors, dtype=np.float64)
    T, r = F.shape
    rows = valid_lag_rows(T, P, boundaries)
    if rows.size <= r * P + 1:
        raise ValueError(
            f"only {rows.size} usable rows for {r * P} regressors; need more data"
        )
    X = np.hstack([F[rows - l] for l in range(1, P + 1)])  # (n, r*P)
    Yt = F[rows]
    G = X.T @ X
    if np.linalg.matrix_rank(G) < r * P:
        raise np.linalg.LinAlgError("rank-deficient regressor Gram matrix")
    B = np.linalg.solve(G, X.T @ Yt)  # (r*P, r)
    resid = Yt - X @ B
    dof = rows.size - r * P
    Sigma = resid.T @ resid / dof
    Sigma = 0.5 * (Sigma + Sigma.T)
    mats = np.stack([B[l * r : (l + 1) * r, :].T for l in range(P)])
    return VARCoeffs(order=P, matrices=mats, innovation_cov=Sigma)
