"""Step 3: per-regime high-dimensional directed connectivity.

Coefficient matrices are reconstructed from the factor subspace as
Phi_y = Q Phi_f Q' (rank <= r). Entry [i, j] is the directed influence of
channel j on channel i (column -> row). Significance follows the asymptotic
normal test with covariance diag computed elementwise from the Kronecker
structure (Q Sigma_eta Q') x (Q Gamma_f Q').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .factor_pca import FactorModelFit, estimate_pca, fit_var_ls
from .sskf import InferenceResult, SwitchingSSM
from .tsdata import Dataset


@dataclass
class RegimeConn:
    """One regime's connectivity estimate and (optionally) its test stats."""

    phi_y: np.ndarray  # (P, N, N)
    loadings_used: np.ndarray  # (N, r)
    phi_f: np.ndarray  # (P, r, r)
    factor_cov: np.ndarray  # (r, r)
    innovation_cov: np.ndarray  # (r, r)
    t_stats: np.ndarray | None = None  # (P, N, N)
    p_values: np.ndarray | None = None  # (P, N, N)
    significant_mask: np.ndarray | None = None  # (P, N, N) bool


@dataclass
class RegimeConnectivity:
    per_regime: list[RegimeConn]
    variant: str  # "coupled" | "decoupled"
    alpha: float | None = None
    n_tests: int | None = None


@dataclass
class Edge:
    """Directed edge source -> target (both 1-based channel indices)."""

    source: int
    target: int
    lag: int
    weight: float
    t_stat: float
    p_value: float


def _project(Q: np.ndarray, phi_f: np.ndarray) -> np.ndarray:
    return np.stack([Q @ phi_f[l] @ Q.T for l in range(phi_f.shape[0])])


def coupled_estimator(
    fm: FactorModelFit, em: SwitchingSSM, inference: InferenceResult
) -> RegimeConnectivity:
    """Per-regime connectivity through the shared Step-1 loadings.

    Phi_y^[j](l) = Q Phi_f^[j](l) Q'. The per-regime factor covariance is
    the smoothed second moment of the factors weighted by the regime's
    smoothed occupancy probabilities, matching how the dynamics were
    estimated; the innovation covariance is the regime's EM state noise.
    """
    if fm.r != em.r:
        raise ValueError(f"factor count mismatch: PCA r={fm.r}, model r={em.r}")
    Q = fm.loadings
    r = fm.r
    Fm, Vm, W = inference.smoothed_means, inference.smoothed_covs, inference.smoothed_probs
    # E[f_t f_t' | y] summed with regime weights.
    P_rr = Vm[:, :r, :r] + Fm[:, :r, None] * Fm[:, None, :r]
    per = []
    for j in range(em.K):
        wj = W[:, j]
        gamma = np.einsum("t,tab->ab", wj, P_rr) / max(wj.sum(), 1e-300)
        gamma = 0.5 * (gamma + gamma.T)
        phi_f = em.regime_params[j].phi
        per.append(
            RegimeConn(
                phi_y=_project(Q, phi_f),
                loadings_used=Q,
                phi_f=phi_f.copy(),
                factor_cov=gamma,
                innovation_cov=em.regime_params[j].state_noise_cov.copy(),
            )
        )
    return RegimeConnectivity(per_regime=per, variant="coupled")


def decoupled_estimator(
    d: Dataset, states: np.ndarray, r: int, P: int, n_regimes: int | None = None
) -> RegimeConnectivity:
    """Per-regime connectivity with regime-specific loadings.

    Partitions the rows of d by the decoded state sequence, refits a factor
    model and a factor VAR(P) inside each regime (regression rows straddling
    gaps between non-contiguous occurrences are excluded), and projects
    through the regime's own loadings. ``n_regimes`` forces the regime count
    when the decoding may have dropped a label entirely (such a regime then
    fails the occupancy check instead of silently vanishing).
    """
    states = np.asarray(states)
    if states.shape[0] != d.T:
        raise ValueError("states length must match T")
    K = int(states.max()) if n_regimes is None else int(n_regimes)
    parent_starts = {0} | {b - 1 for b in d.segment_boundaries}
    per = []
    for j in range(1, K + 1):
        idx = np.flatnonzero(states == j)
        if idx.size < r * P + 10:
            raise ValueError(
                f"regime {j} occupies only {idx.size} time points; need >= {r * P + 10}"
            )
        # Segment starts inside the partition: non-contiguous jumps and
        # parent concatenation joins both break the lag structure.
        bounds = [
            k + 1
            for k in range(1, idx.size)
            if idx[k] != idx[k - 1] + 1 or idx[k] in parent_starts
        ]
        sub = d.values[idx]
        sub = sub - sub.mean(axis=0)
        sub_d = Dataset(
            values=sub,
            channel_names=list(d.channel_names),
            segment_boundaries=bounds,
        )
        fm = estimate_pca(sub_d, r)
        var = fit_var_ls(fm.factors, P, bounds)
        gamma = fm.factors.T @ fm.factors / idx.size
        per.append(
            RegimeConn(
                phi_y=_project(fm.loadings, var.matrices),
                loadings_used=fm.loadings,
                phi_f=var.matrices,
                factor_cov=0.5 * (gamma + gamma.T),
                innovation_cov=var.innovation_cov,
            )
        )
    return RegimeConnectivity(per_regime=per, variant="decoupled")


def coeff_significance(
    rc: RegimeConnectivity, T_regime, alpha: float = 0.05
) -> RegimeConnectivity:
    """Asymptotic per-coefficient tests with Bonferroni correction.

    For the coefficient at (row i, column c), the variance is the Kronecker
    diagonal (Q Sigma_eta Q')_cc * (Q Gamma_f Q')_ii divided by the regime's
    occupancy count; t is referred to a standard normal two-sided, and the
    per-test level is alpha / (N^2 P). Degenerate (nonpositive) variances
    make the coefficient untestable: t=0, p=1.
    """
    T_regime = np.atleast_1d(np.asarray(T_regime, dtype=np.float64))
    if T_regime.shape[0] != len(rc.per_regime):
        raise ValueError("need one sample count per regime")
    if np.any(T_regime < 1):
        raise ValueError("per-regime sample counts must be >= 1")
    P, N, _ = rc.per_regime[0].phi_y.shape
    D = N * N * P
    per = []
    for j, conn in enumerate(rc.per_regime):
        Q = conn.loadings_used
        A1 = Q @ conn.innovation_cov @ Q.T
        A2 = Q @ conn.factor_cov @ Q.T
        var = np.outer(np.diag(A2), np.diag(A1))  # var[i, c]
        ok = var > 0
        t = np.zeros_like(conn.phi_y)
        denom = np.sqrt(np.where(ok, var, 1.0) / T_regime[j])
        for l in range(P):
            t[l] = np.where(ok, conn.phi_y[l] / denom, 0.0)
        p = erfc(np.abs(t) / np.sqrt(2.0))
        p = np.where(np.broadcast_to(ok, p.shape), p, 1.0)
        per.append(
            RegimeConn(
                phi_y=conn.phi_y,
                loadings_used=conn.loadings_used,
                phi_f=conn.phi_f,
                factor_cov=conn.factor_cov,
                innovation_cov=conn.innovation_cov,
                t_stats=t,
                p_values=p,
                significant_mask=p < alpha / D,
            )
        )
    return RegimeConnectivity(
        per_regime=per, variant=rc.variant, alpha=alpha, n_tests=D
    )


def threshold_graph(
    rc: RegimeConnectivity, tau: float, include_self: bool = False
) -> list[list[Edge]]:
    """Per-regime directed edge lists: significant entries with |weight| > tau.

    Edge direction is column -> row of phi_y (source -> target). Self-loops
    are dropped unless include_self.
    """
    if rc.per_regime[0].significant_mask is None:
        raise ValueError("run coeff_significance before thresholding")
    graphs = []
    for conn in rc.per_regime:
        edges = []
        P = conn.phi_y.shape[0]
        for l in range(P):
            keep = conn.significant_mask[l] & (np.abs(conn.phi_y[l]) > tau)
            if not include_self:
                np.fill_diagonal(keep, False)
            for i, c in zip(*np.nonzero(keep)):
                edges.append(
                    Edge(
                        source=int(c) + 1,
                        target=int(i) + 1,
                        lag=l + 1,
                        weight=float(conn.phi_y[l, i, c]),
                        t_stat=float(conn.t_stats[l, i, c]),
                        p_value=float(conn.p_values[l, i, c]),
                    )
                )
        graphs.append(edges)
    return graphs
