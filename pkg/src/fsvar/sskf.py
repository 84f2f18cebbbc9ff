"""Step 2: switching state-space model, SKF/SKS inference, EM estimation.

The factor VAR(P) with Markov regime switching is put in companion form:
F_t = [f_t; ...; f_{t-P+1}], per-regime transition A^[j] with the free
coefficient blocks in the top block row, state noise nonzero only in the
top-left r x r block, shared observation map H = [Q, 0, ..., 0] and diagonal
observation noise. Filtering uses a GPB2 collapse (K^2 branches per step,
moment-matched back to K); smoothing follows Kim's approximation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kalman_core as core
from .factor_pca import FactorModelFit, fit_var_ls
from .tsdata import Dataset

_NOISE_FLOOR = 1e-12  # obs noise variances are floored to keep R invertible
_PROB_FLOOR = 1e-300


@dataclass
class RegimeParams:
    """Per-regime VAR coefficients (P, r, r) and state noise covariance."""

    phi: np.ndarray
    state_noise_cov: np.ndarray


@dataclass
class SwitchingSSM:
    """Companion-form switching linear-Gaussian state-space model."""

    K: int
    P: int
    r: int
    regime_params: list[RegimeParams]
    obs_map: np.ndarray  # (N, r*P), = [Q, 0, ..., 0]
    obs_noise_diag: np.ndarray  # (N,)
    trans: np.ndarray  # (K, K) row-stochastic
    init_state_probs: np.ndarray  # (K,)
    init_mean: np.ndarray  # (r*P,)
    init_cov: np.ndarray  # (r*P, r*P)

    def __post_init__(self):
        if len(self.regime_params) != self.K:
            raise ValueError("regime_params length must equal K")
        self.trans = np.ascontiguousarray(self.trans, dtype=np.float64)
        if self.trans.shape != (self.K, self.K):
            raise ValueError(f"trans must be {self.K}x{self.K}")
        if np.any(self.trans < 0):
            raise ValueError("trans entries must be nonnegative")
        if np.max(np.abs(self.trans.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("trans rows must sum to 1")
        for j, rp in enumerate(self.regime_params):
            C = rp.state_noise_cov
            if np.max(np.abs(C - C.T)) > 1e-8:
                raise ValueError(f"state_noise_cov of regime {j + 1} not symmetric")

    @property
    def N(self) -> int:
        return self.obs_map.shape[0]

    def loadings(self) -> np.ndarray:
        return self.obs_map[:, : self.r]

    def companion(self, j: int) -> np.ndarray:
        return companion_matrix(self.regime_params[j].phi)

    def companions(self) -> np.ndarray:
        return np.stack([self.companion(j) for j in range(self.K)])

    def state_noise(self) -> np.ndarray:
        return np.stack([rp.state_noise_cov for rp in self.regime_params])


@dataclass
class FilterResult:
    """Filtered quantities: per-regime collapsed moments, probabilities, loglik."""

    filtered_probs: np.ndarray  # (T, K)
    filtered_means: np.ndarray  # (T, K, r*P)
    filtered_covs: np.ndarray  # (T, K, r*P, r*P)
    loglik: float


@dataclass
class InferenceResult:
    """Filtered + smoothed posteriors of a switching state-space model."""

    filtered_probs: np.ndarray  # (T, K)
    smoothed_probs: np.ndarray  # (T, K)
    smoothed_joint: np.ndarray  # (T-1, K, K), [t] = P(S_t, S_{t+1} | y)
    smoothed_means: np.ndarray  # (T, r*P)
    smoothed_covs: np.ndarray  # (T, r*P, r*P)
    smoothed_crosscovs: np.ndarray  # (T-1, r*P, r*P), [t] = Cov(F_{t+1}, F_t | y)
    loglik: float
    decoded_skf: np.ndarray  # (T,) 1-based
    decoded_sks: np.ndarray  # (T,) 1-based


@dataclass
class EMConfig:
    max_iters: int = 100
    loglik_rel_tol: float = 1e-5
    n_restarts: int = 5
    seed: int | None = 0
    init_phi_scale: float = 0.5
    init_sticky_prob: float = 0.95

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.loglik_rel_tol <= 0:
            raise ValueError("loglik_rel_tol must be > 0")
        if not 0 < self.init_sticky_prob < 1:
            raise ValueError("init_sticky_prob must lie in (0, 1)")


def companion_matrix(phi: np.ndarray) -> np.ndarray:
    """Companion form of VAR blocks phi (P, r, r): coefficient blocks in the
    top block row, shifted identity below."""
    P, r, _ = phi.shape
    A = np.zeros((r * P, r * P))
    for l in range(P):
        A[:r, l * r : (l + 1) * r] = phi[l]
    if P > 1:
        A[r:, : r * (P - 1)] = np.eye(r * (P - 1))
    return A


def spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def build_ssm(
    Q: np.ndarray,
    obs_noise_diag: np.ndarray,
    phis: np.ndarray,
    sigmas: np.ndarray,
    trans: np.ndarray,
    init_state_probs=None,
    init_cov_scale: float = 10.0,
) -> SwitchingSSM:
    """Assemble a SwitchingSSM from loadings and per-regime VAR parameters.

    phis has shape (K, P, r, r), sigmas (K, r, r). Initial state is diffuse:
    mean zero, covariance init_cov_scale * I, uniform regime prior unless
    given.
    """
    phis = np.asarray(phis, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    K, P, r, _ = phis.shape
    N = Q.shape[0]
    obs_map = np.zeros((N, r * P))
    obs_map[:, :r] = Q
    if init_state_probs is None:
        init_state_probs = np.full(K, 1.0 / K)
    return SwitchingSSM(
        K=K,
        P=P,
        r=r,
        regime_params=[RegimeParams(phi=phis[j], state_noise_cov=sigmas[j]) for j in range(K)],
        obs_map=obs_map,
        obs_noise_diag=np.asarray(obs_noise_diag, dtype=np.float64),
        trans=trans,
        init_state_probs=np.asarray(init_state_probs, dtype=np.float64),
        init_mean=np.zeros(r * P),
        init_cov=init_cov_scale * np.eye(r * P),
    )


def _project_obs(m: SwitchingSSM, Y: np.ndarray):
    """Hoist all O(N) work out of the recursion (see _kalman_core)."""
    Q = m.loadings()
    sig = np.maximum(m.obs_noise_diag, _NOISE_FLOOR)
    Yw = Y / sig[None, :]
    G = np.ascontiguousarray(Yw @ Q)
    a = np.einsum("ti,ti->t", Yw, Y)
    B = np.ascontiguousarray(Q.T @ (Q / sig[:, None]))
    logdetR = float(np.sum(np.log(sig)))
    return G, a, B, logdetR


def skf_filter(m: SwitchingSSM, d: Dataset, _pre=None) -> FilterResult:
    """Switching Kalman filter (GPB2 collapse).

    Runs K^2 conditional Kalman updates per step, weights branches by the
    Markov transition probabilities and innovation likelihoods, and collapses
    to one Gaussian per regime by moment matching. Returns filtered state
    probabilities, per-regime moments, and the accumulated log-likelihood.
    """
    Y = d.values
    if Y.shape[1] != m.N:
        raise ValueError(f"data has {Y.shape[1]} channels, model expects {m.N}")
    G, a, B, logdetR = _project_obs(m, Y) if _pre is None else _pre
    lnpi = np.log(np.maximum(m.init_state_probs, _PROB_FLOOR))
    status, bad_t, loglik, M, xf, Vf = core.filter_kernel(
        G,
        a,
        B,
        logdetR,
        m.N,
        m.companions(),
        m.state_noise(),
        m.trans,
        lnpi,
        m.init_mean,
        m.init_cov,
        m.r,
    )
    if status == core.SINGULAR_INNOVATION:
        raise np.linalg.LinAlgError(f"singular innovation covariance at t={bad_t + 1}")
    if status == core.NONFINITE:
        raise FloatingPointError(f"non-finite innovation at t={bad_t + 1} (model divergence)")
    return FilterResult(filtered_probs=M, filtered_means=xf, filtered_covs=Vf, loglik=float(loglik))


def sks_smooth(m: SwitchingSSM, filt: FilterResult) -> InferenceResult:
    """Switching Kalman smoother (Kim) over a filter pass.

    Backward recursion per regime pair with moment-matching collapse; also
    produces pairwise state posteriors, regime-marginal smoothed moments and
    lag-one cross-covariances (via V_{t+1,t|T} = V_{t+1|T} J_t' per branch).
    """
    Ms, joint, Fm, Vm, Cm = core.smoother_kernel(
        filt.filtered_means,
        filt.filtered_covs,
        filt.filtered_probs,
        m.companions(),
        m.state_noise(),
        m.trans,
        m.r,
    )
    return InferenceResult(
        filtered_probs=filt.filtered_probs,
        smoothed_probs=Ms,
        smoothed_joint=joint,
        smoothed_means=Fm,
        smoothed_covs=Vm,
        smoothed_crosscovs=Cm,
        loglik=filt.loglik,
        decoded_skf=decode_states(filt.filtered_probs),
        decoded_sks=decode_states(Ms),
    )


def infer(m: SwitchingSSM, d: Dataset, _pre=None) -> InferenceResult:
    """Filter then smooth."""
    return sks_smooth(m, skf_filter(m, d, _pre=_pre))


def decode_states(probs: np.ndarray) -> np.ndarray:
    """Most likely state per time point, 1-based, ties toward smaller index."""
    return np.argmax(probs, axis=1).astype(np.int64) + 1


# --- EM ---------------------------------------------------------------


def _psd_project(S: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    S = 0.5 * (S + S.T)
    lam, V = np.linalg.eigh(S)
    return (V * np.maximum(lam, floor)) @ V.T


def _m_step(m: SwitchingSSM, inf: InferenceResult) -> SwitchingSSM:
    """One M-step: per-regime top-block-row transition update, state noise
    update (symmetric residual form, PSD-projected), transition matrix from
    the pairwise posteriors. Loadings, obs noise and initial state are fixed."""
    r, P, K = m.r, m.P, m.K
    Fm, Vm, Cm, W = inf.smoothed_means, inf.smoothed_covs, inf.smoothed_crosscovs, inf.smoothed_probs
    Pmats = Vm + Fm[:, :, None] * Fm[:, None, :]
    Pcross = Cm + Fm[1:, :, None] * Fm[:-1, None, :]  # E[F_t F_{t-1}']

    new_params = []
    for j in range(K):
        wj = W[1:, j]
        wsum = float(wj.sum())
        S0 = np.einsum("t,tab->ab", wj, Pmats[:-1])
        S1r = np.einsum("t,tab->ab", wj, Pcross[:, :r, :])
        Syrr = np.einsum("t,tab->ab", wj, Pmats[1:, :r, :r])
        S0 = 0.5 * (S0 + S0.T)
        Atop = np.linalg.solve(S0, S1r.T).T  # (r, r*P)
        Sig = (Syrr - Atop @ S1r.T - S1r @ Atop.T + Atop @ S0 @ Atop.T) / max(wsum, _PROB_FLOOR)
        Sig = _psd_project(Sig)
        phi = np.stack([Atop[:, l * r : (l + 1) * r] for l in range(P)])
        new_params.append(RegimeParams(phi=phi, state_noise_cov=Sig))

    num = inf.smoothed_joint.sum(axis=0)  # (K, K)
    den = W[:-1].sum(axis=0)
    Z = m.trans.copy()
    for i in range(K):
        if den[i] > 1e-12:
            Z[i] = num[i] / den[i]
    Z = np.maximum(Z, 0.0)
    Z /= Z.sum(axis=1, keepdims=True)

    return SwitchingSSM(
        K=K,
        P=P,
        r=r,
        regime_params=new_params,
        obs_map=m.obs_map,
        obs_noise_diag=m.obs_noise_diag,
        trans=Z,
        init_state_probs=m.init_state_probs,
        init_mean=m.init_mean,
        init_cov=m.init_cov,
    )


def _random_init(
    fm: FactorModelFit, K: int, P: int, base_sigma: np.ndarray, cfg: EMConfig, rng
) -> SwitchingSSM:
    r = fm.r
    phis = rng.uniform(-cfg.init_phi_scale, cfg.init_phi_scale, size=(K, P, r, r))
    for j in range(K):
        while spectral_radius(companion_matrix(phis[j])) >= 0.98:
            phis[j] *= 0.9
    sigmas = np.stack([base_sigma.copy() for _ in range(K)])
    off = (1.0 - cfg.init_sticky_prob) / max(K - 1, 1)
    Z = np.full((K, K), off)
    np.fill_diagonal(Z, cfg.init_sticky_prob if K > 1 else 1.0)
    Z /= Z.sum(axis=1, keepdims=True)
    return build_ssm(fm.loadings, fm.noise_cov_diag, phis, sigmas, Z)


def _run_em(d: Dataset, model: SwitchingSSM, cfg: EMConfig, pre):
    trace: list[float] = []
    inf = None
    for it in range(cfg.max_iters + 1):
        inf = infer(model, d, _pre=pre)
        trace.append(inf.loglik)
        if it == cfg.max_iters:
            break
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < cfg.loglik_rel_tol * abs(trace[-2]):
            break
        model = _m_step(model, inf)
    return model, inf, trace


def em_fit(d: Dataset, K: int, P: int, fm: FactorModelFit, cfg: EMConfig | None = None):
    """EM estimation of per-regime factor VAR dynamics and transition matrix.

    Loadings and observation noise stay fixed at the PCA estimates; the
    E-step weights the smoothed second-moment statistics by the smoothed
    regime probabilities, the M-step solves the weighted normal equations
    for the free top block row of each companion matrix, updates each state
    noise covariance, and re-estimates the transition matrix. The best of
    n_restarts random initializations (by final log-likelihood) is returned.

    Returns (model, inference, loglik_trace).
    """
    cfg = cfg or EMConfig()
    if K < 1 or P < 1:
        raise ValueError("need K >= 1 and P >= 1")
    r = fm.r
    if K * r * r * P > max(d.T - P, 0):
        warnings.warn(
            f"{K * r * r * P} free dynamics parameters with only {d.T} time points; "
            "estimates will be noisy",
            stacklevel=2,
        )
    try:
        base_sigma = fit_var_ls(fm.factors, P, d.segment_boundaries).innovation_cov
        base_sigma = _psd_project(base_sigma)
    except (ValueError, np.linalg.LinAlgError):
        base_sigma = np.eye(r) * float(np.var(fm.factors))

    probe = build_ssm(fm.loadings, fm.noise_cov_diag, np.zeros((K, P, r, r)), np.stack([base_sigma] * K), np.full((K, K), 1.0 / K))
    pre = _project_obs(probe, d.values)

    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(cfg.n_restarts):
        model0 = _random_init(fm, K, P, base_sigma, cfg, rng)
        try:
            model, inf, trace = _run_em(d, model0, cfg, pre)
        except (np.linalg.LinAlgError, FloatingPointError):
            continue
        if not np.isfinite(trace[-1]):
            continue
        if best is None or trace[-1] > best[2][-1]:
            best = (model, inf, trace)
    if best is None:
        raise RuntimeError("all EM restarts diverged")
    return best
