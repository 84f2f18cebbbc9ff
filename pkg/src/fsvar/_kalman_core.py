"""Numba kernels for switching Kalman filtering and smoothing.

The observation model is shared across regimes: y_t = H F_t + eps,
H = [Q, 0, ..., 0], R = diag(sigma2). All O(N) work is hoisted out of the
time recursion by projecting observations once:

    g_t = Q' R^-1 y_t,   a_t = y_t' R^-1 y_t,   B = Q' R^-1 Q.

With x1/P11 the top-r block of the predicted mean/covariance, Woodbury and
the matrix determinant lemma give, writing Mcap = I_r + P11 B and
u = g_t - B x1 (= Q' R^-1 innovation):

    e' S^-1 e   = e' R^-1 e - u' Mcap^-1 P11 u
    ln det S    = ln det R + ln det Mcap
    Q' S^-1 e   = u - B Mcap^-1 P11 u
    Q' S^-1 Q   = B - B Mcap^-1 P11 B

so each regime-pair update costs O(r^3 + (rP)^2 r) regardless of N.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LN2PI = 1.8378770664093453

# Status codes returned by the filter kernel.
OK = 0
SINGULAR_INNOVATION = 1
NONFINITE = 2


@njit(cache=True)
def _kf_update(x_pred, V_pred, g_t, a_t, B, logdetR, N, r):
    """One measurement update in projected form.

    Returns (x_upd, V_upd, loglik, ok). ok=False flags a numerically
    singular innovation covariance.
    """
    rp = x_pred.shape[0]
    x1 = x_pred[:r]
    P11 = np.ascontiguousarray(V_pred[:r, :r])
    u = g_t - B @ x1
    Mcap = P11 @ B
    for i in range(r):
        Mcap[i, i] += 1.0
    sign, lndetM = np.linalg.slogdet(Mcap)
    if sign <= 0.0:
        return x_pred, V_pred, -np.inf, False
    sol_u = np.linalg.solve(Mcap, P11 @ u)
    quad = a_t - 2.0 * (x1 @ g_t) + x1 @ (B @ x1) - u @ sol_u
    if quad < 0.0:
        quad = 0.0
    ll = -0.5 * (N * _LN2PI + logdetR + lndetM + quad)
    w = u - B @ sol_u
    PL = np.ascontiguousarray(V_pred[:, :r])  # (rp, r)
    x_upd = x_pred + PL @ w
    solB = np.linalg.solve(Mcap, P11 @ B)
    Csub = B - B @ solB
    V_upd = V_pred - PL @ Csub @ PL.T
    V_upd = 0.5 * (V_upd + V_upd.T)
    return x_upd, V_upd, ll, True


@njit(cache=True)
def _predict(x, V, A_k, Se_k, r):
    x_pred = A_k @ x
    V_pred = A_k @ V @ A_k.T
    V_pred[:r, :r] += Se_k
    V_pred = 0.5 * (V_pred + V_pred.T)
    return x_pred, V_pred


@njit(cache=True)
def filter_kernel(G, a, B, logdetR, N, A, Se, Z, lnpi, x0, V0, r):
    """GPB2 switching Kalman filter over projected observations.

    Parameters: G (T,r) projected data, a (T,) y'R^-1 y, B (r,r), scalar
    logdetR, N channels, A (K,rp,rp) companion matrices, Se (K,r,r) state
    noise, Z (K,K) transitions, lnpi (K,) log initial state probs, x0/V0
    initial state moments.

    Returns (status, bad_t, loglik, M, xf, Vf) with M (T,K) filtered state
    probabilities and xf/Vf the per-regime collapsed moments.
    """
    T = G.shape[0]
    K = A.shape[0]
    rp = A.shape[1]
    M = np.zeros((T, K))
    xf = np.zeros((T, K, rp))
    Vf = np.zeros((T, K, rp, rp))
    lnZ = np.log(np.maximum(Z, 1e-300))
    loglik = 0.0

    # t = 0: K branches from the shared initial density, no prediction step.
    lnw0 = np.empty(K)
    for j in range(K):
        xu, Vu, ll, ok = _kf_update(x0, V0, G[0], a[0], B, logdetR, N, r)
        if not ok:
            return SINGULAR_INNOVATION, 0, 0.0, M, xf, Vf
        if not np.isfinite(ll):
            return NONFINITE, 0, 0.0, M, xf, Vf
        xf[0, j] = xu
        Vf[0, j] = Vu
        lnw0[j] = lnpi[j] + ll
    mx = np.max(lnw0)
    s = 0.0
    for j in range(K):
        s += np.exp(lnw0[j] - mx)
    loglik += mx + np.log(s)
    for j in range(K):
        M[0, j] = np.exp(lnw0[j] - mx) / s

    xu_t = np.empty((K, K, rp))
    Vu_t = np.empty((K, K, rp, rp))
    lnw = np.empty((K, K))
    for t in range(1, T):
        for i in range(K):
            lnMi = np.log(max(M[t - 1, i], 1e-300))
            for k in range(K):
                xp, Vp = _predict(xf[t - 1, i], Vf[t - 1, i], A[k], Se[k], r)
                xu, Vu, ll, ok = _kf_update(xp, Vp, G[t], a[t], B, logdetR, N, r)
                if not ok:
                    return SINGULAR_INNOVATION, t, 0.0, M, xf, Vf
                if not np.isfinite(ll):
                    return NONFINITE, t, 0.0, M, xf, Vf
                xu_t[i, k] = xu
                Vu_t[i, k] = Vu
                lnw[i, k] = lnMi + lnZ[i, k] + ll
        mx = lnw[0, 0]
        for i in range(K):
            for k in range(K):
                if lnw[i, k] > mx:
                    mx = lnw[i, k]
        s = 0.0
        for i in range(K):
            for k in range(K):
                s += np.exp(lnw[i, k] - mx)
        loglik += mx + np.log(s)
        # Collapse the K^2 branches to K moment-matched Gaussians.
        for k in range(K):
            mk = 0.0
            for i in range(K):
                mk += np.exp(lnw[i, k] - mx) / s
            M[t, k] = mk
            xc = np.zeros(rp)
            if mk < 1e-300:
                for i in range(K):
                    xc += xu_t[i, k] / K
            else:
                for i in range(K):
                    xc += (np.exp(lnw[i, k] - mx) / s / mk) * xu_t[i, k]
            Vc = np.zeros((rp, rp))
            for i in range(K):
                wi = 1.0 / K if mk < 1e-300 else np.exp(lnw[i, k] - mx) / s / mk
                d = xu_t[i, k] - xc
                Vc += wi * (Vu_t[i, k] + np.outer(d, d))
            xf[t, k] = xc
            Vf[t, k] = 0.5 * (Vc + Vc.T)
    return OK, 0, loglik, M, xf, Vf


@njit(cache=True)
def smoother_kernel(xf, Vf, Mf, A, Se, Z, r):
    """Kim smoother over the filter's collapsed per-regime moments.

    Returns (Ms, joint, Fm, Vm, Cm): smoothed state probabilities (T,K),
    pairwise posteriors joint[t] = P(S_t, S_{t+1} | y) for t=0..T-2, and the
    regime-marginal smoothed mean (T,rp), covariance (T,rp,rp) and lag-one
    cross-covariance Cm[t] = Cov(F_{t+1}, F_t | y).
    """
    T, K, rp = xf.shape
    Ms = np.zeros((T, K))
    joint = np.zeros((T - 1, K, K))
    Fm = np.zeros((T, rp))
    Vm = np.zeros((T, rp, rp))
    Cm = np.zeros((T - 1, rp, rp))

    xs = xf[T - 1].copy()  # per-regime smoothed moments at the current t
    Vs = Vf[T - 1].copy()
    Ms[T - 1] = Mf[T - 1]
    for j in range(K):
        Fm[T - 1] += Ms[T - 1, j] * xs[j]
    for j in range(K):
        d = xs[j] - Fm[T - 1]
        Vm[T - 1] += Ms[T - 1, j] * (Vs[j] + np.outer(d, d))

    xs_jk = np.empty((K, K, rp))
    Vs_jk = np.empty((K, K, rp, rp))
    Vc_jk = np.empty((K, K, rp, rp))
    for t in range(T - 2, -1, -1):
        # State posteriors: P(S_t=j, S_{t+1}=k | y) via Kim's identity.
        Mpred = Mf[t] @ Z
        ssum = 0.0
        for j in range(K):
            for k in range(K):
                v = Mf[t, j] * Z[j, k] * Ms[t + 1, k] / max(Mpred[k], 1e-300)
                joint[t, j, k] = v
                ssum += v
        ssum = max(ssum, 1e-300)
        for j in range(K):
            mj = 0.0
            for k in range(K):
                joint[t, j, k] /= ssum
                mj += joint[t, j, k]
            Ms[t, j] = mj

        # Per-pair RTS step from the time-t filtered moments.
        for j in range(K):
            for k in range(K):
                xp, Vp = _predict(xf[t, j], Vf[t, j], A[k], Se[k], r)
                # J = Vf A' Vp^-1, computed as solve(Vp, A Vf)'.
                J = np.linalg.solve(Vp, A[k] @ Vf[t, j]).T
                xs_jk[j, k] = xf[t, j] + J @ (xs[k] - xp)
                Vnew = Vf[t, j] + J @ (Vs[k] - Vp) @ J.T
                Vs_jk[j, k] = 0.5 * (Vnew + Vnew.T)
                Vc_jk[j, k] = Vs[k] @ J.T

        # Collapse over the future regime k to per-regime moments at t.
        xs_new = np.zeros((K, rp))
        Vs_new = np.zeros((K, rp, rp))
        for j in range(K):
            denom = max(Ms[t, j], 1e-300)
            for k in range(K):
                xs_new[j] += (joint[t, j, k] / denom) * xs_jk[j, k]
            for k in range(K):
                d = xs_jk[j, k] - xs_new[j]
                Vs_new[j] += (joint[t, j, k] / denom) * (Vs_jk[j, k] + np.outer(d, d))

        # Regime-marginal moments and lag-one cross-covariance.
        for j in range(K):
            Fm[t] += Ms[t, j] * xs_new[j]
        for j in range(K):
            d = xs_new[j] - Fm[t]
            Vm[t] += Ms[t, j] * (Vs_new[j] + np.outer(d, d))
        for j in range(K):
            for k in range(K):
                dk = xs[k] - Fm[t + 1]
                dj = xs_jk[j, k] - Fm[t]
                Cm[t] += joint[t, j, k] * (Vc_jk[j, k] + np.outer(dk, dj))

        xs = xs_new
        Vs = Vs_new
    return Ms, joint, Fm, Vm, Cm
