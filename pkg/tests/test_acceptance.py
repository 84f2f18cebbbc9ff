"""Release gate: ten go/no-go checks over the whole pipeline.

Each test prints a single `criterion NN ...: PASS|FAIL` line (kept visible
through pytest's capture) and then asserts, so a plain `pytest -v` run shows
the verdict per criterion alongside the usual test outcome.
"""

import csv
import time

import numpy as np
import pytest

import oracles
from fsvar import cli
from fsvar.connectivity import coeff_significance, coupled_estimator
from fsvar.factor_pca import estimate_pca, select_num_factors
from fsvar.metrics import state_accuracy
from fsvar.sskf import EMConfig, build_ssm, companion_matrix, em_fit, infer, spectral_radius
from fsvar.tsdata import Dataset, save_csv, standardize


def ds(Y):
    Y = np.asarray(Y, dtype=np.float64)
    return Dataset(values=Y, channel_names=[f"ch{i + 1}" for i in range(Y.shape[1])])


def report(capsys, num, label, ok, detail=""):
    with capsys.disabled():
        line = f"criterion {num:02d} {label}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        print("\n" + line, flush=True)


# --- shared fixtures ---------------------------------------------------------


@pytest.fixture(scope="module")
def bench():
    """Full simulation grid, 20 replications per N in {10,...,100}."""
    t0 = time.perf_counter()
    records = cli.run_benchmark(
        n_list=list(range(10, 101, 10)),
        replications=20,
        methods=["fsvar-coupled", "fsvar-decoupled", "kmeans", "fsvar-skf"],
        seed=7,
        em_max_iters=40,
        em_restarts=3,
        em_tol=1e-4,
        max_r=10,
        threads=1,
    )
    return records, time.perf_counter() - t0


def acc_mean(records, method, N=None):
    vals = [
        r.state_accuracy
        for r in records
        if r.method == method and (N is None or r.N == N) and r.state_accuracy is not None
    ]
    return float(np.mean(vals))


def frob_mean(records, method, N, regime):
    vals = [
        r.frob_sq_error[regime]
        for r in records
        if r.method == method and r.N == N and r.frob_sq_error is not None
    ]
    return float(np.mean(vals))


@pytest.fixture(scope="module")
def em_runs():
    """20 seeded EM fits on well-separated two-regime factor VAR(1) data."""
    phis_true = np.array([
        [[[0.9, 0.0], [0.0, 0.5]]],
        [[[0.2, 0.0], [0.0, -0.6]]],
    ])
    sigs_true = np.array([np.eye(2), np.eye(2)])
    z_true = np.array([[0.98, 0.02], [0.02, 0.98]])
    pi = np.array([0.5, 0.5])
    N, T = 10, 2000
    Q, _ = np.linalg.qr(np.random.default_rng(123).standard_normal((N, 2)))
    noise = np.full(N, 0.01)
    t0 = time.perf_counter()
    runs = []
    for run in range(20):
        rng = np.random.default_rng(1000 + run)
        Y, _, states = oracles.simulate_switching_ssm(
            phis_true, sigs_true, Q, noise, z_true, pi, T, rng
        )
        d = standardize(ds(Y), "demean")
        fm = estimate_pca(d, 2)
        cfg = EMConfig(max_iters=50, loglik_rel_tol=1e-5, n_restarts=2, seed=run)
        m, inf, trace = em_fit(d, 2, 1, fm, cfg)
        _, perm = state_accuracy(inf.decoded_sks, states, 2)
        p = [perm[0] - 1, perm[1] - 1]
        phi_err = max(
            np.abs(m.regime_params[a].phi[0] - phis_true[p[a], 0]).max() for a in range(2)
        )
        z_err = max(
            abs(m.trans[a, b] - z_true[p[a], p[b]]) for a in range(2) for b in range(2)
        )
        runs.append({"phi_err": phi_err, "z_err": z_err, "trace": trace})
    return runs, time.perf_counter() - t0


# --- criteria ----------------------------------------------------------------


def test_criterion_01_benchmark_accuracy_ordering(bench, capsys):
    records, elapsed = bench
    ns = sorted({r.N for r in records})
    margins = {N: acc_mean(records, "fsvar-coupled", N) - acc_mean(records, "kmeans", N) for N in ns}
    overall_sks = acc_mean(records, "fsvar-coupled")
    overall_skf = acc_mean(records, "fsvar-skf")
    ok = (
        all(m > 0 for m in margins.values())
        and overall_sks >= overall_skf
        and elapsed <= 15 * 60
    )
    report(
        capsys, 1, "benchmark accuracy ordering", ok,
        f"min SKS-KM margin {min(margins.values()):+.4f}, "
        f"overall SKS {overall_sks:.4f} vs SKF {overall_skf:.4f}, grid {elapsed:.0f}s",
    )
    assert ok, (margins, overall_sks, overall_skf, elapsed)


def test_criterion_02_benchmark_error_ordering(bench, capsys):
    records, _ = bench
    ns = sorted({r.N for r in records})
    variants = ("fsvar-coupled", "fsvar-decoupled")
    level_ok = all(
        frob_mean(records, v, N, reg) < frob_mean(records, "kmeans", N, reg)
        for v in variants
        for N in ns
        if N >= 50
        for reg in (0, 1)
    )
    ratios = {
        m: [frob_mean(records, m, 100, reg) / frob_mean(records, m, 10, reg) for reg in (0, 1)]
        for m in (*variants, "kmeans")
    }
    growth_ok = all(r > 1.0 for r in ratios["kmeans"]) and all(
        ratios["kmeans"][reg] > ratios[v][reg] for v in variants for reg in (0, 1)
    )
    ok = level_ok and growth_ok
    report(
        capsys, 2, "benchmark error ordering", ok,
        "err(100)/err(10) per regime: "
        + ", ".join(f"{m} {ratios[m][0]:.0f}/{ratios[m][1]:.0f}" for m in ratios),
    )
    assert ok, ratios


def test_criterion_03_single_regime_oracle(capsys):
    worst = {"loglik": 0.0, "mean": 0.0, "cov": 0.0, "cross": 0.0}
    for i in range(10):
        rng = np.random.default_rng(7000 + i)
        r = int(rng.integers(1, 4))
        P = int(rng.integers(1, 3))
        N = int(rng.integers(max(r, 3), 9))
        T = int(rng.integers(50, 201))
        phi = rng.uniform(-0.5, 0.5, size=(P, r, r))
        while spectral_radius(companion_matrix(phi)) >= 0.9:
            phi *= 0.9
        L = rng.standard_normal((r, r)) * 0.4
        sigma = L @ L.T + 0.3 * np.eye(r)
        Q, _ = np.linalg.qr(rng.standard_normal((N, r)))
        noise = rng.uniform(0.1, 0.5, size=N)
        m = build_ssm(Q, noise, phi[None], sigma[None], np.array([[1.0]]))
        Y, _, _ = oracles.simulate_switching_ssm(
            phi[None], sigma[None], Q, noise, np.array([[1.0]]), np.array([1.0]), T, rng
        )
        n = r * P
        Sw = np.zeros((n, n))
        Sw[:r, :r] = sigma
        ref = oracles.plain_kalman(
            Y, companion_matrix(phi), Sw, m.obs_map, noise, m.init_mean, m.init_cov
        )
        inf = infer(m, ds(Y))
        worst["loglik"] = max(worst["loglik"], abs(inf.loglik - ref["loglik"]))
        worst["mean"] = max(worst["mean"], np.abs(inf.smoothed_means - ref["smoothed_means"]).max())
        worst["cov"] = max(worst["cov"], np.abs(inf.smoothed_covs - ref["smoothed_covs"]).max())
        worst["cross"] = max(
            worst["cross"], np.abs(inf.smoothed_crosscovs - ref["crosscovs"]).max()
        )
    ok = all(v <= 1e-8 for v in worst.values())
    report(
        capsys, 3, "single-regime reduction matches plain KF/RTS", ok,
        "max diffs " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()),
    )
    assert ok, worst


def test_criterion_04_enumeration_oracle(capsys):
    phis = np.array([[[[0.9]]], [[[0.0]]]])
    sigs = np.array([[[1.0]], [[0.05]]])
    Z = np.array([[0.95, 0.05], [0.05, 0.95]])
    pi = np.array([0.5, 0.5])
    Qm = np.array([[1.0]])
    noise = np.array([0.1])
    m = build_ssm(Qm, noise, phis, sigs, Z, init_state_probs=pi)
    As = [companion_matrix(p) for p in phis]
    worst_tv = 0.0
    min_odds = np.inf
    n_gated = 0
    decode_ok = True
    for T in (4, 6, 8):
        for seed in (2, 12, 30):
            rng = np.random.default_rng(seed)
            Y, _, _ = oracles.simulate_switching_ssm(phis, sigs, Qm, noise, Z, pi, T, rng)
            inf = infer(m, ds(Y))
            ref = oracles.enumeration_posterior(
                Y, As, list(sigs), Qm, noise, m.init_mean, m.init_cov, Z, pi
            )
            marg = ref["marginals"]
            tv = 0.5 * np.abs(inf.smoothed_probs - marg).sum(axis=1).max()
            worst_tv = max(worst_tv, tv)
            odds = float(
                (marg.max(axis=1) / np.maximum(marg.min(axis=1), 1e-300)).min()
            )
            min_odds = min(min_odds, odds)
            if odds >= 10.0:
                n_gated += 1
                decode_ok &= bool(
                    np.array_equal(inf.decoded_sks, np.argmax(marg, axis=1) + 1)
                )
    ok = worst_tv <= 0.05 and decode_ok and n_gated == 9
    report(
        capsys, 4, "switching posterior matches path enumeration", ok,
        f"max TV {worst_tv:.4f}, min per-step odds {min_odds:.1f}, "
        f"decode match on {n_gated}/9 decisive designs",
    )
    assert ok, (worst_tv, min_odds, n_gated, decode_ok)


def test_criterion_05_em_recovery(em_runs, capsys):
    runs, elapsed = em_runs
    hits = sum(1 for r in runs if r["phi_err"] <= 0.1 and r["z_err"] <= 0.05)
    ok = hits >= 16 and elapsed <= 120
    report(
        capsys, 5, "EM recovers dynamics and transitions", ok,
        f"{hits}/20 runs within tolerance, {elapsed:.0f}s",
    )
    assert ok, (hits, elapsed, [(r["phi_err"], r["z_err"]) for r in runs])


def test_criterion_06_em_progress(em_runs, capsys):
    runs, _ = em_runs
    final_ok = sum(1 for r in runs if r["trace"][-1] >= r["trace"][0])
    worst_drop = 0.0
    for r in runs:
        tr = r["trace"]
        for a, b in zip(tr, tr[1:]):
            if b < a:
                worst_drop = max(worst_drop, (a - b) / max(abs(a), 1.0))
    ok = final_ok == len(runs) and worst_drop <= 1e-6
    report(
        capsys, 6, "EM log-likelihood progress", ok,
        f"final>=initial in {final_ok}/{len(runs)}, worst relative drop {worst_drop:.1e}",
    )
    assert ok, (final_ok, worst_drop)


def test_criterion_07_pca_bic_selection(capsys):
    N, T, r_true = 100, 200, 3
    t0 = time.perf_counter()
    hits = 0
    worst_orth = 0.0
    for rep in range(50):
        rng = np.random.default_rng(5000 + rep)
        Q, _ = np.linalg.qr(rng.standard_normal((N, r_true)))
        f = rng.standard_normal((T, r_true)) * np.sqrt(10.0)
        Y = f @ Q.T + rng.standard_normal((T, N))
        d = ds(Y)
        r_hat, _ = select_num_factors(d, 8)
        hits += r_hat == r_true
        fm = estimate_pca(d, r_hat)
        worst_orth = max(
            worst_orth,
            np.abs(fm.loadings.T @ fm.loadings - np.eye(fm.r)).max(),
        )
    elapsed = time.perf_counter() - t0
    ok = worst_orth <= 1e-10 and hits >= 45 and elapsed <= 60
    report(
        capsys, 7, "PCA orthonormality and BIC factor count", ok,
        f"r=3 picked {hits}/50, max |Q'Q-I| {worst_orth:.1e}, {elapsed:.0f}s",
    )
    assert ok, (hits, worst_orth, elapsed)


def test_criterion_08_significance_calibration(capsys):
    N, T, n_reps, B, r_blk = 20, 1000, 200, 10, 3
    off_block = np.ones((N, N), dtype=bool)
    off_block[:B, :B] = False
    off_block[B:, B:] = False
    t0 = time.perf_counter()
    hits = 0
    for rep in range(n_reps):
        rng = np.random.default_rng(42000 + rep)
        # Block-supported loadings and block-diagonal factor dynamics make
        # the projected off-block coefficients exact zeros under the null.
        Q = np.zeros((N, 2 * r_blk))
        Q[:B, :r_blk], _ = np.linalg.qr(rng.standard_normal((B, r_blk)))
        Q[B:, r_blk:], _ = np.linalg.qr(rng.standard_normal((B, r_blk)))
        phi_f = np.zeros((2 * r_blk, 2 * r_blk))
        for s in (slice(0, r_blk), slice(r_blk, 2 * r_blk)):
            M = rng.uniform(-0.45, 0.45, size=(r_blk, r_blk))
            while np.max(np.abs(np.linalg.eigvals(M))) >= 0.7:
                M *= 0.9
            phi_f[s, s] = M
        r = 2 * r_blk
        Y, _, _ = oracles.simulate_switching_ssm(
            phi_f[None, None], np.eye(r)[None], Q, np.full(N, 0.1),
            np.eye(1), np.array([1.0]), T, rng,
        )
        d = standardize(ds(Y), "demean")
        r_hat, _ = select_num_factors(d, 12)
        fm = estimate_pca(d, r_hat)
        cfg = EMConfig(max_iters=30, loglik_rel_tol=1e-5, n_restarts=1, seed=rep)
        m, inf, _ = em_fit(d, 1, 1, fm, cfg)
        rc = coeff_significance(coupled_estimator(fm, m, inf), [T], alpha=0.05)
        if np.any(rc.per_regime[0].significant_mask[0] & off_block):
            hits += 1
    elapsed = time.perf_counter() - t0
    fwer = hits / n_reps
    ok = fwer <= 0.10 and elapsed <= 300
    report(
        capsys, 8, "family-wise error on true-zero coefficients", ok,
        f"FWER {hits}/{n_reps} = {fwer:.3f} at alpha=0.05, {elapsed:.0f}s",
    )
    assert ok, (fwer, elapsed)


def test_criterion_09_cli_determinism(tmp_path, capsys):
    diffs = []

    def twin_dirs(tag, argv_fn):
        outs = []
        for side in ("a", "b"):
            out = tmp_path / f"{tag}-{side}"
            code = cli.main(argv_fn(out))
            assert code == 0, tag
            outs.append(out)
        return outs

    def same_bytes(tag, pa, pb):
        if pa.read_bytes() != pb.read_bytes():
            diffs.append(f"{tag}/{pa.name}")

    sim_a, sim_b = twin_dirs(
        "sim",
        lambda out: ["simulate", "--out-dir", str(out), "--n", "10",
                     "--block-length", "30", "--n-blocks", "2", "--seed", "11"],
    )
    for name in ("dataset.csv", "truth.json"):
        same_bytes("simulate", sim_a / name, sim_b / name)

    fit_a, fit_b = twin_dirs(
        "fit",
        lambda out: ["fit", "--input", str(sim_a / "dataset.csv"), "--out-dir", str(out),
                     "--r", "2", "--k", "2", "--max-iters", "5", "--restarts", "1",
                     "--seed", "0"],
    )
    fit_names = sorted(p.name for p in fit_a.iterdir())
    assert fit_names == sorted(p.name for p in fit_b.iterdir())
    for name in fit_names:
        same_bytes("fit", fit_a / name, fit_b / name)

    ben_a, ben_b = twin_dirs(
        "bench",
        lambda out: ["benchmark", "--out-dir", str(out), "--n-list", "10",
                     "--replications", "2", "--seed", "3",
                     "--methods", "kmeans,fsvar-coupled,fsvar-skf",
                     "--em-max-iters", "10", "--em-restarts", "1"],
    )

    def rows_without_runtime(path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        drop = rows[0].index("runtime_ms")
        return [[v for j, v in enumerate(row) if j != drop] for row in rows]

    # runtime_ms is wall-clock measurement, not model output; all numeric
    # estimates must still agree to the last printed digit
    if rows_without_runtime(ben_a / "records.csv") != rows_without_runtime(ben_b / "records.csv"):
        diffs.append("benchmark/records.csv")

    rep_a, rep_b = twin_dirs(
        "report",
        lambda out: ["report", "--records", str(ben_a / "records.csv"), "--out-dir", str(out)],
    )
    for name in ("summary.csv", "accuracy.svg", "frob_regime1.svg", "frob_regime2.svg"):
        same_bytes("report", rep_a / name, rep_b / name)

    ok = not diffs
    report(
        capsys, 9, "seeded CLI reruns are byte-identical", ok,
        "all subcommands" if ok else "mismatch: " + ", ".join(diffs),
    )
    assert ok, diffs


def test_criterion_10_workflow_smoke(tmp_path, capsys):
    rng = np.random.default_rng(99)
    N, T, r_true, K = 90, 1970, 5, 3
    Q, _ = np.linalg.qr(rng.standard_normal((N, r_true)))
    phis = []
    for _ in range(K):
        phi = rng.uniform(-0.5, 0.5, size=(1, r_true, r_true))
        while spectral_radius(companion_matrix(phi)) >= 0.9:
            phi *= 0.9
        phis.append(phi)
    phis = np.stack(phis)
    sigs = np.stack([np.eye(r_true)] * K)
    Z = np.full((K, K), 0.02)
    np.fill_diagonal(Z, 0.96)
    pi = np.full(K, 1.0 / K)
    noise = np.full(N, 0.3)
    Y, _, _ = oracles.simulate_switching_ssm(phis, sigs, Q, noise, Z, pi, T, rng)
    d = Dataset(values=Y, channel_names=[f"roi{i + 1}" for i in range(N)])
    data_csv = tmp_path / "data.csv"
    save_csv(d, data_csv)

    out = tmp_path / "out"
    code = cli.main([
        "fit", "--input", str(data_csv), "--out-dir", str(out),
        "--r", "14", "--k", "3", "--p", "1",
        "--max-iters", "8", "--restarts", "1", "--seed", "0",
    ])
    rank_ok = probs_ok = False
    max_rank_sv = np.nan
    if code == 0:
        svs = []
        for j in (1, 2, 3):
            with open(out / f"connectivity_regime{j}_lag1.csv", newline="") as fh:
                rows = list(csv.reader(fh))
            phi_y = np.array([[float(v) for v in row] for row in rows[1:]])
            assert phi_y.shape == (N, N)
            svs.append(np.linalg.svd(phi_y, compute_uv=False)[14:].max())
        max_rank_sv = max(svs)
        rank_ok = max_rank_sv < 1e-8
        with open(out / "smoothed_probs.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        probs = np.array([[float(v) for v in row] for row in rows[1:]])
        probs_ok = probs.shape == (T, K) and np.allclose(probs.sum(axis=1), 1.0, atol=1e-8)
    ok = code == 0 and rank_ok and probs_ok
    report(
        capsys, 10, "90-channel workflow smoke test", ok,
        f"exit {code}, rank-15+ singular value {max_rank_sv:.1e}, "
        f"probs valid {probs_ok}",
    )
    assert ok, (code, rank_ok, probs_ok)
