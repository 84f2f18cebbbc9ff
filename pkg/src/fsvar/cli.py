"""Command-line pipeline: simulate, fit, benchmark, report."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import baseline, connectivity, factor_pca, metrics, simgen, sskf, tsdata

_FLOAT_FMT = "%.15g"
_DEFAULT_N_LIST = list(range(10, 101, 10))
_ALL_METHODS = ("fsvar-coupled", "fsvar-decoupled", "kmeans", "fsvar-skf")
_DEFAULT_METHODS = ("fsvar-coupled", "fsvar-decoupled", "kmeans")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return _FLOAT_FMT % v
    return str(v)


def _write_csv(path, header, rows, created=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else _fmt(v) for v in row])
    if created is not None:
        created.append(path)


def _write_json(path, obj, created=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
    if created is not None:
        created.append(path)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# --- argument handling --------------------------------------------------


class _Resolver:
    """CLI flag > config-file entry > built-in default."""

    def __init__(self, args, defaults: dict):
        self.args = args
        self.defaults = defaults
        self.config = {}
        if getattr(args, "config", None):
            with open(args.config, encoding="utf-8") as fh:
                self.config = json.load(fh)

    def __call__(self, key: str):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.config:
            return self.config[key]
        return self.defaults[key]


def _add_shared(p):
    p.add_argument("--seed", type=int, default=None, help="base RNG seed (default 0)")
    p.add_argument("--out-dir", default=None, help="output directory (default .)")
    p.add_argument("--config", default=None, help="JSON config file; flags win")
    p.add_argument("--threads", type=int, default=None, help="parallel workers (default 1)")


def _parse_list(s, cast):
    if isinstance(s, (list, tuple)):
        return [cast(v) for v in s]
    return [cast(v) for v in str(s).split(",") if v != ""]


# --- simulate -----------------------------------------------------------

_SIM_DEFAULTS = dict(
    seed=0, out_dir=".", threads=1, n=10, k=2, block_size=10,
    coeff_ranges="0.4,0.2", noise_var=0.5, block_length=50, n_blocks=4,
)


def cmd_simulate(args) -> int:
    get = _Resolver(args, _SIM_DEFAULTS)
    out = Path(get("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    scen = simgen.SimScenario(
        N=int(get("n")),
        K=int(get("k")),
        block_size=int(get("block_size")),
        coeff_ranges=_parse_list(get("coeff_ranges"), float),
        noise_var=float(get("noise_var")),
        block_length=int(get("block_length")),
        n_blocks=int(get("n_blocks")),
        seed=int(get("seed")),
    )
    d, truth = simgen.simulate_switching_var(scen)
    tsdata.save_csv(d, out / "dataset.csv")
    _write_json(
        out / "truth.json",
        {
            "coeff_matrices": truth.coeff_matrices.tolist(),
            "state_sequence": truth.state_sequence.tolist(),
            "change_points": truth.change_points,
            "scenario": {
                "N": scen.N, "K": scen.K, "P": scen.P,
                "block_size": scen.block_size,
                "coeff_ranges": list(scen.coeff_ranges),
                "noise_var": scen.noise_var,
                "block_length": scen.block_length,
                "n_blocks": scen.n_blocks, "seed": scen.seed,
            },
        },
    )
    return 0


# --- fit ----------------------------------------------------------------

_FIT_DEFAULTS = dict(
    seed=0, out_dir=".", threads=1, r=None, max_r=20, k=2, p=1,
    standardize="demean", variant="coupled", alpha=0.05, tau=0.03,
    max_iters=100, tol=1e-5, restarts=5, sticky=0.95,
)


def cmd_fit(args) -> int:
    get = _Resolver(args, _FIT_DEFAULTS)
    out = Path(get("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    created: list = []
    try:
        return _fit_pipeline(args, get, out, created)
    except Exception:
        for path in created:
            Path(path).unlink(missing_ok=True)
        raise


def _fit_pipeline(args, get, out, created) -> int:
    d = tsdata.load_csv(args.input, has_header=not args.no_header)
    mode = get("standardize")
    if mode != "none":
        d = tsdata.standardize(d, mode)

    # Step 1: PCA factor model, BIC factor count unless --r given.
    r = get("r")
    bic_values = None
    if r is None:
        max_r = min(int(get("max_r")), d.N, d.T)
        r, bic_values = factor_pca.select_num_factors(d, max_r)
    r = int(r)
    fm = factor_pca.estimate_pca(d, r)
    _write_json(
        out / "step1.json",
        {"r": r, "bic_values": bic_values, "eigenvalues": fm.eigenvalues.tolist()},
        created,
    )
    _write_csv(
        out / "loadings.csv",
        ["channel"] + [f"f{a + 1}" for a in range(r)],
        [[d.channel_names[i]] + list(fm.loadings[i]) for i in range(d.N)],
        created,
    )
    _write_csv(
        out / "factors.csv",
        [f"f{a + 1}" for a in range(r)],
        fm.factors.tolist(),
        created,
    )
    if args.step1_only:
        return 0

    # Step 2: EM over the switching factor VAR.
    K, P = int(get("k")), int(get("p"))
    cfg = sskf.EMConfig(
        max_iters=int(get("max_iters")),
        loglik_rel_tol=float(get("tol")),
        n_restarts=int(get("restarts")),
        seed=int(get("seed")),
        init_sticky_prob=float(get("sticky")),
    )
    model, inf, trace = sskf.em_fit(d, K, P, fm, cfg)
    _write_json(
        out / "model.json",
        {
            "k": K, "p": P, "r": r,
            "regime_params": [
                {
                    "phi": rp.phi.tolist(),
                    "state_noise_cov": rp.state_noise_cov.tolist(),
                }
                for rp in model.regime_params
            ],
            "trans": model.trans.tolist(),
            "init_state_probs": model.init_state_probs.tolist(),
            "loglik_trace": trace,
            "decoded_skf": inf.decoded_skf.tolist(),
            "decoded_sks": inf.decoded_sks.tolist(),
        },
        created,
    )
    _write_csv(
        out / "smoothed_probs.csv",
        [f"state{j + 1}" for j in range(K)],
        inf.smoothed_probs.tolist(),
        created,
    )

    # Step 3: connectivity, significance, thresholded graph.
    variant = get("variant")
    if variant == "coupled":
        rc = connectivity.coupled_estimator(fm, model, inf)
    elif variant == "decoupled":
        rc = connectivity.decoupled_estimator(d, inf.decoded_sks, r, P, n_regimes=K)
    else:
        raise ValueError(f"unknown variant: {variant!r}")
    t_regime = np.maximum(
        np.bincount(inf.decoded_sks - 1, minlength=K).astype(float), 1.0
    )
    alpha, tau = float(get("alpha")), float(get("tau"))
    rc = connectivity.coeff_significance(rc, t_regime, alpha)
    graphs = connectivity.threshold_graph(rc, tau, include_self=args.include_self)

    regime_files = {}
    for j, conn in enumerate(rc.per_regime):
        for l in range(P):
            name = f"connectivity_regime{j + 1}_lag{l + 1}.csv"
            _write_csv(out / name, d.channel_names, conn.phi_y[l].tolist(), created)
            regime_files[f"regime{j + 1}_lag{l + 1}"] = name
    _write_json(
        out / "connectivity_meta.json",
        {
            "variant": rc.variant,
            "direction": "column_to_row",
            "alpha": alpha,
            "n_tests": rc.n_tests,
            "tau": tau,
            "t_regime": t_regime.tolist(),
            "regime_files": regime_files,
        },
        created,
    )
    edge_rows = []
    graph_summary = {}
    for j, conn in enumerate(rc.per_regime):
        for l in range(P):
            over = np.abs(conn.phi_y[l]) > tau
            if not args.include_self:
                np.fill_diagonal(over, False)
            for i, c in zip(*np.nonzero(over)):
                edge_rows.append(
                    [
                        j + 1,
                        d.channel_names[c],
                        d.channel_names[i],
                        l + 1,
                        conn.phi_y[l, i, c],
                        conn.t_stats[l, i, c],
                        conn.p_values[l, i, c],
                        int(conn.significant_mask[l, i, c]),
                    ]
                )
        graph_summary[f"regime{j + 1}"] = {
            "n_edges": len(graphs[j]),
            "edges": [[e.source, e.target, e.lag] for e in graphs[j]],
        }
    _write_csv(
        out / "edges.csv",
        ["regime", "from", "to", "lag", "weight", "t", "p", "significant"],
        edge_rows,
        created,
    )
    _write_json(out / "graph.json", graph_summary, created)
    return 0


# --- benchmark ----------------------------------------------------------

_BENCH_DEFAULTS = dict(
    seed=0, out_dir=".", threads=1, n_list=",".join(map(str, _DEFAULT_N_LIST)),
    replications=100, methods=",".join(_DEFAULT_METHODS), k=2, block_size=10,
    coeff_ranges="0.4,0.2", noise_var=0.5, block_length=50, n_blocks=4,
    window=30, shift=1, ridge=0.1, kmeans_restarts=10,
    em_max_iters=40, em_restarts=3, em_tol=1e-4, max_r=10,
)


def _benchmark_cell(payload: dict) -> list[metrics.BenchmarkRecord]:
    """One (N, replication) cell: simulate, fit requested methods, score."""
    N = payload["N"]
    rep = payload["rep"]
    methods = payload["methods"]
    K = payload["k"]
    ss = np.random.SeedSequence([payload["seed"], N, rep])
    sim_seed, em_seed, km_seed = (int(c.generate_state(1, np.uint32)[0]) for c in ss.spawn(3))
    scen = simgen.SimScenario(
        N=N, K=K, block_size=payload["block_size"],
        coeff_ranges=payload["coeff_ranges"], noise_var=payload["noise_var"],
        block_length=payload["block_length"], n_blocks=payload["n_blocks"],
        seed=sim_seed,
    )
    d, truth = simgen.simulate_switching_var(scen)
    d = tsdata.standardize(d, "demean")
    records: list[metrics.BenchmarkRecord] = []

    def missing(method, why):
        print(f"warning: N={N} rep={rep} {method}: {why}", file=sys.stderr)
        records.append(metrics.BenchmarkRecord(N, method, rep, None, None, None))

    fsvar_methods = [m for m in methods if m.startswith("fsvar")]
    if fsvar_methods:
        try:
            t0 = time.perf_counter()
            # Fixed subspace dimension, not BIC: the simulated VAR is full
            # rank, so the BIC curve has no interior optimum there (it lands
            # on r=1 or the cap, and r ~ N collapses the PCA residual that
            # serves as observation noise). min(max_r, N//2) keeps the state
            # space well-conditioned at small N and bounded at large N.
            r = min(payload["max_r"], max(N // 2, 1), d.T - 1)
            fm = factor_pca.estimate_pca(d, r)
            cfg = sskf.EMConfig(
                max_iters=payload["em_max_iters"],
                loglik_rel_tol=payload["em_tol"],
                n_restarts=payload["em_restarts"],
                seed=em_seed,
            )
            model, inf, _ = sskf.em_fit(d, K, 1, fm, cfg)
            t_shared = time.perf_counter() - t0
            acc_sks, perm = metrics.state_accuracy(inf.decoded_sks, truth.state_sequence, K)
        except Exception as exc:  # noqa: BLE001 - record and continue the grid
            for m in fsvar_methods:
                missing(m, repr(exc))
        else:
            if "fsvar-coupled" in methods:
                t0 = time.perf_counter()
                rc = connectivity.coupled_estimator(fm, model, inf)
                est = [rc.per_regime[j].phi_y[0] for j in range(K)]
                errs = metrics.aligned_frob_errors(est, truth.coeff_matrices, perm)
                records.append(
                    metrics.BenchmarkRecord(
                        N, "fsvar-coupled", rep, acc_sks, errs,
                        (t_shared + time.perf_counter() - t0) * 1e3,
                    )
                )
            if "fsvar-decoupled" in methods:
                t0 = time.perf_counter()
                try:
                    rc = connectivity.decoupled_estimator(d, inf.decoded_sks, r, 1, n_regimes=K)
                except Exception as exc:  # noqa: BLE001
                    missing("fsvar-decoupled", repr(exc))
                else:
                    est = [rc.per_regime[j].phi_y[0] for j in range(K)]
                    errs = metrics.aligned_frob_errors(est, truth.coeff_matrices, perm)
                    records.append(
                        metrics.BenchmarkRecord(
                            N, "fsvar-decoupled", rep, acc_sks, errs,
                            (t_shared + time.perf_counter() - t0) * 1e3,
                        )
                    )
            if "fsvar-skf" in methods:
                acc_skf, _ = metrics.state_accuracy(inf.decoded_skf, truth.state_sequence, K)
                records.append(
                    metrics.BenchmarkRecord(N, "fsvar-skf", rep, acc_skf, None, t_shared * 1e3)
                )
    if "kmeans" in methods:
        try:
            t0 = time.perf_counter()
            bf = baseline.fit_kmeans_baseline(
                d, K, window=payload["window"], shift=payload["shift"],
                ridge=payload["ridge"], P=1,
                n_init=payload["kmeans_restarts"], seed=km_seed,
            )
            dt = time.perf_counter() - t0
            acc, perm = metrics.state_accuracy(
                bf.kmeans.expanded_labels, truth.state_sequence, K
            )
            est = [bf.coeff_matrices[j, 0] for j in range(K)]
            errs = metrics.aligned_frob_errors(est, truth.coeff_matrices, perm)
            records.append(
                metrics.BenchmarkRecord(N, "kmeans", rep, acc, errs, dt * 1e3)
            )
        except Exception as exc:  # noqa: BLE001
            missing("kmeans", repr(exc))
    order = {m: i for i, m in enumerate(_ALL_METHODS)}
    records.sort(key=lambda rec: order[rec.method])
    return records


def run_benchmark(
    n_list, replications: int, methods, seed: int = 0, k: int = 2,
    block_size: int = 10, coeff_ranges=(0.4, 0.2), noise_var: float = 0.5,
    block_length: int = 50, n_blocks: int = 4, window: int = 30,
    shift: int = 1, ridge: float = 0.1, kmeans_restarts: int = 10,
    em_max_iters: int = 40, em_restarts: int = 3, em_tol: float = 1e-4,
    max_r: int = 10, threads: int = 1,
) -> list[metrics.BenchmarkRecord]:
    """Simulation benchmark grid; per-cell seeds derive from (seed, N, rep)
    so results are independent of scheduling and method subsets."""
    for m in methods:
        if m not in _ALL_METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {_ALL_METHODS}")
    payloads = [
        dict(
            N=N, rep=rep, methods=tuple(methods), seed=seed, k=k,
            block_size=block_size, coeff_ranges=tuple(coeff_ranges),
            noise_var=noise_var, block_length=block_length, n_blocks=n_blocks,
            window=window, shift=shift, ridge=ridge,
            kmeans_restarts=kmeans_restarts, em_max_iters=em_max_iters,
            em_restarts=em_restarts, em_tol=em_tol, max_r=max_r,
        )
        for N in n_list
        for rep in range(replications)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_benchmark_cell, payloads))
    else:
        chunks = [_benchmark_cell(p) for p in payloads]
    return [rec for chunk in chunks for rec in chunk]


def write_records_csv(path, records: list[metrics.BenchmarkRecord]) -> None:
    n_reg = max((len(r.frob_sq_error) for r in records if r.frob_sq_error), default=0)
    header = ["n", "method", "replication", "state_accuracy"]
    header += [f"frob_regime{j + 1}" for j in range(n_reg)]
    header += ["runtime_ms"]
    rows = []
    for rec in records:
        frob = list(rec.frob_sq_error) if rec.frob_sq_error else []
        frob += [None] * (n_reg - len(frob))
        rows.append(
            [rec.N, rec.method, rec.replication, rec.state_accuracy, *frob, rec.runtime_ms]
        )
    _write_csv(path, header, rows)


def cmd_benchmark(args) -> int:
    get = _Resolver(args, _BENCH_DEFAULTS)
    out = Path(get("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    records = run_benchmark(
        n_list=_parse_list(get("n_list"), int),
        replications=int(get("replications")),
        methods=_parse_list(get("methods"), str),
        seed=int(get("seed")),
        k=int(get("k")),
        block_size=int(get("block_size")),
        coeff_ranges=_parse_list(get("coeff_ranges"), float),
        noise_var=float(get("noise_var")),
        block_length=int(get("block_length")),
        n_blocks=int(get("n_blocks")),
        window=int(get("window")),
        shift=int(get("shift")),
        ridge=float(get("ridge")),
        kmeans_restarts=int(get("kmeans_restarts")),
        em_max_iters=int(get("em_max_iters")),
        em_restarts=int(get("em_restarts")),
        em_tol=float(get("em_tol")),
        max_r=int(get("max_r")),
        threads=int(get("threads")),
    )
    write_records_csv(out / "records.csv", records)
    return 0


# --- report -------------------------------------------------------------


def _read_records(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"empty records file: {path}")
        frob_cols = [c for c in reader.fieldnames if c.startswith("frob_regime")]
        rows = list(reader)
    if not rows:
        raise ValueError(f"no records in {path}")
    return rows, frob_cols


def _mean_sd(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return None, None
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def cmd_report(args) -> int:
    get = _Resolver(args, dict(seed=0, out_dir=".", threads=1))
    out = Path(get("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    rows, frob_cols = _read_records(args.records)
    ns = sorted({int(r["n"]) for r in rows})
    method_order = [m for m in _ALL_METHODS if any(r["method"] == m for r in rows)]
    method_order += sorted({r["method"] for r in rows} - set(method_order))

    header = ["n", "method", "n_reps", "acc_mean", "acc_sd"]
    for c in frob_cols:
        header += [f"{c}_mean", f"{c}_sd"]
    summary_rows = []
    acc_series = {m: {} for m in method_order}
    frob_series = {c: {m: {} for m in method_order} for c in frob_cols}
    for m in method_order:
        for n in ns:
            cell = [r for r in rows if r["method"] == m and int(r["n"]) == n]
            accs = [float(r["state_accuracy"]) for r in cell if r["state_accuracy"]]
            row = [n, m, len(accs)]
            mean, sd = _mean_sd(accs)
            row += [mean, sd]
            if mean is not None:
                acc_series[m][n] = (mean, sd)
            for c in frob_cols:
                vals = [float(r[c]) for r in cell if r.get(c)]
                fmean, fsd = _mean_sd(vals)
                row += [fmean, fsd]
                if fmean is not None:
                    frob_series[c][m][n] = (fmean, fsd)
            summary_rows.append(row)
    _write_csv(out / "summary.csv", header, summary_rows)

    _svg_line_chart(
        out / "accuracy.svg", ns, acc_series,
        "State classification accuracy", "N", "accuracy",
    )
    for c in frob_cols:
        _svg_line_chart(
            out / f"{c}.svg", ns, frob_series[c],
            f"Frobenius squared error ({c.replace('frob_', '')})", "N", "error",
        )
    return 0


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _svg_line_chart(path, xs, series: dict, title, xlabel, ylabel):
    """Minimal SVG line chart with error bars; one polyline per series."""
    W, H = 640, 440
    ml, mr, mt, mb = 70, 160, 40, 50
    pw, ph = W - ml - mr, H - mt - mb
    pts = [
        (x, m, s)
        for data in series.values()
        for x, (m, s) in data.items()
    ]
    if not pts:
        ylo, yhi = 0.0, 1.0
    else:
        ylo = min(m - (s or 0) for _, m, s in pts)
        yhi = max(m + (s or 0) for _, m, s in pts)
        if yhi <= ylo:
            yhi = ylo + 1.0
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = min(xs), max(xs)
    if xhi <= xlo:
        xhi = xlo + 1

    def X(x):
        return ml + pw * (x - xlo) / (xhi - xlo)

    def Y(y):
        return mt + ph * (1 - (y - ylo) / (yhi - ylo))

    e = []
    e.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">'
    )
    e.append(f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="15">{title}</text>')
    e.append(
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>'
    )
    for i in range(5):
        yv = ylo + (yhi - ylo) * i / 4
        e.append(
            f'<line x1="{ml - 4}" y1="{Y(yv):.1f}" x2="{ml}" y2="{Y(yv):.1f}" stroke="#333"/>'
        )
        e.append(
            f'<text x="{ml - 8}" y="{Y(yv) + 4:.1f}" text-anchor="end">{yv:.4g}</text>'
        )
    for x in xs:
        e.append(
            f'<line x1="{X(x):.1f}" y1="{mt + ph}" x2="{X(x):.1f}" y2="{mt + ph + 4}" stroke="#333"/>'
        )
        e.append(
            f'<text x="{X(x):.1f}" y="{mt + ph + 18}" text-anchor="middle">{x:g}</text>'
        )
    e.append(
        f'<text x="{ml + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{xlabel}</text>'
    )
    e.append(
        f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{ylabel}</text>'
    )
    for si, (label, data) in enumerate(series.items()):
        color = _PALETTE[si % len(_PALETTE)]
        coords = [(X(x), Y(m), s, x) for x, (m, s) in sorted(data.items())]
        if not coords:
            continue
        pl = " ".join(f"{px:.1f},{py:.1f}" for px, py, _, _ in coords)
        e.append(f'<polyline points="{pl}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for px, py, s, x in coords:
            e.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" fill="{color}"/>')
            if s:
                m = data[x][0]
                e.append(
                    f'<line x1="{px:.1f}" y1="{Y(m - s):.1f}" x2="{px:.1f}" '
                    f'y2="{Y(m + s):.1f}" stroke="{color}"/>'
                )
        ly = mt + 16 + 18 * si
        e.append(
            f'<line x1="{W - mr + 10}" y1="{ly - 4}" x2="{W - mr + 30}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        e.append(f'<text x="{W - mr + 36}" y="{ly}">{label}</text>')
    e.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(e) + "\n")


# --- entry point --------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(prog="fsvar", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="generate switching block-VAR data")
    _add_shared(p)
    p.add_argument("--n", type=int, default=None, help="dimension (default 10)")
    p.add_argument("--k", type=int, default=None, help="number of states (default 2)")
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--coeff-ranges", default=None, help="comma list, one per state")
    p.add_argument("--noise-var", type=float, default=None)
    p.add_argument("--block-length", type=int, default=None)
    p.add_argument("--n-blocks", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="three-step pipeline on a CSV")
    _add_shared(p)
    p.add_argument("--input", required=True)
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--r", type=int, default=None, help="factor count (default: BIC)")
    p.add_argument("--auto-r", action="store_true", help="select r by BIC (default)")
    p.add_argument("--max-r", type=int, default=None, help="BIC search cap (default 20)")
    p.add_argument("--k", type=int, default=None, help="regimes (default 2)")
    p.add_argument("--p", type=int, default=None, help="VAR order (default 1)")
    p.add_argument("--standardize", choices=["none", "demean", "zscore"], default=None)
    p.add_argument("--step1-only", action="store_true")
    p.add_argument("--variant", choices=["coupled", "decoupled"], default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--include-self", action="store_true")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--sticky", type=float, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", help="simulation study grid")
    _add_shared(p)
    p.add_argument("--n-list", default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--methods", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--coeff-ranges", default=None)
    p.add_argument("--noise-var", type=float, default=None)
    p.add_argument("--block-length", type=int, default=None)
    p.add_argument("--n-blocks", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--shift", type=int, default=None)
    p.add_argument("--lambda", dest="ridge", type=float, default=None)
    p.add_argument("--kmeans-restarts", type=int, default=None)
    p.add_argument("--em-max-iters", type=int, default=None)
    p.add_argument("--em-restarts", type=int, default=None)
    p.add_argument("--em-tol", type=float, default=None)
    p.add_argument(
        "--max-r", type=int, default=None,
        help="subspace dimension cap; each cell uses r = min(cap, N//2)",
    )
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="aggregate benchmark records")
    _add_shared(p)
    p.add_argument("--records", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single-line machine-parsable error
        msg = str(exc).replace("\n", " ") or exc.__class__.__name__
        print(f"error: {exc.__class__.__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
