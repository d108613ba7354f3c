"""Batch entry points: scenario generation, fitting, benchmarking, forecasting.

Every command is driven by a JSON config plus flag overrides (flags win)
and a single top-level seed. All randomness flows through labelled
per-task streams derived from that seed, so results are independent of
thread count and execution order. Statistical outputs are byte-identical
across reruns; wall-clock timing fields (the `timings` block of summary
JSON and timing.csv) are measurements and necessarily vary.

Exit codes: 0 success, 2 validation error, 3 numeric non-convergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .errors import ConvergenceError, SpaceVarError, ValidationError
from .metrics import MetricRow, write_metric_csv
from .preprocess import detrend_panel, interpolate_panel
from .regression import DEFAULT_MAX_ITER, DEFAULT_TOL
from .scenario import (
    LayoutSpec,
    SparsitySpec,
    gen_scenario,
    load_truth,
    quantile_radius,
    save_truth,
)
from .seeding import child_int, child_seed
from .spatial import SpatialLayout, read_positions_csv, write_positions_csv
from .stability import StabilityConfig
from .two_step import (
    RHO_MODE_ESTIMATE,
    RHO_MODE_KNOWN,
    RHO_MODE_UPPER_BOUND,
    FitResult,
    SamplingDesign,
    SelectionConfig,
    TwoStepConfig,
    fit_full,
    two_step,
)
from .var_model import (
    DEFAULT_BURN_IN,
    TimeSeriesPanel,
    TransitionStack,
    default_series_ids,
    forecast,
    read_panel_csv,
    simulate,
    write_panel_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4

METHOD_FULL = "full"
METHOD_TWO_STEP = "two-step"
METHOD_ORACLE = "oracle"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _take(doc: dict, key: str, default):
    value = doc.get(key, default)
    return default if value is None else value


@dataclass
class RunConfig:
    """Validated union of all command settings."""

    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    metric: str = "euclidean"
    lags: int = 1
    scenario: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    step1: dict = field(default_factory=dict)
    step2: dict = field(default_factory=dict)
    rho_mode: str = RHO_MODE_ESTIMATE
    rho: float | None = None
    rho_slack: float = 1.0
    benchmark: dict = field(default_factory=dict)
    preprocess: dict = field(default_factory=dict)
    horizon: int = 1
    raw: dict = field(default_factory=dict)

    @staticmethod
    def load(path: str | None, overrides: dict) -> "RunConfig":
        doc: dict = {}
        if path is not None:
            with open(path) as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict):
                raise ValidationError(f"{path}: config must be a JSON object")
        doc = dict(doc)
        for key, value in overrides.items():
            if value is not None:
                doc[key] = value
        cfg = RunConfig(
            seed=int(_take(doc, "seed", 0)),
            threads=int(_take(doc, "threads", 1)),
            out_dir=str(_take(doc, "out_dir", "out")),
            metric=str(_take(doc, "metric", "euclidean")),
            lags=int(_take(doc, "lags", 1)),
            scenario=dict(_take(doc, "scenario", {})),
            sampling=dict(_take(doc, "sampling", {})),
            step1=dict(_take(doc, "step1", {})),
            step2=dict(_take(doc, "step2", {})),
            rho_mode=str(_take(doc, "rho_mode", RHO_MODE_ESTIMATE)),
            rho=doc.get("rho"),
            rho_slack=float(_take(doc, "rho_slack", 1.0)),
            benchmark=dict(_take(doc, "benchmark", {})),
            preprocess=dict(_take(doc, "preprocess", {})),
            horizon=int(_take(doc, "horizon", 1)),
            raw=doc,
        )
        if cfg.threads < 1:
            raise ValidationError("threads must be >= 1")
        # construct every sub-config now so validation precedes computation
        cfg.layout_spec()
        cfg.sparsity_spec()
        cfg.selection_config("step1")
        cfg.selection_config("step2")
        return cfg

    # -- sub-config builders ------------------------------------------------

    def layout_spec(self) -> LayoutSpec:
        s = self.scenario
        return LayoutSpec(
            variant=str(_take(s, "variant", "gaussian_clusters")),
            k=s.get("k"),
            n_centers=int(_take(s, "n_centers", 5)),
            per_cluster=int(_take(s, "per_cluster", 20)),
            spread=float(_take(s, "spread", 0.05)),
            side=float(_take(s, "side", 1.0)),
        )

    def sparsity_spec(self) -> SparsitySpec:
        s = self.scenario
        rng = _take(s, "coefficient_range", [0.2, 0.8])
        return SparsitySpec(
            density=float(_take(s, "density", 0.02)),
            within_fraction=float(_take(s, "within_fraction", 0.9)),
            between_quantile=float(_take(s, "between_quantile", 0.3)),
            coefficient_range=(float(rng[0]), float(rng[1])),
            target_spectral_radius=float(_take(s, "target_spectral_radius", 0.9)),
        )

    def n_obs(self) -> int:
        return int(_take(self.scenario, "n_obs", 150))

    def burn_in(self) -> int:
        return int(_take(self.scenario, "burn_in", DEFAULT_BURN_IN))

    def noise_variance(self) -> float:
        return float(_take(self.scenario, "noise_variance", 1.0))

    def sampling_design(self, labels=None) -> SamplingDesign:
        s = self.sampling
        variant = str(_take(s, "variant", "bernoulli"))
        if variant == "bernoulli":
            return SamplingDesign.bernoulli(_take(s, "theta", 0.5))
        if variant == "srs":
            n = s.get("n")
            if n is None:
                raise ValidationError("srs sampling needs 'n'")
            return SamplingDesign.srs(int(n))
        if variant == "stratified":
            total = s.get("total")
            strata = s.get("strata", labels.tolist() if labels is not None else None)
            if total is None or strata is None:
                raise ValidationError(
                    "stratified sampling needs 'total' and per-node 'strata'"
                )
            return SamplingDesign.stratified(strata, int(total))
        raise ValidationError(f"unknown sampling variant {variant!r}")

    def selection_config(self, step: str) -> SelectionConfig:
        s = self.step1 if step == "step1" else self.step2
        stab = dict(_take(s, "stability", {}))
        grid = stab.get("lambda_grid")
        max_active = _take(stab, "max_active", "auto")
        stability = StabilityConfig(
            n_subsamples=int(_take(stab, "n_subsamples", 100)),
            subsample_length=stab.get("subsample_length"),
            threshold=float(_take(stab, "threshold", 0.75)),
            lambda_grid=tuple(grid) if grid else None,
            n_lambda=int(_take(stab, "n_lambda", 25)),
            lambda_floor=float(_take(stab, "lambda_floor", 0.3)),
            max_active=max_active if isinstance(max_active, str) else int(max_active),
            tol=float(_take(stab, "tol", 1e-6)),
            max_iter=int(_take(stab, "max_iter", DEFAULT_MAX_ITER)),
        )
        return SelectionConfig(
            method=str(_take(s, "method", "stability")),
            lam=s.get("lam"),
            lam_frac=float(_take(s, "lam_frac", 0.1)),
            stability=stability,
            refit_lambda=float(_take(s, "refit_lambda", 0.0)),
            tol=float(_take(s, "tol", DEFAULT_TOL)),
            max_iter=int(_take(s, "max_iter", DEFAULT_MAX_ITER)),
        )

    def two_step_config(self, labels=None, rho_mode=None, rho=None) -> TwoStepConfig:
        return TwoStepConfig(
            lags=self.lags,
            design=self.sampling_design(labels),
            step1=self.selection_config("step1"),
            step2=self.selection_config("step2"),
            rho_mode=rho_mode or self.rho_mode,
            rho=self.rho if rho is None else rho,
            rho_slack=self.rho_slack,
        )


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# fit artifacts
# ---------------------------------------------------------------------------


def write_edges_csv(edges, ids, path) -> None:
    """Edge-list CSV `source,target,lag,coefficient,distance` with node ids."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "lag", "coefficient", "distance"])
        ordered = sorted(edges, key=lambda e: (e.target, e.lag, e.source))
        for e in ordered:
            writer.writerow(
                [ids[e.source], ids[e.target], e.lag,
                 repr(float(e.coefficient)), repr(float(e.distance))]
            )


def read_edges_csv(path, ids) -> list[tuple[int, int, int, float]]:
    """(target, source, lag, coefficient) tuples resolved against `ids`."""
    index = {name: i for i, name in enumerate(ids)}
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            try:
                s, t = index[rec["source"]], index[rec["target"]]
            except KeyError as exc:
                raise ValidationError(
                    f"{path}: edge references unknown node id {exc}"
                ) from exc
            out.append((t, s, int(rec["lag"]), float(rec["coefficient"])))
    return out


def stack_from_edges(
    triples: list[tuple[int, int, int, float]], k: int, lags: int | None = None
) -> TransitionStack:
    max_lag = max((l for _, _, l, _ in triples), default=1)
    lags = max(lags or 1, max_lag)
    mats = [np.zeros((k, k)) for _ in range(lags)]
    for t, s, l, coef in triples:
        mats[l - 1][t, s] = coef
    return TransitionStack(tuple(mats))


def fit_summary(fit: FitResult, cfg: RunConfig, extra: dict | None = None) -> dict:
    doc = {
        "k": fit.k,
        "lags": fit.lags,
        "rho_hat": fit.rho_hat,
        "rho_mode": fit.rho_mode,
        "n_edges": len(fit.edge_set),
        "sampled_nodes": None
        if fit.sampled_nodes is None
        else [int(i) for i in fit.sampled_nodes],
        "seed": cfg.seed,
        "config": cfg.raw,
        "diagnostics": [
            {
                "component": d.component,
                "lambda": d.lam,
                "iterations": d.iterations,
                "kkt_residual": d.kkt_residual,
                "support_size": d.support_size,
            }
            for d in fit.diagnostics
        ],
        # wall-clock block: excluded from the byte-reproducibility contract
        "timings": fit.timings,
    }
    if extra:
        doc.update(extra)
    return doc


def _write_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_scenario(cfg: RunConfig) -> dict:
    """Write truth.json, panel.csv, and positions.csv for one scenario."""
    out = _out_dir(cfg)
    truth = gen_scenario(
        cfg.layout_spec(),
        cfg.sparsity_spec(),
        cfg.lags,
        cfg.seed,
        noise_variance=cfg.noise_variance(),
    )
    panel = simulate(
        truth.process, cfg.n_obs(), cfg.burn_in(), child_seed(cfg.seed, "panel")
    )
    save_truth(truth, out / "truth.json")
    write_panel_csv(panel, out / "panel.csv")
    write_positions_csv(truth.layout, panel.series_ids, out / "positions.csv")
    return {
        "truth": str(out / "truth.json"),
        "panel": str(out / "panel.csv"),
        "positions": str(out / "positions.csv"),
        "k": truth.layout.k,
        "n_edges": len(truth.support),
        "rho_true": truth.rho_true,
    }


def cmd_simulate(cfg: RunConfig, truth_path: str) -> dict:
    """Draw a fresh panel from a stored scenario truth."""
    out = _out_dir(cfg)
    truth = load_truth(truth_path)
    panel = simulate(
        truth.process, cfg.n_obs(), cfg.burn_in(), child_seed(cfg.seed, "panel")
    )
    write_panel_csv(panel, out / "panel.csv")
    return {"panel": str(out / "panel.csv"), "n_obs": panel.n_obs, "k": panel.k}


def _load_panel_and_layout(
    cfg: RunConfig, panel_path: str, positions_path: str
) -> tuple[TimeSeriesPanel, SpatialLayout]:
    panel = read_panel_csv(panel_path)
    ids, layout = read_positions_csv(positions_path, metric=cfg.raw.get("metric"))
    if ids != panel.series_ids:
        raise ValidationError(
            "panel series ids and position ids differ or are ordered differently"
        )
    return panel, layout


def run_fit_method(
    cfg: RunConfig,
    panel: TimeSeriesPanel,
    layout: SpatialLayout,
    method: str,
    rho: float | None = None,
    labels=None,
    seed: int | None = None,
    threads: int | None = None,
) -> FitResult:
    seed = cfg.seed if seed is None else seed
    threads = cfg.threads if threads is None else threads
    if method == METHOD_FULL:
        return fit_full(
            panel, layout, cfg.lags, cfg.selection_config("step2"), seed,
            threads=threads,
        )
    if method == METHOD_ORACLE:
        rho = cfg.rho if rho is None else rho
        if rho is None:
            raise ValidationError("oracle fits need a radius (config rho or --rho)")
        ts_cfg = cfg.two_step_config(labels, rho_mode=RHO_MODE_KNOWN, rho=float(rho))
        return two_step(panel, layout, ts_cfg, seed, threads=threads)
    if method == METHOD_TWO_STEP:
        ts_cfg = cfg.two_step_config(labels)
        return two_step(panel, layout, ts_cfg, seed, threads=threads)
    raise ValidationError(f"unknown fit method {method!r}")


def cmd_fit(
    cfg: RunConfig, panel_path: str, positions_path: str, method: str
) -> dict:
    """Fit one model and write edges.csv plus summary.json."""
    out = _out_dir(cfg)
    panel, layout = _load_panel_and_layout(cfg, panel_path, positions_path)
    fit = run_fit_method(cfg, panel, layout, method)
    write_edges_csv(fit.edge_set, panel.series_ids, out / "edges.csv")
    summary = fit_summary(fit, cfg, extra={"method": method})
    _write_json(summary, out / "summary.json")
    return summary


def cmd_preprocess(cfg: RunConfig, panel_path: str) -> dict:
    """Interpolate gaps and optionally detrend; write the clean panel."""
    out = _out_dir(cfg)
    panel = read_panel_csv(panel_path)
    opts = cfg.preprocess
    clean = interpolate_panel(
        panel,
        max_missing_frac=float(_take(opts, "max_missing_frac", 0.1)),
        strict=bool(_take(opts, "strict", False)),
    )
    result = {"panel": str(out / "panel.csv")}
    if bool(_take(opts, "log_spline", False)):
        clean, fits = detrend_panel(
            clean,
            knots_per_year=int(_take(opts, "knots_per_year", 4)),
            samples_per_year=int(_take(opts, "samples_per_year", 365)),
        )
        spline_path = out / "spline_fits.csv"
        with open(spline_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", *clean.series_ids])
            fitted = np.column_stack([f.fitted for f in fits])
            for t in range(fitted.shape[0]):
                writer.writerow([t, *(repr(float(v)) for v in fitted[t])])
        result["spline_fits"] = str(spline_path)
        result["knot_count"] = fits[0].knot_count
    write_panel_csv(clean, out / "panel.csv")
    return result


def cmd_forecast(cfg: RunConfig, panel_path: str, edges_path: str) -> dict:
    """Forecast `horizon` steps ahead from a fitted edge list."""
    out = _out_dir(cfg)
    panel = read_panel_csv(panel_path)
    if panel.has_missing():
        raise ValidationError("panel contains missing values; preprocess first")
    triples = read_edges_csv(edges_path, panel.series_ids)
    stack = stack_from_edges(triples, panel.k, cfg.lags)
    preds = forecast(panel, stack, cfg.horizon)
    path = out / "forecast.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *panel.series_ids])
        for h in range(cfg.horizon):
            writer.writerow(
                [panel.n_obs + h, *(repr(float(v)) for v in preds[h])]
            )
    return {"forecast": str(path), "horizon": cfg.horizon}


def cmd_export_edges(cfg: RunConfig, truth_path: str) -> dict:
    """Export a stored scenario's true support as an edge-list CSV."""
    out = _out_dir(cfg)
    truth = load_truth(truth_path)
    ids = default_series_ids(truth.layout.k)
    path = out / "edges.csv"
    write_edges_csv(truth.support, ids, path)
    return {"edges": str(path), "n_edges": len(truth.support)}


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def _resolve_oracle_rho(spec, truth) -> float:
    if spec == "true" or spec is None:
        return truth.rho_true
    if isinstance(spec, dict) and "quantile" in spec:
        return quantile_radius(truth.layout, float(spec["quantile"]))
    return float(spec)


def run_benchmark_replication(cfg: RunConfig, rep: int) -> tuple[list, list]:
    """One scenario draw scored under every configured method."""
    bench = cfg.benchmark
    methods = list(_take(bench, "methods", [METHOD_FULL, METHOD_TWO_STEP, METHOD_ORACLE]))
    test_obs = int(_take(bench, "test_obs", 0))
    horizon = int(_take(bench, "horizon", 1))
    rep_seed = child_int(cfg.seed, "rep", rep)
    truth = gen_scenario(
        cfg.layout_spec(), cfg.sparsity_spec(), cfg.lags, rep_seed,
        noise_variance=cfg.noise_variance(),
    )
    panel = simulate(
        truth.process,
        cfg.n_obs() + test_obs,
        cfg.burn_in(),
        child_seed(rep_seed, "panel"),
    )
    train = panel.rows(0, cfg.n_obs())
    test = panel.rows(cfg.n_obs(), None) if test_obs > 0 else None
    truth_stack = truth.process.transition
    k, lags = truth.layout.k, cfg.lags
    metric_rows, timing_rows = [], []
    include_timings = bool(_take(bench, "timing_in_metrics", False))
    for method in methods:
        rho = (
            _resolve_oracle_rho(bench.get("oracle_rho"), truth)
            if method == METHOD_ORACLE
            else None
        )
        fit = run_fit_method(
            cfg, train, truth.layout, method,
            rho=rho, labels=truth.labels,
            seed=child_int(rep_seed, "fit", method), threads=1,
        )
        row = MetricRow(method=method, replication=rep)
        row.auroc = metrics_mod.auroc(fit.scores, truth.support, k, lags)
        row.fp, row.fn = metrics_mod.fp_fn_fractions(
            fit.edge_set, truth.support, k, lags
        )
        row.frob = metrics_mod.rel_frobenius_error(
            fit.transition_stack(), truth_stack
        )
        if test is not None:
            row.mse = metrics_mod.forecast_mse(
                train, test, fit.transition_stack(), horizon
            )
        if include_timings:
            row.step1_sec = fit.timings["step1"]
            row.step2_sec = fit.timings["step2"]
        metric_rows.append(row)
        timing_rows.append(
            (method, rep, fit.timings["step1"], fit.timings["step2"],
             fit.timings["total"])
        )
    return metric_rows, timing_rows


def _aggregate(rows: list[MetricRow]) -> dict:
    methods = list(dict.fromkeys(r.method for r in rows))
    summary: dict = {}
    for metric in ("auroc", "fp", "fn", "frob", "mse"):
        per_method = {}
        for method in methods:
            vals = [
                getattr(r, metric)
                for r in rows
                if r.method == method and getattr(r, metric) is not None
            ]
            if not vals:
                continue
            mean = float(np.mean(vals))
            sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            per_method[method] = {"mean": mean, "sd": sd, "n": len(vals)}
        if per_method:
            summary[metric] = per_method
    return summary


def _summary_text(summary: dict) -> str:
    lines = [f"{'metric':<8}{'method':<12}mean (sd)"]
    for metric, per_method in summary.items():
        for method, stats in per_method.items():
            lines.append(
                f"{metric:<8}{method:<12}{stats['mean']:.3f} ({stats['sd']:.3f})"
            )
    return "\n".join(lines) + "\n"


def cmd_benchmark(cfg: RunConfig) -> dict:
    """Replicate scenario fits and write metrics.csv, timing.csv, summaries.

    metrics.csv is deterministic per (config, seed) and thread count; the
    wall-clock columns live in timing.csv unless the config opts into
    `benchmark.timing_in_metrics`, which breaks byte-reproducibility.
    """
    out = _out_dir(cfg)
    bench = cfg.benchmark
    n_reps = int(_take(bench, "replications", 10))
    if n_reps < 1:
        raise ValidationError("replications must be >= 1")
    failures: list[str] = []
    all_metrics: list[MetricRow] = []
    all_timings: list[tuple] = []

    def run_one(rep: int):
        try:
            return rep, run_benchmark_replication(cfg, rep), None
        except SpaceVarError as exc:
            return rep, None, f"replication {rep}: {exc}"

    if cfg.threads <= 1 or n_reps == 1:
        results = [run_one(rep) for rep in range(n_reps)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run_one, range(n_reps)))
    for rep, payload, error in sorted(results, key=lambda r: r[0]):
        if error is not None:
            failures.append(error)
            continue
        metric_rows, timing_rows = payload
        all_metrics.extend(metric_rows)
        all_timings.extend(timing_rows)
    write_metric_csv(all_metrics, out / "metrics.csv")
    with open(out / "timing.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "replication", "step1_sec", "step2_sec", "total_sec"])
        for rec in all_timings:
            writer.writerow(
                [rec[0], rec[1], f"{rec[2]:.6f}", f"{rec[3]:.6f}", f"{rec[4]:.6f}"]
            )
    summary = _aggregate(all_metrics)
    (out / "summary.txt").write_text(_summary_text(summary))
    _write_json(
        {"summary": summary, "failures": failures, "config": cfg.raw},
        out / "summary.json",
    )
    if failures:
        sys.stderr.write("\n".join(failures) + "\n")
    return {
        "metrics": str(out / "metrics.csv"),
        "timing": str(out / "timing.csv"),
        "summary": summary,
        "failures": failures,
    }


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacevar",
        description="Two-step sparse estimation of spatial vector autoregressions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="top-level seed (overrides config)")
        p.add_argument("--threads", type=int, help="parallel workers")
        p.add_argument("--out", help="output directory")
        p.add_argument(
            "--metric", choices=["euclidean", "haversine"], help="distance metric"
        )

    p = sub.add_parser("gen-scenario", help="generate a synthetic scenario")
    add_shared(p)

    p = sub.add_parser("simulate", help="simulate a panel from a truth file")
    add_shared(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--n-obs", type=int, dest="n_obs")

    p = sub.add_parser("fit", help="fit a model to a panel")
    add_shared(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--positions", required=True)
    p.add_argument(
        "--method",
        choices=[METHOD_FULL, METHOD_TWO_STEP, METHOD_ORACLE],
        default=METHOD_TWO_STEP,
    )
    p.add_argument("--rho", type=float, help="radius for oracle fits")
    p.add_argument(
        "--rho-mode",
        choices=[RHO_MODE_ESTIMATE, RHO_MODE_KNOWN, RHO_MODE_UPPER_BOUND],
        dest="rho_mode",
    )

    p = sub.add_parser("benchmark", help="replicate scenario fits and score them")
    add_shared(p)
    p.add_argument("--replications", type=int)

    p = sub.add_parser("forecast", help="forecast ahead from a fitted edge list")
    add_shared(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--horizon", type=int)

    p = sub.add_parser("preprocess", help="interpolate gaps and detrend a panel")
    add_shared(p)
    p.add_argument("--panel", required=True)

    p = sub.add_parser("export-edges", help="export a truth file as an edge CSV")
    add_shared(p)
    p.add_argument("--truth", required=True)
    return parser


def _config_from_args(args) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "out_dir": args.out,
        "metric": args.metric,
    }
    if getattr(args, "rho", None) is not None:
        overrides["rho"] = args.rho
    if getattr(args, "rho_mode", None) is not None:
        overrides["rho_mode"] = args.rho_mode
    cfg = RunConfig.load(args.config, overrides)
    if getattr(args, "n_obs", None) is not None:
        cfg.scenario["n_obs"] = args.n_obs
    if getattr(args, "horizon", None) is not None:
        cfg.horizon = args.horizon
    if getattr(args, "replications", None) is not None:
        cfg.benchmark["replications"] = args.replications
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "gen-scenario":
            result = cmd_gen_scenario(cfg)
        elif args.command == "simulate":
            result = cmd_simulate(cfg, args.truth)
        elif args.command == "fit":
            result = cmd_fit(cfg, args.panel, args.positions, args.method)
        elif args.command == "benchmark":
            result = cmd_benchmark(cfg)
        elif args.command == "forecast":
            result = cmd_forecast(cfg, args.panel, args.edges)
        elif args.command == "preprocess":
            result = cmd_preprocess(cfg, args.panel)
        elif args.command == "export-edges":
            result = cmd_export_edges(cfg, args.truth)
        else:  # pragma: no cover - argparse enforces the choices
            raise ValidationError(f"unknown command {args.command!r}")
    except ConvergenceError as exc:
        sys.stderr.write(f"non-convergence: {exc}\n")
        return EXIT_NONCONVERGENCE
    except (ValidationError, SpaceVarError) as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO
    brief = {k: v for k, v in result.items() if k not in ("summary", "config")}
    sys.stdout.write(json.dumps(brief, default=str) + "\n")
    return EXIT_OK


def main() -> None:  # pragma: no cover - console entry point
    sys.exit(run())
