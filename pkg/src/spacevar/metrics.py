"""Scoring fitted models against ground truth and held-out data.

Candidate edges are all k^2 L coefficients, self-lags included. FP
fractions are normalized by the number of true non-edges and FN fractions
by the number of true edges; those denominators reproduce the magnitude
pattern of sparse-truth benchmarks and are fixed here as a documented
convention.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeError, UndefinedMetricError, ValidationError
from .two_step import EdgeSet
from .var_model import TimeSeriesPanel, TransitionStack, forecast


def truth_matrix(truth: EdgeSet, k: int, lags: int) -> np.ndarray:
    """Boolean (k, kL) indicator of true edges, rows = targets."""
    out = np.zeros((k, k * lags), dtype=bool)
    for t, s, l in truth.triples():
        if not (0 <= t < k and 0 <= s < k and 1 <= l <= lags):
            raise ValidationError(
                f"edge ({t},{s},lag {l}) outside a k={k}, L={lags} model"
            )
        out[t, (l - 1) * k + s] = True
    return out


def _as_score_matrix(scores, k: int, lags: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        if scores.size != k * k * lags:
            raise ShapeError(
                f"flat scores need k^2*L = {k * k * lags} entries, got {scores.size}"
            )
        scores = scores.reshape(k, k * lags)
    if scores.shape != (k, k * lags):
        raise ShapeError(f"scores shape {scores.shape} != ({k}, {k * lags})")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    return scores


def auroc(scores, truth: EdgeSet, k: int, lags: int) -> float:
    """Probability a random true edge outscores a random non-edge.

    Ties count one half, which matches the trapezoidal area under the ROC
    curve. Scores may be selection frequencies or absolute coefficients --
    anything where larger means more evidence of an edge.
    """
    scores = _as_score_matrix(scores, k, lags).ravel()
    labels = truth_matrix(truth, k, lags).ravel()
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            "AUROC needs at least one true edge and one true non-edge"
        )
    ranks = rankdata(scores)  # average ranks give half-credit to ties
    pos_rank_sum = ranks[labels].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def fp_fn_fractions(
    selected: EdgeSet | set, truth: EdgeSet, k: int, lags: int
) -> tuple[float, float]:
    """False-positive and false-negative edge fractions.

    fp = |selected \\ truth| / #true non-edges,
    fn = |truth \\ selected| / #true edges.
    """
    truth_triples = truth.triples()
    sel_triples = selected.triples() if isinstance(selected, EdgeSet) else set(selected)
    n_candidates = k * k * lags
    n_edges = len(truth_triples)
    if n_edges == 0:
        raise UndefinedMetricError("FN fraction is undefined without true edges")
    n_non_edges = n_candidates - n_edges
    fp = len(sel_triples - truth_triples) / n_non_edges if n_non_edges else 0.0
    fn = len(truth_triples - sel_triples) / n_edges
    return float(fp), float(fn)


def rel_frobenius_error(estimated: TransitionStack, truth: TransitionStack) -> float:
    """||A_hat - A||_F / ||A||_F over the stacked matrices."""
    if estimated.k != truth.k or estimated.lags != truth.lags:
        raise ShapeError(
            f"stacks differ: ({estimated.k}, L={estimated.lags}) vs "
            f"({truth.k}, L={truth.lags})"
        )
    est = np.concatenate(estimated.matrices, axis=1)
    tru = np.concatenate(truth.matrices, axis=1)
    denom = float(np.linalg.norm(tru))
    if denom == 0.0:
        raise ValidationError("truth stack is identically zero")
    return float(np.linalg.norm(est - tru) / denom)


def forecast_mse(
    train: TimeSeriesPanel,
    test: TimeSeriesPanel,
    stack: TransitionStack,
    horizon: int,
) -> float:
    """Rolling-origin forecast MSE at a fixed horizon.

    The test panel must continue the training panel without a gap. For
    every origin with `horizon` remaining test rows, a one-shot recursive
    forecast is scored against the realized values; the result averages
    the squared errors over all (origin, component) pairs.
    """
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if train.k != test.k:
        raise ShapeError(
            f"train has {train.k} series, test has {test.k}"
        )
    if train.series_ids != test.series_ids:
        raise ValidationError("train/test series ids differ; panels misaligned")
    if test.n_obs < horizon:
        raise ValidationError(
            f"test span {test.n_obs} shorter than horizon {horizon}"
        )
    L = stack.lags
    if train.n_obs < L:
        raise ValidationError(f"training panel shorter than the lag order {L}")
    values = np.vstack([train.values, test.values])
    t0 = train.n_obs
    n_origins = test.n_obs - horizon + 1
    if horizon == 1:
        # single-step forecasts over all origins collapse to one lagged matmul
        preds = np.zeros((n_origins, train.k))
        for l in range(1, L + 1):
            preds += values[t0 - l : t0 - l + n_origins] @ stack.matrices[l - 1].T
        errs = values[t0 : t0 + n_origins] - preds
        return float(np.mean(errs**2))
    sq_sum = 0.0
    count = 0
    ids = train.series_ids
    for origin in range(n_origins):
        history = TimeSeriesPanel(values[: t0 + origin], ids)
        pred = forecast(history, stack, horizon)[-1]
        err = values[t0 + origin + horizon - 1] - pred
        sq_sum += float(err @ err)
        count += err.size
    return sq_sum / count


# ---------------------------------------------------------------------------
# plot-ready metric report
# ---------------------------------------------------------------------------

METRIC_COLUMNS = (
    "method",
    "replication",
    "auroc",
    "fp",
    "fn",
    "frob",
    "mse",
    "step1_sec",
    "step2_sec",
)


@dataclass
class MetricRow:
    method: str
    replication: int
    auroc: float | None = None
    fp: float | None = None
    fn: float | None = None
    frob: float | None = None
    mse: float | None = None
    step1_sec: float | None = None
    step2_sec: float | None = None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_metric_csv(rows, path) -> None:
    """Write rows in the `method,replication,...` report schema."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, f.name)) for f in fields(MetricRow)])


def read_metric_csv(path) -> list[MetricRow]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            kwargs = {"method": rec["method"], "replication": int(rec["replication"])}
            for col in METRIC_COLUMNS[2:]:
                tok = rec.get(col, "")
                kwargs[col] = float(tok) if tok not in ("", None) else None
            out.append(MetricRow(**kwargs))
    return out
