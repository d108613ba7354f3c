"""Data pipeline: gap filling, seasonal detrending, lag-order selection.

Raw panels arrive with missing values and strong seasonal cycles. Gaps
are filled by univariate linear interpolation (flat extension at the
series edges, where extrapolating a line is unstable). Seasonal shape is
removed by fitting a least-squares cubic B-spline with equally spaced
interior knots to the log series and keeping the residual. Lag order is
chosen by rolling-origin cross-validation, never shuffled folds, because
the observations are serially dependent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline, make_lsq_spline

from .errors import DataError, InsufficientDataError, ValidationError
from .metrics import forecast_mse
from .regression import build_gram, full_mask
from .seeding import child_int
from .two_step import SelectionConfig, _fit_components
from .var_model import TimeSeriesPanel, TransitionStack

DEFAULT_MISSING_CAP = 0.10
SPLINE_DEGREE = 3


def interpolate_missing(
    series,
    missing=None,
    max_missing_frac: float = DEFAULT_MISSING_CAP,
    strict: bool = False,
) -> np.ndarray:
    """Fill gaps in one series by linear interpolation.

    Interior gaps take the line between the nearest observed neighbors;
    leading and trailing gaps copy the nearest observed value. Exceeding
    `max_missing_frac` missing values warns, or raises when `strict`.
    """
    values = np.asarray(series, dtype=float).copy()
    if values.ndim != 1:
        raise ValidationError("interpolate_missing expects a single series")
    mask = np.isnan(values)
    if missing is not None:
        mask = mask | np.asarray(missing, dtype=bool)
    if mask.all():
        raise DataError("series is entirely missing; nothing to interpolate from")
    frac = mask.mean()
    if frac > max_missing_frac:
        msg = (
            f"{frac:.1%} of the series is missing, above the "
            f"{max_missing_frac:.0%} cap"
        )
        if strict:
            raise DataError(msg)
        warnings.warn(msg, stacklevel=2)
    if not mask.any():
        return values
    idx = np.arange(values.size)
    observed = ~mask
    values[mask] = np.interp(idx[mask], idx[observed], values[observed])
    return values


def interpolate_panel(
    panel: TimeSeriesPanel,
    max_missing_frac: float = DEFAULT_MISSING_CAP,
    strict: bool = False,
) -> TimeSeriesPanel:
    """Apply `interpolate_missing` column by column."""
    mask = panel.missing_mask
    cols = [
        interpolate_missing(
            panel.values[:, i],
            None if mask is None else mask[:, i],
            max_missing_frac=max_missing_frac,
            strict=strict,
        )
        for i in range(panel.k)
    ]
    return TimeSeriesPanel(np.column_stack(cols), panel.series_ids)


@dataclass(frozen=True)
class DetrendResult:
    """Log-scale decomposition: log(series) = fitted + residual."""

    residual: np.ndarray
    fitted: np.ndarray
    knot_count: int
    spline: BSpline

    def evaluate(self, positions) -> np.ndarray:
        """Seasonal fit at arbitrary (possibly out-of-sample) positions."""
        return self.spline(np.asarray(positions, dtype=float))


def spline_detrend(
    series,
    knots_per_year: int = 4,
    samples_per_year: int = 365,
) -> DetrendResult:
    """Remove the seasonal shape of a positive series on the log scale.

    Fits a least-squares cubic B-spline with equally spaced interior knots
    (every samples_per_year / knots_per_year samples) to log(series).
    """
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValidationError("spline_detrend expects a single series")
    if knots_per_year < 1 or samples_per_year < 1:
        raise ValidationError("knot and sampling rates must be >= 1")
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        raise DataError(
            f"series must be positive to log-transform; first offender at "
            f"index {int(bad[0])} (value {values[bad[0]]!r})"
        )
    n = values.size
    span = samples_per_year / knots_per_year
    if n < 4 * span:
        raise InsufficientDataError(
            f"series of length {n} too short for knots every {span:.0f} samples"
        )
    log_values = np.log(values)
    x = np.arange(n, dtype=float)
    interior = np.arange(span, n - 1, span, dtype=float)
    # clamped knot vector: boundary knots repeated degree+1 times
    t = np.concatenate(
        [np.zeros(SPLINE_DEGREE + 1), interior, np.full(SPLINE_DEGREE + 1, n - 1.0)]
    )
    spline = make_lsq_spline(x, log_values, t, k=SPLINE_DEGREE)
    fitted = spline(x)
    return DetrendResult(
        residual=log_values - fitted,
        fitted=fitted,
        knot_count=interior.size,
        spline=spline,
    )


def detrend_panel(
    panel: TimeSeriesPanel,
    knots_per_year: int = 4,
    samples_per_year: int = 365,
) -> tuple[TimeSeriesPanel, list[DetrendResult]]:
    """Detrend every column; returns the residual panel and the fits."""
    results = [
        spline_detrend(panel.values[:, i], knots_per_year, samples_per_year)
        for i in range(panel.k)
    ]
    residuals = np.column_stack([r.residual for r in results])
    return TimeSeriesPanel(residuals, panel.series_ids), results


def select_order_cv(
    panel: TimeSeriesPanel,
    max_lags: int,
    n_folds: int = 3,
    selection: SelectionConfig | None = None,
    seed: int = 0,
) -> int:
    """Pick the lag order by rolling-origin one-step forecast error.

    Candidate orders share the same response rows (all fits start at row
    `max_lags`), so identical supports produce identical forecasts and the
    smallest-order tie rule can do its job. For each fold, models are fit
    on the growing training window and scored on the next block; the order
    with the smallest mean MSE wins, ties going to the smallest order.
    """
    if max_lags < 1:
        raise ValidationError("max_lags must be >= 1")
    if n_folds < 1:
        raise ValidationError("n_folds must be >= 1")
    if max_lags == 1:
        return 1
    if selection is None:
        selection = SelectionConfig()
    T = panel.n_obs
    base = T // (n_folds + 1)
    if base <= max_lags + 1:
        raise InsufficientDataError(
            f"panel of {T} rows is too short for {n_folds} folds at "
            f"max_lags={max_lags}"
        )
    mean_mse = np.zeros(max_lags)
    for fold in range(1, n_folds + 1):
        train_end = fold * base
        test_end = T if fold == n_folds else (fold + 1) * base
        train = panel.rows(0, train_end)
        test = panel.rows(train_end, test_end)
        for L in range(1, max_lags + 1):
            # slice so responses start at row max_lags regardless of L
            aligned = train.rows(max_lags - L, None)
            system = build_gram(aligned, L)
            targets = np.arange(panel.k)
            masks = [full_mask(system.p) for _ in targets]
            betas, _, _ = _fit_components(
                aligned, targets, masks, L, selection,
                child_int(seed, "cv", fold, L), system=system,
            )
            k = panel.k
            stack = TransitionStack(
                tuple(betas[:, l * k : (l + 1) * k] for l in range(L))
            )
            mean_mse[L - 1] += forecast_mse(train, test, stack, horizon=1)
    mean_mse /= n_folds
    best = float(mean_mse.min())
    tol = 1e-12 * max(1.0, abs(best))
    for L in range(1, max_lags + 1):
        if mean_mse[L - 1] <= best + tol:
            return L
    return int(np.argmin(mean_mse)) + 1
