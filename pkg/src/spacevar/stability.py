"""Support estimation by subsampled selection frequencies.

Instead of committing to one penalty, the selector refits the lasso on
many subsamples across a penalty grid and keeps predictors whose
selection frequency exceeds a threshold. Subsamples are contiguous time
blocks rather than independent rows: the data are serially dependent and
row subsampling would break the lag structure. Frequencies aggregate
pathwise, i.e. per predictor the maximum over the grid of the mean
selection indicator over blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientDataError,
    PreprocessingRequiredError,
    ShapeError,
    ValidationError,
)
from .regression import (
    GramSystem,
    PredictorMask,
    _cd_path,
    build_gram,
    lagged_design,
    lambda_grid,
    lambda_max,
)
from .var_model import TimeSeriesPanel

#: grid floor used for stability paths. The plain fitting grid descends to
#: 0.01*lambda_max, but at such small penalties nearly every coordinate is
#: nonzero and pathwise-max frequencies would saturate at 1 for signal and
#: noise alike; the active-set cap plus a floor of 0.3*lambda_max keeps
#: frequencies informative.
STABILITY_LAMBDA_FLOOR = 0.3
STABILITY_N_LAMBDA = 25


@dataclass(frozen=True)
class StabilityConfig:
    """Tuning knobs of the subsampling selector.

    subsample_length counts panel rows per block; None means half the
    effective sample, floor((T - L) / 2). lambda_grid, when given, must be
    strictly decreasing and overrides the generated per-response grid.
    max_active caps how dense a per-block solution may grow before the
    rest of the path is ignored ("auto" applies the ceil(sqrt(0.8 m))
    guideline over the m allowed predictors, "off" disables the cap);
    without a cap the small-penalty end of the path selects nearly
    everything and frequencies carry no information.
    """

    n_subsamples: int = 100
    subsample_length: int | None = None
    threshold: float = 0.75
    lambda_grid: tuple[float, ...] | None = None
    n_lambda: int = STABILITY_N_LAMBDA
    lambda_floor: float = STABILITY_LAMBDA_FLOOR
    max_active: int | str = "auto"
    tol: float = 1e-6
    max_iter: int = 10_000

    def __post_init__(self):
        if self.n_subsamples < 1:
            raise ValidationError("n_subsamples must be >= 1")
        if not 0.5 < self.threshold <= 1.0:
            raise ValidationError(
                f"threshold must lie in (0.5, 1], got {self.threshold}"
            )
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if len(grid) == 0 or any(v <= 0 for v in grid):
                raise ValidationError("lambda_grid must hold positive values")
            if any(b >= a for a, b in zip(grid, grid[1:])):
                raise ValidationError("lambda_grid must be strictly decreasing")
            object.__setattr__(self, "lambda_grid", grid)
        if not 0 < self.lambda_floor < 1:
            raise ValidationError("lambda_floor must lie in (0, 1)")
        if self.n_lambda < 1:
            raise ValidationError("n_lambda must be >= 1")
        if isinstance(self.max_active, str):
            if self.max_active not in ("auto", "off"):
                raise ValidationError(
                    "max_active must be 'auto', 'off', or a positive integer"
                )
        elif self.max_active < 1:
            raise ValidationError("max_active must be >= 1 when given as a number")

    def cap_for(self, n_allowed: int) -> int:
        """Resolved per-block cap; 0 disables capping."""
        if self.max_active == "off":
            return 0
        if self.max_active == "auto":
            return int(np.ceil(np.sqrt(0.8 * max(1, n_allowed))))
        return int(self.max_active)

    def block_rows(self, n_obs: int, lags: int) -> int:
        """Resolve the block length in panel rows for a T-row panel."""
        n_eff = n_obs - lags
        length = self.subsample_length
        if length is None:
            length = n_eff // 2
        if length <= lags:
            raise InsufficientDataError(
                f"subsample_length {length} must exceed the lag order {lags}"
            )
        if length >= n_eff:
            raise ValidationError(
                f"subsample_length {length} must be smaller than the "
                f"effective sample {n_eff}"
            )
        return length

    def grid_for(
        self, system: GramSystem, response: int, mask: PredictorMask
    ) -> np.ndarray:
        if self.lambda_grid is not None:
            return np.asarray(self.lambda_grid, dtype=float)
        lam_max = lambda_max(system, response, mask)
        return lambda_grid(lam_max, self.n_lambda, self.lambda_floor)


@dataclass(frozen=True)
class FrequencyMatrix:
    """Per-predictor selection frequencies in [0, 1]."""

    freq: np.ndarray

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        if freq.ndim != 1:
            raise ShapeError("frequencies must form a 1-D vector")
        if freq.size and (freq.min() < 0.0 or freq.max() > 1.0):
            raise ValidationError("frequencies must lie in [0, 1]")
        freq = freq.copy()
        freq.setflags(write=False)
        object.__setattr__(self, "freq", freq)


def select(freq: FrequencyMatrix, threshold: float) -> np.ndarray:
    """Indices of predictors whose frequency reaches the threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {threshold}")
    return np.flatnonzero(freq.freq >= threshold)


def _draw_block_starts(
    n_obs: int, block: int, n_blocks: int, seed
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, n_obs - block + 1, size=n_blocks)


def _block_gram(X: np.ndarray, Y: np.ndarray, start: int, block: int, lags: int):
    """Gram pieces of panel rows [start, start+block)."""
    lo, hi = start, start + block - lags
    Xb = X[lo:hi]
    n_b = Xb.shape[0]
    gram = Xb.T @ Xb / n_b
    xty = Xb.T @ Y[lo:hi] / n_b
    return gram, xty


def _block_indicators(
    gram_b: np.ndarray,
    xty_b: np.ndarray,
    responses: np.ndarray,
    idx_by_response: list[np.ndarray],
    grids: list[np.ndarray],
    caps: list[int],
    tol: float,
    max_iter: int,
    counts: list[np.ndarray],
) -> None:
    """Accumulate nonzero indicators for one block into `counts`."""
    for pos, resp in enumerate(responses):
        idx = idx_by_response[pos]
        if idx.size == 0:
            continue
        if idx.size == gram_b.shape[0]:
            sub_gram = gram_b
            sub_gamma = np.ascontiguousarray(xty_b[:, resp])
        else:
            sub_gram = np.ascontiguousarray(gram_b[np.ix_(idx, idx)])
            sub_gamma = np.ascontiguousarray(xty_b[idx, resp])
        betas, _, ok, n_visited = _cd_path(
            sub_gram,
            sub_gamma,
            grids[pos],
            tol,
            max_iter,
            np.zeros(idx.size),
            caps[pos],
        )
        if not ok[:n_visited].all():
            from .errors import ConvergenceError

            raise ConvergenceError(
                f"stability subsample fit did not converge (response {resp})"
            )
        counts[pos][:n_visited] += betas[:n_visited] != 0.0


def frequencies_bulk(
    panel: TimeSeriesPanel,
    responses,
    masks: list[PredictorMask],
    lags: int,
    config: StabilityConfig,
    seed,
    threads: int = 1,
    system: GramSystem | None = None,
) -> np.ndarray:
    """Selection frequencies for several responses over shared blocks.

    Returns an (n_responses, kL) array aligned with `responses`. The block
    sequence depends only on (seed, panel length, config), so a
    one-response call reproduces the matching row of a bulk call.
    """
    if panel.has_missing():
        raise PreprocessingRequiredError("panel contains missing values")
    responses = np.asarray(list(responses), dtype=int)
    if len(masks) != responses.size:
        raise ShapeError("one mask per response required")
    block = config.block_rows(panel.n_obs, lags)
    if system is None:
        system = build_gram(panel, lags)
    for mask in masks:
        if mask.size != system.p:
            raise ShapeError("mask length does not match predictor count")
    X, Y = lagged_design(panel.values, lags)
    starts = _draw_block_starts(panel.n_obs, block, config.n_subsamples, seed)
    idx_by_response = [m.indices() for m in masks]
    grids = [
        config.grid_for(system, int(r), masks[pos])
        for pos, r in enumerate(responses)
    ]
    caps = [config.cap_for(idx.size) for idx in idx_by_response]
    n_lams = [g.size for g in grids]
    counts_template = [
        np.zeros((n_lams[pos], idx_by_response[pos].size), dtype=np.int64)
        for pos in range(responses.size)
    ]

    def run_chunk(chunk: np.ndarray) -> list[np.ndarray]:
        local = [np.zeros_like(c) for c in counts_template]
        for s in chunk:
            gram_b, xty_b = _block_gram(X, Y, int(s), block, lags)
            _block_indicators(
                gram_b, xty_b, responses, idx_by_response, grids, caps,
                config.tol, config.max_iter, local,
            )
        return local

    if threads <= 1 or config.n_subsamples == 1:
        totals = run_chunk(starts)
    else:
        chunks = np.array_split(starts, min(threads, config.n_subsamples))
        totals = [np.zeros_like(c) for c in counts_template]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for local in pool.map(run_chunk, chunks):
                for tot, part in zip(totals, local):
                    tot += part
    out = np.zeros((responses.size, system.p))
    for pos in range(responses.size):
        idx = idx_by_response[pos]
        if idx.size:
            freq = totals[pos].max(axis=0) / config.n_subsamples
            out[pos, idx] = freq
    return out


def selection_frequencies(
    panel: TimeSeriesPanel,
    response: int,
    mask: PredictorMask,
    lags: int,
    config: StabilityConfig,
    seed,
) -> FrequencyMatrix:
    """Selection frequencies of one response column.

    Draws `n_subsamples` contiguous blocks, refits the masked lasso along
    the penalty grid on each block, and reports the pathwise-max mean
    selection indicator per predictor. Deterministic per seed.
    """
    freq = frequencies_bulk(panel, [response], [mask], lags, config, seed)
    return FrequencyMatrix(freq[0])
