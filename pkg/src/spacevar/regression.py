"""Gram systems and the l1-penalized least-squares solver.

Each response column i of a lagged panel yields the problem

    minimize_beta   -2 beta' g_i + beta' G beta + lambda ||beta||_1

where G = X'X / N is shared across all k responses and g_i = X'Y_i / N.
The predictor flat index runs lag-major: coordinate (l-1)*k + j is the
lag-l value of source component j. Solutions come from cyclic coordinate
descent with an explicit KKT certificate; masked coordinates are pinned
to exact zeros.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    ConvergenceError,
    DegeneratePredictorError,
    EmptyMaskError,
    InsufficientDataError,
    PreprocessingRequiredError,
    ShapeError,
    ValidationError,
)
from .var_model import TimeSeriesPanel

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000
DEFAULT_N_LAMBDA = 50
DEFAULT_LAMBDA_FLOOR = 0.01


def lagged_design(values: np.ndarray, lags: int) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix X (N x kL) and responses Y (N x k) for order `lags`.

    Row r of X stacks the lag-1..lag-L observations preceding response row
    Y[r] = values[lags + r], lag-major.
    """
    T, k = values.shape
    N = T - lags
    if N < 1:
        raise InsufficientDataError(
            f"panel with {T} rows supports no responses at order {lags}"
        )
    X = np.empty((N, k * lags))
    for l in range(1, lags + 1):
        X[:, (l - 1) * k : l * k] = values[lags - l : T - l]
    return X, values[lags:]


@dataclass(frozen=True)
class GramSystem:
    """Shared sufficient statistics of the per-response problems.

    Fields
    ------
    gram : (kL, kL) matrix X'X / N, symmetric positive semidefinite.
    xty : (kL, k) matrix whose column i is X'Y_i / N.
    n_effective : number of response rows N.
    predictor_index : tuple mapping flat index -> (source, lag).
    """

    gram: np.ndarray
    xty: np.ndarray
    n_effective: int
    predictor_index: tuple[tuple[int, int], ...]
    k: int
    lags: int

    @property
    def p(self) -> int:
        return self.gram.shape[0]

    def gamma(self, response: int) -> np.ndarray:
        if not 0 <= response < self.k:
            raise ValidationError(f"response {response} out of range 0..{self.k - 1}")
        return self.xty[:, response]


def build_gram(panel: TimeSeriesPanel, lags: int) -> GramSystem:
    """Compute the Gram system of a complete panel at order `lags`."""
    if lags < 1:
        raise ValidationError(f"lags must be >= 1, got {lags}")
    if panel.has_missing():
        raise PreprocessingRequiredError(
            "panel contains missing values; interpolate before fitting"
        )
    if panel.n_obs <= lags:
        raise InsufficientDataError(
            f"need more than {lags} rows for a lag-{lags} fit, got {panel.n_obs}"
        )
    X, Y = lagged_design(panel.values, lags)
    N = X.shape[0]
    gram = X.T @ X / N
    gram = 0.5 * (gram + gram.T)
    xty = X.T @ Y / N
    index = tuple(
        (j, l) for l in range(1, lags + 1) for j in range(panel.k)
    )
    return GramSystem(gram, xty, N, index, panel.k, lags)


@dataclass(frozen=True)
class PredictorMask:
    """Boolean whitelist over the kL predictor coordinates."""

    allowed: np.ndarray

    def __post_init__(self):
        allowed = np.asarray(self.allowed, dtype=bool)
        if allowed.ndim != 1:
            raise ShapeError("mask must be a 1-D boolean vector")
        allowed = allowed.copy()
        allowed.setflags(write=False)
        object.__setattr__(self, "allowed", allowed)

    @property
    def size(self) -> int:
        return self.allowed.shape[0]

    @property
    def n_allowed(self) -> int:
        return int(self.allowed.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.allowed)


def full_mask(p: int) -> PredictorMask:
    return PredictorMask(np.ones(p, dtype=bool))


@dataclass(frozen=True)
class LassoSolution:
    """Converged coordinate-descent output for one response."""

    beta: np.ndarray
    lam: float
    iterations: int
    kkt_residual: float
    objective: float


def lambda_max(system: GramSystem, response: int, mask: PredictorMask) -> float:
    """Smallest penalty at which the masked solution is exactly zero.

    Equals 2 * max_j |g_i[j]| over allowed j: at any lambda >= this value
    the zero vector satisfies the subgradient conditions.
    """
    _check_mask(system, mask)
    idx = mask.indices()
    if idx.size == 0:
        raise EmptyMaskError("mask allows no predictors")
    return float(2.0 * np.max(np.abs(system.gamma(response)[idx])))


def lambda_grid(
    lam_max: float,
    n_lambda: int = DEFAULT_N_LAMBDA,
    floor: float = DEFAULT_LAMBDA_FLOOR,
) -> np.ndarray:
    """Geometric grid of `n_lambda` values from lam_max down to floor*lam_max."""
    if lam_max < 0:
        raise ValidationError("lam_max must be nonnegative")
    if not 0 < floor < 1:
        raise ValidationError("floor must lie in (0, 1)")
    if n_lambda < 1:
        raise ValidationError("n_lambda must be >= 1")
    if lam_max == 0.0:
        return np.zeros(1)
    if n_lambda == 1:
        return np.array([lam_max])
    return lam_max * floor ** np.linspace(0.0, 1.0, n_lambda)


@njit(cache=True, nogil=True)
def _cd_path(gram, gamma, lams, tol, max_sweeps, beta0, max_active=0):  # pragma: no cover
    """Cyclic coordinate descent along a descending penalty path.

    Maintains the partial residual r = gamma - gram @ beta and applies the
    soft-threshold update in fixed index order. Returns the solution per
    penalty, sweep counts, a converged flag per penalty, and the number of
    penalties actually visited. A positive `max_active` abandons the path
    once a solution grows more than that many nonzeros (the remaining grid
    points are denser still, so callers that cap never need them).
    """
    m = gamma.shape[0]
    n_lam = lams.shape[0]
    betas = np.zeros((n_lam, m))
    sweeps = np.zeros(n_lam, np.int64)
    ok = np.zeros(n_lam, np.bool_)
    beta = beta0.copy()
    r = gamma - gram @ beta
    n_visited = 0
    for li in range(n_lam):
        lam_half = 0.5 * lams[li]
        converged = False
        n_sweeps = 0
        for _ in range(max_sweeps):
            n_sweeps += 1
            delta_max = 0.0
            for j in range(m):
                gjj = gram[j, j]
                if gjj <= 0.0:
                    continue
                bj = beta[j]
                z = r[j] + gjj * bj
                if z > lam_half:
                    bn = (z - lam_half) / gjj
                elif z < -lam_half:
                    bn = (z + lam_half) / gjj
                else:
                    bn = 0.0
                d = bn - bj
                if d != 0.0:
                    beta[j] = bn
                    for i in range(m):
                        r[i] -= gram[i, j] * d
                    ad = abs(d)
                    if ad > delta_max:
                        delta_max = ad
            if delta_max < tol:
                converged = True
                break
        if max_active > 0:
            nnz = 0
            for j in range(m):
                if beta[j] != 0.0:
                    nnz += 1
            if nnz > max_active:
                break
        betas[li] = beta
        sweeps[li] = n_sweeps
        ok[li] = converged
        n_visited = li + 1
    return betas, sweeps, ok, n_visited


def _check_mask(system: GramSystem, mask: PredictorMask) -> None:
    if mask.size != system.p:
        raise ShapeError(
            f"mask length {mask.size} != predictor count {system.p}"
        )


def _effective_indices(
    system: GramSystem, response: int, mask: PredictorMask
) -> np.ndarray:
    """Allowed indices minus degenerate zero-variance predictors."""
    idx = mask.indices()
    diag = np.diag(system.gram)[idx]
    degenerate = diag <= 0.0
    if degenerate.any():
        gamma = system.gamma(response)[idx]
        bad = degenerate & (gamma != 0.0)
        if bad.any():
            offenders = idx[bad].tolist()
            raise DegeneratePredictorError(
                f"predictors {offenders} have zero variance but nonzero "
                "cross-moment with the response"
            )
        warnings.warn(
            f"dropping {int(degenerate.sum())} zero-variance predictor(s) "
            "from the active set",
            stacklevel=3,
        )
        idx = idx[~degenerate]
    return idx


def objective_value(
    system: GramSystem, response: int, beta: np.ndarray, lam: float
) -> float:
    """-2 beta'g_i + beta'G beta + lambda ||beta||_1."""
    gamma = system.gamma(response)
    return float(
        -2.0 * beta @ gamma + beta @ system.gram @ beta + lam * np.abs(beta).sum()
    )


def kkt_residual(
    system: GramSystem,
    response: int,
    beta: np.ndarray,
    lam: float,
    mask: PredictorMask,
) -> float:
    """Worst violation of the subgradient optimality conditions.

    For allowed coordinates: |2(G beta - g_i)_j + lam*sign(beta_j)| where
    beta_j != 0, and max(0, |2(G beta - g_i)_j| - lam) where beta_j = 0.
    """
    _check_mask(system, mask)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (system.p,):
        raise ShapeError(f"beta shape {beta.shape} != ({system.p},)")
    outside = ~mask.allowed
    if np.any(beta[outside] != 0.0):
        raise ValidationError("beta must be zero outside the mask")
    idx = mask.indices()
    if idx.size == 0:
        return 0.0
    grad = 2.0 * (system.gram @ beta - system.gamma(response))
    g = grad[idx]
    b = beta[idx]
    active = b != 0.0
    viol_active = np.abs(g[active] + lam * np.sign(b[active]))
    viol_zero = np.maximum(0.0, np.abs(g[~active]) - lam)
    pieces = [viol_active, viol_zero]
    return float(max((v.max() for v in pieces if v.size), default=0.0))


def lasso_cd(
    system: GramSystem,
    response: int,
    mask: PredictorMask,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: np.ndarray | None = None,
) -> LassoSolution:
    """Solve one masked penalized problem by cyclic coordinate descent.

    Sweeps the allowed coordinates in flat-index order until the largest
    coordinate change in a sweep falls below `tol`. Raises
    ConvergenceError (carrying the last iterate) if `max_iter` sweeps are
    exhausted.
    """
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    _check_mask(system, mask)
    idx = _effective_indices(system, response, mask)
    p = system.p
    if idx.size == 0:
        beta = np.zeros(p)
        return LassoSolution(
            beta, lam, 0, kkt_residual(system, response, beta, lam, mask), 0.0
        )
    gamma = system.gamma(response)
    if idx.size == p:
        sub_gram = system.gram
        sub_gamma = gamma
    else:
        sub_gram = np.ascontiguousarray(system.gram[np.ix_(idx, idx)])
        sub_gamma = np.ascontiguousarray(gamma[idx])
    if warm_start is None:
        beta0 = np.zeros(idx.size)
    else:
        warm_start = np.asarray(warm_start, dtype=float)
        if warm_start.shape != (p,):
            raise ShapeError(f"warm_start shape {warm_start.shape} != ({p},)")
        beta0 = warm_start[idx].copy()
    betas, sweeps, ok, _ = _cd_path(
        np.ascontiguousarray(sub_gram),
        np.ascontiguousarray(sub_gamma, dtype=float),
        np.array([float(lam)]),
        float(tol),
        int(max_iter),
        beta0,
    )
    beta = np.zeros(p)
    beta[idx] = betas[0]
    if not ok[0]:
        raise ConvergenceError(
            f"coordinate descent did not converge in {max_iter} sweeps "
            f"(response {response}, lambda {lam:g})",
            last_iterate=beta,
            residual=kkt_residual(system, response, beta, lam, mask),
        )
    return LassoSolution(
        beta,
        float(lam),
        int(sweeps[0]),
        kkt_residual(system, response, beta, lam, mask),
        objective_value(system, response, beta, lam),
    )


def lasso_path(
    system: GramSystem,
    response: int,
    mask: PredictorMask,
    lams: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Warm-started solutions over a descending penalty grid.

    Returns an (n_lambda, kL) array; masked-out coordinates are zero in
    every row. Non-convergence at any grid point raises ConvergenceError.
    """
    lams = np.asarray(lams, dtype=float)
    if lams.ndim != 1 or lams.size == 0:
        raise ValidationError("lambda grid must be a nonempty 1-D array")
    if np.any(np.diff(lams) > 0):
        raise ValidationError("lambda grid must be non-increasing")
    _check_mask(system, mask)
    idx = _effective_indices(system, response, mask)
    out = np.zeros((lams.size, system.p))
    if idx.size == 0:
        return out
    gamma = system.gamma(response)
    if idx.size == system.p:
        sub_gram, sub_gamma = system.gram, gamma
    else:
        sub_gram = np.ascontiguousarray(system.gram[np.ix_(idx, idx)])
        sub_gamma = np.ascontiguousarray(gamma[idx])
    betas, _, ok, _ = _cd_path(
        np.ascontiguousarray(sub_gram),
        np.ascontiguousarray(sub_gamma, dtype=float),
        lams,
        float(tol),
        int(max_iter),
        np.zeros(idx.size),
    )
    if not ok.all():
        li = int(np.flatnonzero(~ok)[0])
        out[:, idx] = betas
        raise ConvergenceError(
            f"coordinate descent did not converge in {max_iter} sweeps "
            f"(response {response}, lambda {lams[li]:g})",
            last_iterate=out[li],
            residual=None,
        )
    out[:, idx] = betas
    return out
