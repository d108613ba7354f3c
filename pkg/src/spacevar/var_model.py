"""Vector autoregressive processes: containers, simulation, and forecasting.

A VAR(L) observation X(t) is a linear combination of the previous L
observations plus independent Gaussian noise:

    X(t) = A_1 X(t-1) + ... + A_L X(t-L) + e(t),   e(t) ~ N(0, diag(sigma^2))

Entry (j, i) of A_l carries the lag-l influence of component i on
component j. Panels are stored row-per-time-step with rows t = 0..M, so a
fit of order L has N = T - L effective observations.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientDataError,
    ShapeError,
    StabilityError,
    ValidationError,
)

#: simulations within this spectral-radius band trigger a near-unit-root warning
NEAR_UNIT_ROOT_BAND = 0.99

#: default number of warm-up steps discarded before recording a simulation
DEFAULT_BURN_IN = 500


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesPanel:
    """T x k observation matrix with optional missing markers.

    Row t holds the observation at time t. `missing_mask[t, i]` is True
    where value (t, i) is unobserved; masked cells are also stored as NaN
    so downstream code cannot silently consume them.
    """

    values: np.ndarray
    series_ids: tuple[str, ...]
    missing_mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"panel values must be 2-D, got shape {values.shape}")
        T, k = values.shape
        if T < 1 or k < 1:
            raise ValidationError(f"panel must be at least 1x1, got {T}x{k}")
        ids = tuple(str(s) for s in self.series_ids)
        if len(ids) != k:
            raise ShapeError(f"{len(ids)} series ids for {k} columns")
        if len(set(ids)) != k:
            raise ValidationError("series ids must be unique")
        mask = self.missing_mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != values.shape:
                raise ShapeError(
                    f"missing_mask shape {mask.shape} != values shape {values.shape}"
                )
            if mask.any():
                values = values.copy()
                values[mask] = np.nan
            mask.setflags(write=False)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "series_ids", ids)
        object.__setattr__(self, "missing_mask", mask)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def has_missing(self) -> bool:
        if self.missing_mask is not None and bool(self.missing_mask.any()):
            return True
        return bool(np.isnan(self.values).any())

    def effective_obs(self, lags: int) -> int:
        """N = T - L, the number of usable responses at order `lags`."""
        return self.n_obs - lags

    def rows(self, start: int, stop: int | None = None) -> "TimeSeriesPanel":
        """Contiguous sub-panel of rows [start, stop)."""
        mask = None if self.missing_mask is None else self.missing_mask[start:stop]
        return TimeSeriesPanel(self.values[start:stop], self.series_ids, mask)


def default_series_ids(k: int) -> tuple[str, ...]:
    return tuple(f"s{i + 1}" for i in range(k))


@dataclass(frozen=True)
class TransitionStack:
    """The L transition matrices A_1..A_L of a VAR(L) process."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        if len(mats) < 1:
            raise ValidationError("need at least one transition matrix")
        k = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for i, m in enumerate(mats):
            if m.ndim != 2 or m.shape != (k, k):
                raise ShapeError(
                    f"transition matrix {i} has shape {m.shape}, expected ({k}, {k})"
                )
        object.__setattr__(self, "matrices", tuple(_readonly(m) for m in mats))

    @property
    def lags(self) -> int:
        return len(self.matrices)

    @property
    def k(self) -> int:
        return self.matrices[0].shape[0]

    def coefficient(self, target: int, source: int, lag: int) -> float:
        """Lag-`lag` coefficient from `source` into `target` (lag is 1-based)."""
        return float(self.matrices[lag - 1][target, source])

    def nonzero_triples(self) -> list[tuple[int, int, int]]:
        """All (target, source, lag) with a nonzero coefficient."""
        out = []
        for l, A in enumerate(self.matrices, start=1):
            for t, s in zip(*np.nonzero(A)):
                out.append((int(t), int(s), l))
        return out

    def scaled(self, factor: float) -> "TransitionStack":
        """Rescale A_l by factor**l; companion eigenvalues scale by `factor`."""
        return TransitionStack(
            tuple(A * factor**l for l, A in enumerate(self.matrices, start=1))
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal Gaussian noise: per-component variances sigma_i^2 > 0."""

    variances: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.variances, dtype=float).reshape(-1)
        if v.size < 1:
            raise ValidationError("noise needs at least one variance")
        if not np.all(v > 0):
            raise ValidationError("all noise variances must be positive")
        object.__setattr__(self, "variances", _readonly(v))

    @property
    def k(self) -> int:
        return self.variances.shape[0]


@dataclass(frozen=True)
class VarProcess:
    """A transition stack paired with its noise specification."""

    transition: TransitionStack
    noise: NoiseSpec
    spectral_radius: float = field(init=False)

    def __post_init__(self):
        if self.noise.k != self.transition.k:
            raise ShapeError(
                f"noise dimension {self.noise.k} != transition dimension "
                f"{self.transition.k}"
            )
        object.__setattr__(
            self, "spectral_radius", companion_spectral_radius(self.transition)
        )

    @property
    def k(self) -> int:
        return self.transition.k

    @property
    def lags(self) -> int:
        return self.transition.lags

    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0


def companion_matrix(stack: TransitionStack) -> np.ndarray:
    """kL x kL block matrix [A_1 ... A_L; I 0] driving the stacked recursion."""
    k, L = stack.k, stack.lags
    if L == 1:
        return np.array(stack.matrices[0])
    C = np.zeros((k * L, k * L))
    for l in range(L):
        C[:k, l * k : (l + 1) * k] = stack.matrices[l]
    C[k:, : k * (L - 1)] = np.eye(k * (L - 1))
    return C


def companion_spectral_radius(stack: TransitionStack) -> float:
    """Largest eigenvalue modulus of the companion matrix.

    The process is stable (hence stationary) iff the result is < 1.
    """
    eigvals = np.linalg.eigvals(companion_matrix(stack))
    return float(np.max(np.abs(eigvals))) if eigvals.size else 0.0


def simulate(
    process: VarProcess,
    n_obs: int,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int | np.random.SeedSequence = 0,
    allow_unstable: bool = False,
) -> TimeSeriesPanel:
    """Draw a panel of `n_obs` rows from the process.

    The recursion starts from the zero state and the first `burn_in` steps
    are discarded. Identical seeds produce bit-identical panels.

    Parameters
    ----------
    process : VarProcess
        Must be stable unless `allow_unstable` is set.
    n_obs : int
        Number of rows to record after burn-in.
    burn_in : int
        Warm-up steps; 500 is ample for spectral radius <= 0.95.
    seed : int or SeedSequence
        Source of the noise stream.
    allow_unstable : bool
        Explicit override for experiments on explosive processes.
    """
    if n_obs < 1:
        raise ValidationError(f"n_obs must be >= 1, got {n_obs}")
    if burn_in < 0:
        raise ValidationError(f"burn_in must be >= 0, got {burn_in}")
    radius = process.spectral_radius
    if radius >= 1.0 and not allow_unstable:
        raise StabilityError(
            f"process is unstable (companion spectral radius {radius:.6f} >= 1); "
            "pass allow_unstable=True to simulate anyway"
        )
    if NEAR_UNIT_ROOT_BAND <= radius < 1.0:
        warnings.warn(
            f"spectral radius {radius:.4f} is near the unit root; "
            f"burn_in={burn_in} may be insufficient for stationarity",
            stacklevel=2,
        )
    k, L = process.k, process.lags
    rng = np.random.default_rng(seed)
    scales = np.sqrt(process.noise.variances)
    total = burn_in + n_obs
    noise = rng.standard_normal((total, k)) * scales
    mats = process.transition.matrices
    out = np.zeros((total + L, k))
    for t in range(total):
        row = noise[t]
        acc = row.copy()
        for l in range(1, L + 1):
            acc += mats[l - 1] @ out[L + t - l]
        out[L + t] = acc
    return TimeSeriesPanel(out[L + burn_in :], default_series_ids(k))


def stationary_covariance(
    process: VarProcess, tol: float = 1e-12, max_iter: int = 100_000
) -> np.ndarray:
    """Lag-0 covariance of the stationary distribution.

    Iterates the fixed point V <- C V C' + E in companion form until the
    largest entrywise change drops below `tol`, then returns the top-left
    k x k block. Serves as the independent oracle for `simulate`.
    """
    if not process.is_stable():
        raise StabilityError(
            "stationary covariance requires a stable process "
            f"(spectral radius {process.spectral_radius:.6f})"
        )
    if tol <= 0:
        raise ValidationError("tol must be positive")
    k, L = process.k, process.lags
    C = companion_matrix(process.transition)
    E = np.zeros((k * L, k * L))
    E[:k, :k] = np.diag(process.noise.variances)
    V = E.copy()
    for _ in range(max_iter):
        V_next = C @ V @ C.T + E
        change = float(np.max(np.abs(V_next - V)))
        V = V_next
        if change < tol:
            V = 0.5 * (V + V.T)
            return V[:k, :k]
    from .errors import ConvergenceError

    raise ConvergenceError(
        f"stationary covariance did not converge within {max_iter} iterations",
        last_iterate=V[:k, :k],
        residual=change,
    )


def forecast(
    panel: TimeSeriesPanel, stack: TransitionStack, horizon: int
) -> np.ndarray:
    """Recursive plug-in forecast of the next `horizon` rows.

    Observed values feed the recursion while available; beyond the panel
    the forecast re-uses its own predictions.
    """
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if stack.k != panel.k:
        raise ShapeError(
            f"stack dimension {stack.k} != panel dimension {panel.k}"
        )
    L = stack.lags
    if panel.n_obs < L:
        raise InsufficientDataError(
            f"forecast of order {L} needs at least {L} rows, panel has {panel.n_obs}"
        )
    history = np.vstack([panel.values[-L:], np.zeros((horizon, panel.k))])
    mats = stack.matrices
    for h in range(horizon):
        acc = np.zeros(panel.k)
        for l in range(1, L + 1):
            acc += mats[l - 1] @ history[L + h - l]
        history[L + h] = acc
    return history[L:]


# ---------------------------------------------------------------------------
# panel CSV format: header `t,<id1>,...,<idk>`, one row per time step,
# missing values as an empty field or the literal `NA`.
# ---------------------------------------------------------------------------

_MISSING_TOKENS = {"", "NA"}


def write_panel_csv(panel: TimeSeriesPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *panel.series_ids])
        missing = panel.missing_mask
        for t in range(panel.n_obs):
            row: list[object] = [t]
            for i in range(panel.k):
                v = panel.values[t, i]
                if (missing is not None and missing[t, i]) or math.isnan(v):
                    row.append("NA")
                else:
                    row.append(repr(float(v)))
            writer.writerow(row)


def read_panel_csv(path) -> TimeSeriesPanel:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or len(header) < 2:
            raise ValidationError(
                f"{path}: expected header 't,<id1>,...,<idk>', got {header}"
            )
        ids = tuple(header[1:])
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValidationError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(rec)}"
                )
            rows.append(rec[1:])
    if not rows:
        raise ValidationError(f"{path}: panel has no observation rows")
    values = np.empty((len(rows), len(ids)))
    mask = np.zeros_like(values, dtype=bool)
    for t, rec in enumerate(rows):
        for i, tok in enumerate(rec):
            if tok.strip() in _MISSING_TOKENS:
                values[t, i] = np.nan
                mask[t, i] = True
            else:
                values[t, i] = float(tok)
    return TimeSeriesPanel(values, ids, mask if mask.any() else None)
