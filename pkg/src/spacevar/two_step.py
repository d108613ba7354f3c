"""Two-step distance-restricted estimation of sparse transition matrices.

Step 1 samples a subset of nodes, estimates their incoming edges by
regressing each sampled node on the lagged values of every node, and
takes the largest distance spanned by a detected edge as the dependence
radius estimate. Step 2 refits all nodes under the constraint that
coefficients at distances beyond that radius are exactly zero. Supplying
a known (or upper-bounded) radius skips Step 1 entirely.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyEdgeSetError,
    EmptySampleError,
    ShapeError,
    ValidationError,
)
from .regression import (
    GramSystem,
    PredictorMask,
    build_gram,
    full_mask,
    lambda_max,
    lasso_cd,
)
from .seeding import child_int, child_seed
from .spatial import SpatialLayout
from .stability import FrequencyMatrix, StabilityConfig, frequencies_bulk, select
from .var_model import TimeSeriesPanel, TransitionStack

RHO_MODE_ESTIMATE = "estimate"
RHO_MODE_KNOWN = "known"
RHO_MODE_UPPER_BOUND = "upper_bound"
RHO_MODE_FULL = "full"
RHO_MODE_FALLBACK = "fallback_rho_max"

SELECTION_STABILITY = "stability"
SELECTION_SINGLE = "single"
SELECTION_PATH = "path"


# ---------------------------------------------------------------------------
# node sampling designs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingDesign:
    """How Step 1 draws its node subset.

    Variants: bernoulli (independent inclusion with per-node probability),
    srs (simple random sample without replacement), stratified (per-stratum
    allocation proportional to stratum share with largest-remainder
    rounding, uniform within stratum).
    """

    variant: str
    theta: np.ndarray | float | None = None
    n: int | None = None
    strata: tuple | None = None
    total: int | None = None

    @staticmethod
    def bernoulli(theta) -> "SamplingDesign":
        return SamplingDesign(variant="bernoulli", theta=theta)

    @staticmethod
    def srs(n: int) -> "SamplingDesign":
        return SamplingDesign(variant="srs", n=int(n))

    @staticmethod
    def stratified(strata, total: int) -> "SamplingDesign":
        return SamplingDesign(
            variant="stratified", strata=tuple(strata), total=int(total)
        )


def largest_remainder_allocation(counts: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation proportional to `counts` summing to `total`.

    Floors the exact quotas and hands leftover units to the largest
    fractional remainders; remainder ties break toward earlier strata.
    """
    counts = np.asarray(counts, dtype=float)
    quotas = total * counts / counts.sum()
    alloc = np.floor(quotas).astype(int)
    remainder = quotas - alloc
    short = total - int(alloc.sum())
    if short > 0:
        order = np.lexsort((np.arange(counts.size), -remainder))
        alloc[order[:short]] += 1
    return alloc


def sample_nodes(design: SamplingDesign, k: int, seed) -> np.ndarray:
    """Draw the Step-1 node subset; sorted indices, deterministic per seed."""
    rng = np.random.default_rng(seed)
    if design.variant == "bernoulli":
        theta = np.broadcast_to(np.asarray(design.theta, dtype=float), (k,))
        if np.any(theta <= 0.0) or np.any(theta > 1.0):
            raise ValidationError("bernoulli probabilities must lie in (0, 1]")
        for _ in range(100):
            keep = rng.random(k) < theta
            if keep.any():
                return np.flatnonzero(keep)
        raise EmptySampleError(
            "bernoulli sampling produced an empty subset 100 times in a row"
        )
    if design.variant == "srs":
        if design.n is None or not 1 <= design.n <= k:
            raise ValidationError(f"srs size must lie in 1..{k}, got {design.n}")
        return np.sort(rng.choice(k, size=design.n, replace=False))
    if design.variant == "stratified":
        strata = design.strata
        if strata is None or len(strata) != k:
            raise ValidationError("stratified design needs one label per node")
        if design.total is None or not 1 <= design.total <= k:
            raise ValidationError(
                f"stratified total must lie in 1..{k}, got {design.total}"
            )
        labels = list(dict.fromkeys(strata))  # first-appearance order
        members = [np.flatnonzero([s == lab for s in strata]) for lab in labels]
        counts = np.array([m.size for m in members])
        alloc = largest_remainder_allocation(counts, design.total)
        picks = []
        for m, a in zip(members, alloc):
            a = min(int(a), m.size)
            if a > 0:
                picks.append(np.sort(rng.choice(m, size=a, replace=False)))
        if not picks:
            raise EmptySampleError("stratified allocation selected no nodes")
        return np.sort(np.concatenate(picks))
    raise ValidationError(f"unknown sampling design variant {design.variant!r}")


# ---------------------------------------------------------------------------
# edges and fit results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    """Directed lagged edge source -> target with its spanned distance."""

    source: int
    target: int
    lag: int
    coefficient: float
    distance: float


@dataclass(frozen=True)
class EdgeSet:
    """Collection of detected (nonzero-coefficient) edges."""

    edges: tuple[Edge, ...]

    def __post_init__(self):
        for e in self.edges:
            if e.coefficient == 0.0:
                raise ValidationError(
                    f"edge {e.source}->{e.target} lag {e.lag} has zero coefficient"
                )
        object.__setattr__(self, "edges", tuple(self.edges))

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def max_distance(self) -> float:
        if not self.edges:
            raise EmptyEdgeSetError("edge set is empty; no radius is defined")
        return max(e.distance for e in self.edges)

    def triples(self) -> set[tuple[int, int, int]]:
        """The (target, source, lag) support triples."""
        return {(e.target, e.source, e.lag) for e in self.edges}


def edges_from_betas(
    betas: np.ndarray, layout: SpatialLayout, targets=None
) -> EdgeSet:
    """Read the nonzero pattern of stacked coefficients into an edge set."""
    betas = np.asarray(betas)
    k = layout.k
    if betas.ndim != 2 or betas.shape[1] % k != 0:
        raise ShapeError(f"betas shape {betas.shape} incompatible with k={k}")
    if targets is None:
        targets = range(betas.shape[0])
    edges = []
    for row, target in enumerate(targets):
        for flat in np.flatnonzero(betas[row]):
            source = int(flat % k)
            lag = int(flat // k) + 1
            edges.append(
                Edge(
                    source=source,
                    target=int(target),
                    lag=lag,
                    coefficient=float(betas[row, flat]),
                    distance=layout.distance(int(target), source),
                )
            )
    return EdgeSet(tuple(edges))


@dataclass(frozen=True)
class ComponentDiagnostics:
    """Solver bookkeeping for one response component."""

    component: int
    lam: float
    iterations: int
    kkt_residual: float
    support_size: int
    seconds: float


@dataclass(frozen=True)
class FitResult:
    """Stacked per-component estimates plus everything needed to audit them."""

    betas: np.ndarray
    lags: int
    rho_hat: float | None
    rho_mode: str
    edge_set: EdgeSet
    sampled_nodes: np.ndarray | None
    timings: dict[str, float]
    diagnostics: tuple[ComponentDiagnostics, ...]
    scores: np.ndarray
    seed: int

    @property
    def k(self) -> int:
        return self.betas.shape[0]

    def transition_stack(self) -> TransitionStack:
        """View the rows of `betas` as L transition matrices."""
        k, L = self.k, self.lags
        return TransitionStack(
            tuple(self.betas[:, l * k : (l + 1) * k] for l in range(L))
        )


# ---------------------------------------------------------------------------
# selection configuration shared by both steps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionConfig:
    """How a step picks supports and coefficients.

    method "stability": threshold subsampled selection frequencies, then
    refit the selected support at `refit_lambda` (default 0, plain least
    squares on the support); scores are the frequencies. method "single":
    one lasso fit at lambda = `lam` (absolute) or `lam_frac` times the
    response's lambda_max; scores are |beta|. method "path" behaves like
    "single" but scores each coordinate by its largest |beta| along the
    default penalty grid.
    """

    method: str = SELECTION_STABILITY
    lam: float | None = None
    lam_frac: float = 0.1
    stability: StabilityConfig = StabilityConfig()
    refit_lambda: float = 0.0
    tol: float = 1e-7
    max_iter: int = 10_000

    def __post_init__(self):
        if self.method not in (SELECTION_STABILITY, SELECTION_SINGLE, SELECTION_PATH):
            raise ValidationError(f"unknown selection method {self.method!r}")
        if self.lam is not None and self.lam < 0:
            raise ValidationError("lam must be >= 0")
        if self.lam is None and not 0 < self.lam_frac <= 1:
            raise ValidationError("lam_frac must lie in (0, 1]")
        if self.refit_lambda < 0:
            raise ValidationError("refit_lambda must be >= 0")

    def resolve_lambda(
        self, system: GramSystem, response: int, mask: PredictorMask
    ) -> float:
        if self.lam is not None:
            return float(self.lam)
        return self.lam_frac * lambda_max(system, response, mask)


@dataclass(frozen=True)
class TwoStepConfig:
    """Full configuration of the two-step estimator."""

    lags: int = 1
    design: SamplingDesign = SamplingDesign.bernoulli(0.5)
    step1: SelectionConfig = SelectionConfig()
    step2: SelectionConfig = SelectionConfig()
    rho_mode: str = RHO_MODE_ESTIMATE
    rho: float | None = None
    rho_slack: float = 1.0

    def __post_init__(self):
        if self.lags < 1:
            raise ValidationError("lags must be >= 1")
        if self.rho_mode not in (
            RHO_MODE_ESTIMATE,
            RHO_MODE_KNOWN,
            RHO_MODE_UPPER_BOUND,
        ):
            raise ValidationError(f"unknown rho_mode {self.rho_mode!r}")
        if self.rho_mode != RHO_MODE_ESTIMATE:
            if self.rho is None or self.rho < 0:
                raise ValidationError(
                    f"rho_mode {self.rho_mode!r} requires a nonnegative rho"
                )
        if self.rho_slack < 1.0:
            raise ValidationError("rho_slack must be >= 1")


# ---------------------------------------------------------------------------
# masks and radius
# ---------------------------------------------------------------------------


def build_distance_mask(
    layout: SpatialLayout, rho: float, lags: int, target: int
) -> PredictorMask:
    """Whitelist of predictors within the closed ball of radius rho.

    Predictor (source j, lag l) is allowed iff d(target, j) <= rho; the
    target's own lags are always allowed because d(i, i) = 0. The allowed
    count equals n_target(rho) * L.
    """
    if rho < 0:
        raise ValidationError(f"rho must be >= 0, got {rho}")
    if not 0 <= target < layout.k:
        raise ValidationError(f"target {target} out of range 0..{layout.k - 1}")
    near = layout.distances[target] <= rho
    return PredictorMask(np.tile(near, lags))


def estimate_radius(edge_set: EdgeSet) -> float:
    """Largest distance spanned by a detected edge.

    An empty edge set raises EmptyEdgeSetError rather than returning 0: a
    zero radius would silently restrict Step 2 to self-lags.
    """
    return edge_set.max_distance()


# ---------------------------------------------------------------------------
# per-component fitting engine
# ---------------------------------------------------------------------------


def _fit_components(
    panel: TimeSeriesPanel,
    targets: np.ndarray,
    masks: list[PredictorMask],
    lags: int,
    selection: SelectionConfig,
    seed: int,
    threads: int = 1,
    system: GramSystem | None = None,
) -> tuple[np.ndarray, np.ndarray, list[ComponentDiagnostics]]:
    """Fit the given responses under their masks.

    Returns (betas, scores, diagnostics) where rows align with `targets`.
    """
    if system is None:
        system = build_gram(panel, lags)
    p = system.p
    betas = np.zeros((targets.size, p))
    scores = np.zeros((targets.size, p))
    diagnostics: list[ComponentDiagnostics | None] = [None] * targets.size

    if selection.method == SELECTION_STABILITY:
        freqs = frequencies_bulk(
            panel,
            targets,
            masks,
            lags,
            selection.stability,
            child_seed(seed, "stability"),
            threads=threads,
            system=system,
        )
        scores[:] = freqs

        def fit_one(pos: int) -> None:
            t0 = time.perf_counter()
            resp = int(targets[pos])
            support = select(
                FrequencyMatrix(freqs[pos]), selection.stability.threshold
            )
            support_mask = np.zeros(p, dtype=bool)
            support_mask[support] = True
            if support.size:
                sol = lasso_cd(
                    system,
                    resp,
                    PredictorMask(support_mask),
                    selection.refit_lambda,
                    tol=selection.tol,
                    max_iter=selection.max_iter,
                )
                betas[pos] = sol.beta
                kkt, iters = sol.kkt_residual, sol.iterations
                lam = selection.refit_lambda
            else:
                kkt, iters, lam = 0.0, 0, selection.refit_lambda
            diagnostics[pos] = ComponentDiagnostics(
                component=resp,
                lam=lam,
                iterations=iters,
                kkt_residual=kkt,
                support_size=int(np.count_nonzero(betas[pos])),
                seconds=time.perf_counter() - t0,
            )

    else:

        def fit_one(pos: int) -> None:
            t0 = time.perf_counter()
            resp = int(targets[pos])
            mask = masks[pos]
            lam = selection.resolve_lambda(system, resp, mask)
            sol = lasso_cd(
                system,
                resp,
                mask,
                lam,
                tol=selection.tol,
                max_iter=selection.max_iter,
            )
            betas[pos] = sol.beta
            if selection.method == SELECTION_PATH:
                cfg = selection.stability
                grid = cfg.grid_for(system, resp, mask)
                from .regression import lasso_path

                path = lasso_path(
                    system, resp, mask, grid,
                    tol=selection.tol, max_iter=selection.max_iter,
                )
                scores[pos] = np.abs(path).max(axis=0)
            else:
                scores[pos] = np.abs(sol.beta)
            diagnostics[pos] = ComponentDiagnostics(
                component=resp,
                lam=float(lam),
                iterations=sol.iterations,
                kkt_residual=sol.kkt_residual,
                support_size=int(np.count_nonzero(sol.beta)),
                seconds=time.perf_counter() - t0,
            )

    positions = list(range(targets.size))
    if threads <= 1 or targets.size <= 1:
        for pos in positions:
            fit_one(pos)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fit_one, positions))
    return betas, scores, [d for d in diagnostics if d is not None]


# ---------------------------------------------------------------------------
# the algorithm steps
# ---------------------------------------------------------------------------


def step1_estimate_edges(
    panel: TimeSeriesPanel,
    layout: SpatialLayout,
    sampled: np.ndarray,
    lags: int,
    selection: SelectionConfig,
    seed: int,
    threads: int = 1,
    system: GramSystem | None = None,
) -> EdgeSet:
    """Estimate the incoming edges of the sampled nodes.

    Every sampled node is regressed on the lagged values of all k nodes,
    its own included: dropping self-lags would misspecify the
    autoregression. Detected nonzero coefficients become directed edges
    into the sampled node, annotated with the spanned distance.
    """
    sampled = np.asarray(sampled, dtype=int)
    if sampled.size == 0:
        raise ValidationError("sampled node set must be nonempty")
    if panel.k != layout.k:
        raise ShapeError(f"panel has {panel.k} series, layout has {layout.k} nodes")
    if system is None:
        system = build_gram(panel, lags)
    masks = [full_mask(system.p) for _ in range(sampled.size)]
    betas, _, _ = _fit_components(
        panel, sampled, masks, lags, selection, seed,
        threads=threads, system=system,
    )
    return edges_from_betas(betas, layout, targets=sampled)


def step2_fit(
    panel: TimeSeriesPanel,
    layout: SpatialLayout,
    rho: float,
    lags: int,
    selection: SelectionConfig,
    seed: int,
    threads: int = 1,
    rho_mode: str = RHO_MODE_KNOWN,
    sampled_nodes: np.ndarray | None = None,
    system: GramSystem | None = None,
) -> FitResult:
    """Fit every component under its distance mask at radius rho."""
    if panel.k != layout.k:
        raise ShapeError(f"panel has {panel.k} series, layout has {layout.k} nodes")
    if rho < 0:
        raise ValidationError(f"rho must be >= 0, got {rho}")
    t0 = time.perf_counter()
    targets = np.arange(layout.k)
    masks = [build_distance_mask(layout, rho, lags, int(i)) for i in targets]
    betas, scores, diags = _fit_components(
        panel, targets, masks, lags, selection, seed,
        threads=threads, system=system,
    )
    elapsed = time.perf_counter() - t0
    return FitResult(
        betas=betas,
        lags=lags,
        rho_hat=float(rho),
        rho_mode=rho_mode,
        edge_set=edges_from_betas(betas, layout),
        sampled_nodes=sampled_nodes,
        timings={"step1": 0.0, "step2": elapsed, "total": elapsed},
        diagnostics=tuple(diags),
        scores=scores,
        seed=int(seed) if np.isscalar(seed) else -1,
    )


def fit_full(
    panel: TimeSeriesPanel,
    layout: SpatialLayout,
    lags: int,
    selection: SelectionConfig,
    seed: int,
    threads: int = 1,
) -> FitResult:
    """Unrestricted fit: every predictor allowed for every component."""
    if panel.k != layout.k:
        raise ShapeError(f"panel has {panel.k} series, layout has {layout.k} nodes")
    t0 = time.perf_counter()
    system = build_gram(panel, lags)
    targets = np.arange(layout.k)
    masks = [full_mask(system.p) for _ in targets]
    betas, scores, diags = _fit_components(
        panel, targets, masks, lags, selection, seed,
        threads=threads, system=system,
    )
    elapsed = time.perf_counter() - t0
    return FitResult(
        betas=betas,
        lags=lags,
        rho_hat=None,
        rho_mode=RHO_MODE_FULL,
        edge_set=edges_from_betas(betas, layout),
        sampled_nodes=None,
        timings={"step1": 0.0, "step2": elapsed, "total": elapsed},
        diagnostics=tuple(diags),
        scores=scores,
        seed=int(seed) if np.isscalar(seed) else -1,
    )


def two_step(
    panel: TimeSeriesPanel,
    layout: SpatialLayout,
    config: TwoStepConfig,
    seed: int,
    threads: int = 1,
) -> FitResult:
    """Run the full two-step procedure.

    With rho_mode "estimate" this samples nodes, estimates their edges,
    takes the maximum detected edge distance (times `rho_slack`) as the
    radius, and then runs the constrained fit. Modes "known" and
    "upper_bound" skip Step 1 and use `config.rho` directly. An empty
    Step-1 edge set falls back to the maximal pairwise distance, which
    reduces Step 2 to the unrestricted fit; this is loudly warned about
    and never silently treated as a zero radius.
    """
    if panel.k != layout.k:
        raise ShapeError(f"panel has {panel.k} series, layout has {layout.k} nodes")
    sampled = None
    step1_seconds = 0.0
    rho_mode = config.rho_mode
    if config.rho_mode == RHO_MODE_ESTIMATE:
        t0 = time.perf_counter()
        system = build_gram(panel, config.lags)
        sampled = sample_nodes(config.design, layout.k, child_seed(seed, "sample"))
        edges = step1_estimate_edges(
            panel, layout, sampled, config.lags, config.step1,
            child_int(seed, "step1"), threads=threads, system=system,
        )
        try:
            rho = estimate_radius(edges) * config.rho_slack
            rho_mode = RHO_MODE_ESTIMATE
        except EmptyEdgeSetError:
            rho = layout.rho_max
            rho_mode = RHO_MODE_FALLBACK
            warnings.warn(
                "Step 1 detected no edges; falling back to the maximal "
                f"pairwise distance rho={rho:g} (unrestricted Step 2)",
                stacklevel=2,
            )
        step1_seconds = time.perf_counter() - t0
    else:
        rho = float(config.rho)
        system = None
    result = step2_fit(
        panel,
        layout,
        rho,
        config.lags,
        config.step2,
        child_int(seed, "step2"),
        threads=threads,
        rho_mode=rho_mode,
        sampled_nodes=sampled,
        system=None,  # step-2 timing includes its own gram build
    )
    timings = {
        "step1": step1_seconds,
        "step2": result.timings["step2"],
        "total": step1_seconds + result.timings["step2"],
    }
    return replace(result, timings=timings, seed=int(seed))
