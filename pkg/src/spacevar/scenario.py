"""Synthetic worlds with known spatial structure and sparse dynamics.

A scenario is a layout (uniform square or Gaussian clusters around
uniformly placed centers), a sparse transition stack whose edges mostly
stay within neighborhoods while cross-neighborhood edges are capped at a
distance quantile, and the full ground truth needed to score any fit:
the support, the true dependence radius, and the minimum signal size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError, ValidationError
from .spatial import SpatialLayout
from .two_step import Edge, EdgeSet, edges_from_betas
from .var_model import NoiseSpec, TransitionStack, VarProcess, companion_spectral_radius

LAYOUT_UNIFORM = "uniform_square"
LAYOUT_GAUSSIAN = "gaussian_clusters"


@dataclass(frozen=True)
class LayoutSpec:
    """Geometry of a synthetic layout.

    uniform_square scatters `k` nodes uniformly over the square and labels
    each by its nearest of `n_centers` uniformly drawn centers (the labels
    drive within/between edge assignment). gaussian_clusters draws
    `n_centers` centers uniformly and `per_cluster` Gaussian satellites of
    standard deviation `spread` around each, so k = n_centers * per_cluster.
    """

    variant: str = LAYOUT_GAUSSIAN
    k: int | None = None
    n_centers: int = 5
    per_cluster: int = 20
    spread: float = 0.05
    side: float = 1.0

    def __post_init__(self):
        if self.variant not in (LAYOUT_UNIFORM, LAYOUT_GAUSSIAN):
            raise ValidationError(f"unknown layout variant {self.variant!r}")
        if self.n_centers < 1 or self.per_cluster < 1:
            raise ValidationError("counts must be >= 1")
        if self.variant == LAYOUT_UNIFORM and (self.k is None or self.k < 1):
            raise ValidationError("uniform_square needs k >= 1")
        if self.spread <= 0:
            raise ValidationError("spread must be positive")
        if self.side <= 0:
            raise ValidationError("side must be positive")

    @property
    def n_nodes(self) -> int:
        if self.variant == LAYOUT_UNIFORM:
            return int(self.k)
        return self.n_centers * self.per_cluster


@dataclass(frozen=True)
class SparsitySpec:
    """Shape of the sparse transition structure.

    `density` of the k^2 possible directed pairs receive an edge;
    `within_fraction` of the edges connect nodes sharing a cluster label,
    the rest cross clusters subject to distance at most the
    `between_quantile` of the pairwise distance distribution. Coefficient
    magnitudes are uniform over `coefficient_range` with random sign, and
    the stack is rescaled so the companion spectral radius hits
    `target_spectral_radius` exactly.
    """

    density: float = 0.02
    within_fraction: float = 0.9
    between_quantile: float = 0.3
    coefficient_range: tuple[float, float] = (0.2, 0.8)
    target_spectral_radius: float = 0.9

    def __post_init__(self):
        if not 0 < self.density <= 1:
            raise ValidationError("density must lie in (0, 1]")
        if not 0 <= self.within_fraction <= 1:
            raise ValidationError("within_fraction must lie in [0, 1]")
        if not 0 < self.between_quantile < 1:
            raise ValidationError("between_quantile must lie in (0, 1)")
        lo, hi = self.coefficient_range
        if not 0 < lo <= hi:
            raise ValidationError("coefficient_range must satisfy 0 < lo <= hi")
        if not 0 < self.target_spectral_radius < 1:
            raise ValidationError("target_spectral_radius must lie in (0, 1)")


@dataclass(frozen=True)
class ScenarioTruth:
    """Everything needed to simulate from and score against a scenario."""

    process: VarProcess
    layout: SpatialLayout
    labels: np.ndarray
    support: EdgeSet
    rho_true: float
    beta_min: float
    seed: int


def gen_layout(spec: LayoutSpec, seed) -> tuple[SpatialLayout, np.ndarray]:
    """Generate positions and cluster labels; identical per seed."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, spec.side, size=(spec.n_centers, 2))
    if spec.variant == LAYOUT_UNIFORM:
        positions = rng.uniform(0.0, spec.side, size=(spec.k, 2))
        diff = positions[:, None, :] - centers[None, :, :]
        labels = np.argmin(np.sum(diff * diff, axis=2), axis=1)
    else:
        positions = np.concatenate(
            [
                c + spec.spread * rng.standard_normal((spec.per_cluster, 2))
                for c in centers
            ]
        )
        labels = np.repeat(np.arange(spec.n_centers), spec.per_cluster)
    return SpatialLayout(positions), labels.astype(int)


def quantile_radius(layout: SpatialLayout, q: float) -> float:
    """Lower-nearest-rank q-quantile of the k(k-1)/2 pairwise distances."""
    if not 0 < q < 1:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    if layout.k < 2:
        raise ValidationError("quantile radius needs at least two nodes")
    dists = np.sort(layout.pairwise_distances())
    rank = max(1, math.ceil(q * dists.size))
    return float(dists[rank - 1])


def _draw_triples(
    rng: np.random.Generator,
    pairs: np.ndarray,
    lags: int,
    count: int,
    taken: set[tuple[int, int, int]],
) -> list[tuple[int, int, int]]:
    """Draw `count` distinct (target, source, lag) triples from pair rows."""
    n_combo = pairs.shape[0] * lags
    if n_combo < count:
        raise ScenarioError(
            f"only {n_combo} candidate (pair, lag) slots for {count} edges"
        )
    picked: list[tuple[int, int, int]] = []
    # rejection sampling over the flat combo index; duplicates are rare at
    # the densities used here, so this terminates quickly
    guard = 0
    while len(picked) < count:
        guard += 1
        if guard > 1000 * count + 1000:
            raise ScenarioError("edge sampling stalled; constraints too tight")
        flat = int(rng.integers(0, n_combo))
        pair = pairs[flat // lags]
        triple = (int(pair[0]), int(pair[1]), flat % lags + 1)
        if triple in taken:
            continue
        taken.add(triple)
        picked.append(triple)
    return picked


def gen_transition(
    layout: SpatialLayout,
    labels: np.ndarray,
    spec: SparsitySpec,
    lags: int,
    seed,
    noise_variance: float = 1.0,
) -> ScenarioTruth:
    """Draw the sparse transition stack and record the ground truth.

    round(density * k^2) directed (target, source, lag) triples are drawn,
    `within_fraction` of them within clusters (self-loops count as
    within), the rest across clusters at distances no larger than the
    between-cluster quantile radius. All matrices are then jointly
    rescaled (A_l by c^l) so the companion spectral radius equals the
    target exactly.
    """
    if lags < 1:
        raise ValidationError("lags must be >= 1")
    k = layout.k
    labels = np.asarray(labels)
    if labels.shape != (k,):
        raise ValidationError(f"need one label per node, got shape {labels.shape}")
    n_edges = round(spec.density * k * k)
    if n_edges < k:
        raise ValidationError(
            f"density {spec.density} gives {n_edges} edges < k={k}; "
            "increase density for an interesting scenario"
        )
    rng = np.random.default_rng(seed)
    same = labels[:, None] == labels[None, :]
    within_pairs = np.argwhere(same)
    cross_cap = quantile_radius(layout, spec.between_quantile)
    between_ok = (~same) & (layout.distances <= cross_cap)
    between_pairs = np.argwhere(between_ok)
    n_within = round(spec.within_fraction * n_edges)
    n_between = n_edges - n_within
    if n_between > 0 and between_pairs.shape[0] == 0:
        raise ScenarioError(
            "no eligible cross-cluster pairs at the "
            f"{spec.between_quantile:.0%} distance quantile ({cross_cap:g})"
        )
    taken: set[tuple[int, int, int]] = set()
    triples = _draw_triples(rng, within_pairs, lags, n_within, taken)
    triples += _draw_triples(rng, between_pairs, lags, n_between, taken)

    lo, hi = spec.coefficient_range
    mats = [np.zeros((k, k)) for _ in range(lags)]
    for target, source, lag in triples:
        magnitude = rng.uniform(lo, hi)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        mats[lag - 1][target, source] = sign * magnitude
    raw_stack = TransitionStack(tuple(mats))
    raw_radius = companion_spectral_radius(raw_stack)
    if raw_radius <= 0.0:
        raise ScenarioError(
            "drawn structure is nilpotent (spectral radius 0); "
            "cannot rescale to the target radius, try another seed"
        )
    # scaling A_l by c^l multiplies every companion eigenvalue by c, so the
    # closed form lands on the target without a search
    scale = spec.target_spectral_radius / raw_radius
    stack = raw_stack.scaled(scale)
    support = edges_from_betas(np.concatenate(stack.matrices, axis=1), layout)
    coeffs = np.array([abs(e.coefficient) for e in support])
    process = VarProcess(stack, NoiseSpec(np.full(k, float(noise_variance))))
    return ScenarioTruth(
        process=process,
        layout=layout,
        labels=labels.astype(int),
        support=support,
        rho_true=support.max_distance(),
        beta_min=float(coeffs.min()),
        seed=int(seed) if np.isscalar(seed) else -1,
    )


def gen_scenario(
    layout_spec: LayoutSpec,
    sparsity: SparsitySpec,
    lags: int,
    seed: int,
    noise_variance: float = 1.0,
) -> ScenarioTruth:
    """Layout and transition generation under one labelled seed."""
    from .seeding import child_seed

    layout, labels = gen_layout(layout_spec, child_seed(seed, "layout"))
    truth = gen_transition(
        layout, labels, sparsity, lags, child_seed(seed, "transition"),
        noise_variance=noise_variance,
    )
    return ScenarioTruth(
        process=truth.process,
        layout=truth.layout,
        labels=truth.labels,
        support=truth.support,
        rho_true=truth.rho_true,
        beta_min=truth.beta_min,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# truth JSON round trip
# ---------------------------------------------------------------------------


def truth_to_dict(truth: ScenarioTruth) -> dict:
    return {
        "seed": truth.seed,
        "metric": truth.layout.metric,
        "positions": truth.layout.positions.tolist(),
        "labels": truth.labels.tolist(),
        "lags": truth.process.lags,
        "noise_variances": truth.process.noise.variances.tolist(),
        "support": [
            {
                "target": e.target,
                "source": e.source,
                "lag": e.lag,
                "coefficient": e.coefficient,
                "distance": e.distance,
            }
            for e in truth.support
        ],
        "rho_true": truth.rho_true,
        "beta_min": truth.beta_min,
    }


def truth_from_dict(doc: dict) -> ScenarioTruth:
    layout = SpatialLayout(np.array(doc["positions"]), doc["metric"])
    k = layout.k
    lags = int(doc["lags"])
    mats = [np.zeros((k, k)) for _ in range(lags)]
    edges = []
    for rec in doc["support"]:
        t, s, l = int(rec["target"]), int(rec["source"]), int(rec["lag"])
        mats[l - 1][t, s] = float(rec["coefficient"])
        edges.append(
            Edge(
                source=s,
                target=t,
                lag=l,
                coefficient=float(rec["coefficient"]),
                distance=float(rec["distance"]),
            )
        )
    process = VarProcess(
        TransitionStack(tuple(mats)),
        NoiseSpec(np.array(doc["noise_variances"], dtype=float)),
    )
    return ScenarioTruth(
        process=process,
        layout=layout,
        labels=np.array(doc["labels"], dtype=int),
        support=EdgeSet(tuple(edges)),
        rho_true=float(doc["rho_true"]),
        beta_min=float(doc["beta_min"]),
        seed=int(doc["seed"]),
    )


def save_truth(truth: ScenarioTruth, path) -> None:
    with open(path, "w") as fh:
        json.dump(truth_to_dict(truth), fh, indent=1)
        fh.write("\n")


def load_truth(path) -> ScenarioTruth:
    with open(path) as fh:
        return truth_from_dict(json.load(fh))
