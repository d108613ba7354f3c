"""Node positions and pairwise distances.

Layouts live in a bounded subset of R^d. Distances are either Euclidean
or haversine over (longitude, latitude) degrees; the haversine unit is
whatever the earth radius constant is expressed in (kilometres by
default). A radius is only ever compared against distances from the same
layout, so the unit is pure configuration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError

METRIC_EUCLIDEAN = "euclidean"
METRIC_HAVERSINE_KM = "haversine-km"
_METRIC_ALIASES = {"euclidean": METRIC_EUCLIDEAN, "haversine": METRIC_HAVERSINE_KM,
                   "haversine-km": METRIC_HAVERSINE_KM}

EARTH_RADIUS_KM = 6371.0088


def haversine_matrix(positions: np.ndarray, radius: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Great-circle distances between (lon, lat) degree pairs."""
    if positions.shape[1] != 2:
        raise ShapeError("haversine positions must be (lon, lat) pairs")
    lon = np.radians(positions[:, 0])[:, None]
    lat = np.radians(positions[:, 1])[:, None]
    dlat = lat - lat.T
    dlon = lon - lon.T
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat) * np.cos(lat.T) * np.sin(dlon / 2.0) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * radius * np.arcsin(np.sqrt(a))


@dataclass(frozen=True)
class SpatialLayout:
    """k node positions with a cached pairwise distance matrix."""

    positions: np.ndarray
    metric: str = METRIC_EUCLIDEAN
    distances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] < 1:
            raise ShapeError(f"positions must be (k, d), got shape {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("all positions must be finite")
        metric = _METRIC_ALIASES.get(self.metric)
        if metric is None:
            raise ValidationError(
                f"unknown metric {self.metric!r}; use 'euclidean' or 'haversine-km'"
            )
        if metric == METRIC_HAVERSINE_KM:
            dist = haversine_matrix(pos)
        else:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, axis=2))
        dist = 0.5 * (dist + dist.T)
        np.fill_diagonal(dist, 0.0)
        pos.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "distances", dist)

    @property
    def k(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def distance(self, i: int, j: int) -> float:
        return float(self.distances[i, j])

    @property
    def rho_max(self) -> float:
        """Largest pairwise distance in the layout."""
        return float(self.distances.max())

    def pairwise_distances(self) -> np.ndarray:
        """The k(k-1)/2 distinct off-diagonal distances."""
        iu = np.triu_indices(self.k, k=1)
        return self.distances[iu]

    def neighbor_counts(self, rho: float) -> np.ndarray:
        """Per node, how many nodes lie within the closed ball of radius rho.

        Counts include the node itself (distance zero).
        """
        return (self.distances <= rho).sum(axis=1)


# ---------------------------------------------------------------------------
# positions CSV: header `id,x,y[,z...]` or `id,lon,lat`
# ---------------------------------------------------------------------------


def write_positions_csv(layout: SpatialLayout, ids, path) -> None:
    ids = [str(s) for s in ids]
    if len(ids) != layout.k:
        raise ShapeError(f"{len(ids)} ids for {layout.k} positions")
    if layout.metric == METRIC_HAVERSINE_KM:
        cols = ["lon", "lat"]
    else:
        cols = ["x", "y", "z"][: layout.dim]
        if layout.dim > 3:
            cols = [f"x{i + 1}" for i in range(layout.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *cols])
        for i in range(layout.k):
            writer.writerow([ids[i], *(repr(float(v)) for v in layout.positions[i])])


def read_positions_csv(path, metric: str | None = None) -> tuple[tuple[str, ...], SpatialLayout]:
    """Load ids and layout; lon/lat headers imply haversine unless overridden."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id" or len(header) < 2:
            raise ValidationError(
                f"{path}: expected header 'id,x,y[,...]' or 'id,lon,lat', got {header}"
            )
        coord_cols = header[1:]
        ids = []
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValidationError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(rec)}"
                )
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    if not rows:
        raise ValidationError(f"{path}: no positions found")
    if metric is None:
        metric = (
            METRIC_HAVERSINE_KM
            if [c.lower() for c in coord_cols] == ["lon", "lat"]
            else METRIC_EUCLIDEAN
        )
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: node ids must be unique")
    return tuple(ids), SpatialLayout(np.array(rows), metric)
