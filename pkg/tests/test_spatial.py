import numpy as np
import pytest

from spacevar import SpatialLayout, ValidationError, read_positions_csv, write_positions_csv
from spacevar.spatial import EARTH_RADIUS_KM, haversine_matrix


class TestLayout:
    def test_distance_matrix_properties(self):
        rng = np.random.default_rng(0)
        layout = SpatialLayout(rng.uniform(0, 1, (12, 2)))
        D = layout.distances
        assert np.array_equal(D, D.T)
        assert np.all(np.diag(D) == 0.0)
        assert np.all(D >= 0.0)

    def test_one_dimensional_positions(self):
        layout = SpatialLayout(np.array([0.0, 1.0, 5.0]))
        assert layout.distance(0, 2) == pytest.approx(5.0)
        assert layout.rho_max == pytest.approx(5.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValidationError):
            SpatialLayout(np.array([[0.0, np.inf]]))

    def test_neighbor_counts_include_self(self):
        layout = SpatialLayout(np.array([0.0, 1.0, 5.0]))
        assert np.array_equal(layout.neighbor_counts(1.0), [2, 2, 1])
        assert np.array_equal(layout.neighbor_counts(0.0), [1, 1, 1])

    def test_pairwise_count(self):
        layout = SpatialLayout(np.zeros((5, 2)))
        assert layout.pairwise_distances().size == 10


class TestHaversine:
    def test_quarter_meridian(self):
        # pole to equator along a meridian is a quarter circumference
        pos = np.array([[0.0, 0.0], [0.0, 90.0]])
        d = haversine_matrix(pos)[0, 1]
        assert d == pytest.approx(np.pi * EARTH_RADIUS_KM / 2, rel=1e-9)

    def test_layout_metric(self):
        layout = SpatialLayout(
            np.array([[0.0, 0.0], [1.0, 0.0]]), metric="haversine-km"
        )
        # one degree of longitude at the equator
        assert layout.distance(0, 1) == pytest.approx(
            2 * np.pi * EARTH_RADIUS_KM / 360, rel=1e-9
        )


class TestPositionsCsv:
    def test_round_trip_euclidean(self, tmp_path):
        rng = np.random.default_rng(1)
        layout = SpatialLayout(rng.uniform(0, 2, (6, 2)))
        ids = [f"n{i}" for i in range(6)]
        path = tmp_path / "pos.csv"
        write_positions_csv(layout, ids, path)
        back_ids, back = read_positions_csv(path)
        assert back_ids == tuple(ids)
        assert np.array_equal(back.positions, layout.positions)
        assert back.metric == "euclidean"

    def test_lonlat_header_implies_haversine(self, tmp_path):
        path = tmp_path / "pos.csv"
        path.write_text("id,lon,lat\na,-95.0,29.0\nb,-90.0,30.0\n")
        _, layout = read_positions_csv(path)
        assert layout.metric == "haversine-km"

    def test_metric_override(self, tmp_path):
        path = tmp_path / "pos.csv"
        path.write_text("id,lon,lat\na,-95.0,29.0\nb,-90.0,30.0\n")
        _, layout = read_positions_csv(path, metric="euclidean")
        assert layout.metric == "euclidean"

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "pos.csv"
        path.write_text("id,x,y\na,0,0\na,1,1\n")
        with pytest.raises(ValidationError):
            read_positions_csv(path)
