import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from priste.errors import ConfigError, OutOfBounds
from priste.statespace import M_PER_DEG_LAT, GridMap


def unit_grid():
    # 2x2 grid whose cells are ~[0, 0.5) degrees on each axis near the equator
    side = 0.5 * M_PER_DEG_LAT
    return GridMap(2, 2, cell_size_m=side, origin=(0.0, 0.0))


def test_locate_corner_cell():
    assert unit_grid().locate(0.1, 0.1) == 0


def test_locate_center_of_last_cell():
    g = unit_grid()
    lat, lon = g.cell_center(3)
    assert g.locate(lat, lon) == 3


def test_locate_outside_east_edge():
    g = unit_grid()
    _, _, _, lon_max = g.bbox()
    one_m_east = 1.0 / (M_PER_DEG_LAT * math.cos(math.radians(0.5)))
    with pytest.raises(OutOfBounds):
        g.locate(0.1, lon_max + one_m_east)


def test_interior_edge_goes_to_larger_index():
    g = GridMap(3, 3)
    lat0, lon0, _, _ = g.bbox()
    lat_min, lon_min, lat_max, lon_max = g.bounds(4)
    # shared edge between col 0 and col 1 on the middle row
    assert g.locate(0.5 * (lat_min + lat_max), lon_min) == 4
    assert g.locate(lat_min, 0.5 * (lon_min + lon_max)) == 4


def test_outer_north_east_corner_is_clamped():
    g = GridMap(3, 4)
    _, _, lat_max, lon_max = g.bbox()
    assert g.locate(lat_max, lon_max) == g.m - 1


def test_bijection_and_center_inside():
    g = GridMap(4, 5)
    for i in range(g.m):
        r, c = g.rowcol(i)
        assert g.index(r, c) == i
        lat, lon = g.cell_center(i)
        lat_min, lon_min, lat_max, lon_max = g.bounds(i)
        assert lat_min < lat < lat_max and lon_min < lon < lon_max


def test_euclidean_examples():
    g = GridMap(3, 3, cell_size_m=1000)
    assert g.euclidean_km(4, 4) == 0.0
    assert g.euclidean_km(0, 1) == pytest.approx(1.0)
    assert g.euclidean_km(0, 4) == pytest.approx(1.41421, abs=1e-3)


def test_distance_matrix_matches_pairwise():
    g = GridMap(4, 3, cell_size_m=250)
    D = g.distance_matrix_km
    for a in range(g.m):
        for b in range(g.m):
            assert D[a, b] == pytest.approx(g.euclidean_km(a, b), abs=1e-12)


def test_euclidean_symmetric_up_to_20x20():
    g = GridMap(20, 20)
    D = g.distance_matrix_km
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_triangle_inequality(rows, cols, data):
    g = GridMap(rows, cols)
    a, b, c = (data.draw(st.integers(0, g.m - 1)) for _ in range(3))
    assert g.euclidean_km(a, c) <= g.euclidean_km(a, b) + g.euclidean_km(b, c) + 1e-12


def test_locate_total_on_random_points():
    g = GridMap(7, 9, cell_size_m=300, origin=(39.9, 116.3))
    lat_min, lon_min, lat_max, lon_max = g.bbox()
    rng = np.random.default_rng(0)
    for lat, lon in zip(rng.uniform(lat_min, lat_max, 10_000), rng.uniform(lon_min, lon_max, 10_000)):
        i = g.locate(lat, lon)
        b = g.bounds(i)
        assert b[0] <= lat <= b[2] and b[1] <= lon <= b[3]


def test_invalid_grids():
    with pytest.raises(ConfigError):
        GridMap(0, 3)
    with pytest.raises(ConfigError):
        GridMap(2, 2, cell_size_m=0)
    with pytest.raises(OutOfBounds):
        GridMap(2, 2).rowcol(4)


def test_config_round_trip():
    g = GridMap(3, 5, 250.0, (10.0, 20.0))
    assert GridMap.from_config(g.to_config()) == g
    with pytest.raises(ConfigError):
        GridMap.from_config({"rows": 2})
