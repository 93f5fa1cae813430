"""Rectangular grid over a small geographic area.

Cells are indexed row-major starting from the south-west corner, so cell
``i`` sits at ``(row, col) = divmod(i, cols)``.  Geometry uses a local
equirectangular projection anchored at the grid centre, which is accurate
to well under a percent at city scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, OutOfBounds

EARTH_RADIUS_M = 6_371_008.8
M_PER_DEG_LAT = math.pi * EARTH_RADIUS_M / 180.0


@dataclass(frozen=True)
class GridMap:
    rows: int
    cols: int
    cell_size_m: float = 1000.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid must have at least one cell, got {self.rows}x{self.cols}")
        if not self.cell_size_m > 0:
            raise ConfigError("cell_size_m must be positive")

    @property
    def m(self) -> int:
        return self.rows * self.cols

    @cached_property
    def _deg_per_cell(self) -> tuple[float, float]:
        lat0, _ = self.origin
        lat_mid = lat0 + 0.5 * self.rows * self.cell_size_m / M_PER_DEG_LAT
        m_per_deg_lon = M_PER_DEG_LAT * math.cos(math.radians(lat_mid))
        return self.cell_size_m / M_PER_DEG_LAT, self.cell_size_m / m_per_deg_lon

    def rowcol(self, i: int) -> tuple[int, int]:
        self._check(i)
        return divmod(int(i), self.cols)

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise OutOfBounds(f"(row={row}, col={col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def bounds(self, i: int) -> tuple[float, float, float, float]:
        """``(lat_min, lon_min, lat_max, lon_max)`` of cell ``i``."""
        row, col = self.rowcol(i)
        dlat, dlon = self._deg_per_cell
        lat0, lon0 = self.origin
        return (lat0 + row * dlat, lon0 + col * dlon,
                lat0 + (row + 1) * dlat, lon0 + (col + 1) * dlon)

    def cell_center(self, i: int) -> tuple[float, float]:
        lat_min, lon_min, lat_max, lon_max = self.bounds(i)
        return 0.5 * (lat_min + lat_max), 0.5 * (lon_min + lon_max)

    def bbox(self) -> tuple[float, float, float, float]:
        dlat, dlon = self._deg_per_cell
        lat0, lon0 = self.origin
        return lat0, lon0, lat0 + self.rows * dlat, lon0 + self.cols * dlon

    def locate(self, lat: float, lon: float) -> int:
        """Cell containing ``(lat, lon)``.

        A point on an interior edge goes to the cell with the larger index
        along that axis; points on the outer north/east edge go to the last
        row/column.
        """
        lat_min, lon_min, lat_max, lon_max = self.bbox()
        if not (lat_min <= lat <= lat_max and lon_min <= lon <= lon_max):
            raise OutOfBounds(f"({lat}, {lon}) outside grid bounding box")
        dlat, dlon = self._deg_per_cell
        row = min(int(math.floor((lat - lat_min) / dlat)), self.rows - 1)
        col = min(int(math.floor((lon - lon_min) / dlon)), self.cols - 1)
        return row * self.cols + col

    @cached_property
    def centers_km(self) -> np.ndarray:
        """``(m, 2)`` planar cell centres in km, x east and y north."""
        rows, cols = np.divmod(np.arange(self.m), self.cols)
        side = self.cell_size_m / 1000.0
        return np.column_stack([(cols + 0.5) * side, (rows + 0.5) * side])

    @cached_property
    def distance_matrix_km(self) -> np.ndarray:
        c = self.centers_km
        diff = c[:, None, :] - c[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))

    def euclidean_km(self, a: int, b: int) -> float:
        self._check(a)
        self._check(b)
        (ra, ca), (rb, cb) = divmod(int(a), self.cols), divmod(int(b), self.cols)
        return math.hypot(ra - rb, ca - cb) * self.cell_size_m / 1000.0

    def _check(self, i):
        if not 0 <= int(i) < self.m:
            raise OutOfBounds(f"cell index {i} outside [0, {self.m})")

    def to_config(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "cell_size_m": self.cell_size_m,
                "origin_lat": self.origin[0], "origin_lon": self.origin[1]}

    @classmethod
    def from_config(cls, block: dict) -> "GridMap":
        try:
            return cls(
                rows=int(block["rows"]),
                cols=int(block["cols"]),
                cell_size_m=float(block.get("cell_size_m", 1000.0)),
                origin=(float(block.get("origin_lat", 0.0)), float(block.get("origin_lon", 0.0))),
            )
        except KeyError as exc:
            raise ConfigError(f"grid block missing {exc.args[0]!r}") from None
