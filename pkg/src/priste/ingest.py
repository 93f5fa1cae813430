"""Trajectory CSV ingestion.

Accepted layouts, header required::

    t,lat,lon          GPS fixes, snapped to the grid
    t,cell             already-discretised cells (0-based)

Several trajectories in one file are separated by blank lines; a
directory is read file by file (``*.csv``, sorted by name).  ``t`` may be
seconds (any number) or an ISO-8601 timestamp.

With ``resample_seconds`` set, each trajectory is re-timed onto steps
``t0, t0 + R, t0 + 2R, ...`` up to its last fix, taking the fix nearest to
each step (earlier fix on ties).  Without it every row is one step.
Rows that fall outside the grid are dropped and counted.
"""

from __future__ import annotations

import csv
import logging
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyAfterFilter, OutOfBounds, ParseError
from .statespace import GridMap

log = logging.getLogger(__name__)


class TrajectorySet(list):
    """List of cell arrays that also remembers how many rows were dropped."""

    def __init__(self, items=(), dropped: int = 0):
        super().__init__(items)
        self.dropped = dropped


def _parse_time(raw: str, row: int) -> float:
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(raw.strip()).timestamp()
    except ValueError:
        raise ParseError(f"unreadable timestamp {raw!r}", row) from None


def resample_nearest(times: np.ndarray, cells: np.ndarray, step: float) -> np.ndarray:
    """Cell of the fix nearest to each step boundary."""
    grid = np.arange(times[0], times[-1] + step * 1e-9, step)
    idx = np.searchsorted(times, grid, side="left")
    idx = np.clip(idx, 1, len(times) - 1) if len(times) > 1 else np.zeros_like(idx)
    if len(times) > 1:
        left, right = times[idx - 1], times[idx]
        idx = np.where(grid - left <= right - grid, idx - 1, idx)
    return cells[idx]


def _blocks(path: Path):
    """Yield ``(header, [(lineno, fields), ...])`` per blank-line separated block."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header, block = None, []
        for fields in reader:
            lineno = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                if block:
                    yield header, block
                    block = []
                continue
            if header is None:
                header = [f.strip().lower() for f in fields]
                if header not in (["t", "lat", "lon"], ["t", "cell"]):
                    raise ParseError(f"header must be 't,lat,lon' or 't,cell', got {','.join(fields)}", lineno)
                continue
            if [f.strip().lower() for f in fields] == header:
                continue
            block.append((lineno, fields))
        if block:
            yield header, block


def _read_file(path: Path, grid: GridMap, resample_seconds):
    out, dropped = [], 0
    for header, block in _blocks(path):
        times, cells = [], []
        for lineno, fields in block:
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno)
            t = _parse_time(fields[0], lineno)
            try:
                if header[1] == "cell":
                    cell = int(fields[1])
                    if not 0 <= cell < grid.m:
                        raise OutOfBounds(cell)
                else:
                    cell = grid.locate(float(fields[1]), float(fields[2]))
            except OutOfBounds:
                dropped += 1
                continue
            except ValueError:
                raise ParseError(f"unreadable value in {fields!r}", lineno) from None
            times.append(t)
            cells.append(cell)
        if not cells:
            continue
        times_a, cells_a = np.asarray(times), np.asarray(cells, dtype=int)
        order = np.argsort(times_a, kind="stable")
        times_a, cells_a = times_a[order], cells_a[order]
        if resample_seconds:
            cells_a = resample_nearest(times_a, cells_a, float(resample_seconds))
        out.append(cells_a)
    return out, dropped


def ingest_trajectories(path, grid: GridMap, resample_seconds: float | None = None) -> TrajectorySet:
    path = Path(path)
    if resample_seconds is not None and not resample_seconds > 0:
        raise ValueError("resample_seconds must be positive")
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
    elif path.exists():
        files = [path]
    else:
        raise DataError(f"{path}: no such file or directory")
    trajs, dropped = [], 0
    for f in files:
        try:
            got, d = _read_file(f, grid, resample_seconds)
        except ParseError as exc:
            err = ParseError(f"{f}: {exc}")
            err.row = exc.row
            raise err from None
        trajs.extend(got)
        dropped += d
    if dropped:
        log.warning("dropped %d row(s) outside the grid", dropped)
    if not trajs:
        raise EmptyAfterFilter(f"{path}: no trajectory rows left after filtering")
    return TrajectorySet(trajs, dropped)


def write_trajectories(path, trajectories) -> None:
    """``t,cell`` CSV, one blank line between trajectories."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "cell"])
        for k, traj in enumerate(trajectories):
            if k:
                fh.write("\n")
            for t, cell in enumerate(traj, start=1):
                w.writerow([t, int(cell)])
