"""Spatiotemporal events.

Two representations live here.  :class:`Event` covers PRESENCE and
PATTERN, the shapes with a linear-time two-world evaluation.  The small
Boolean AST (:class:`Pred`, :class:`And`, :class:`Or`, :class:`Not`) can
express any event over ``(timestamp, cell)`` predicates and is only
evaluated by brute force.

Timestamps are 1-based throughout: ``trajectory[t - 1]`` is the location
at timestamp ``t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigError, TimestampOutOfRange, WindowOutOfRange

PRESENCE = "presence"
PATTERN = "pattern"


def region_mask(m: int, cells: Sequence[int] = ()) -> np.ndarray:
    """0/1 mask of length ``m`` with the given cells set."""
    idx = [int(c) for c in cells]
    if any(not 0 <= c < m for c in idx):
        raise ValueError(f"cell index outside [0, {m}) in {idx}")
    mask = np.zeros(m, dtype=float)
    mask[idx] = 1.0
    return mask


def _as_mask(bits) -> np.ndarray:
    mask = np.asarray(bits, dtype=float)
    if mask.ndim != 1 or not np.isin(mask, (0.0, 1.0)).all():
        raise ValueError("region mask must be a 1-D 0/1 vector")
    mask.setflags(write=False)
    return mask


@dataclass(frozen=True)
class Event:
    kind: str
    regions: tuple
    start: int
    end: int

    def __post_init__(self):
        if self.kind not in (PRESENCE, PATTERN):
            raise ValueError(f"unknown event kind {self.kind!r}")
        regions = tuple(_as_mask(r) for r in self.regions)
        object.__setattr__(self, "regions", regions)
        if not 1 <= self.start <= self.end:
            raise WindowOutOfRange(f"need 1 <= start <= end, got [{self.start}, {self.end}]")
        if len({r.shape[0] for r in regions}) != 1:
            raise ValueError("all region masks must have the same length")
        if self.kind == PRESENCE and len(regions) != 1:
            raise ValueError("PRESENCE carries exactly one region mask")
        if self.kind == PATTERN and len(regions) != self.length:
            raise ValueError(f"PATTERN over [{self.start}, {self.end}] needs {self.length} masks, "
                             f"got {len(regions)}")

    @property
    def m(self) -> int:
        return self.regions[0].shape[0]

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def mask_at(self, t: int) -> np.ndarray:
        """Region the user must be in at timestamp ``t`` (inside the window)."""
        if not self.start <= t <= self.end:
            raise TimestampOutOfRange(f"timestamp {t} outside window [{self.start}, {self.end}]")
        return self.regions[0] if self.kind == PRESENCE else self.regions[t - self.start]

    def occurs(self, trajectory: Sequence[int]) -> bool:
        """Direct set-membership semantics, no AST involved."""
        if len(trajectory) < self.end:
            raise TimestampOutOfRange(f"trajectory of length {len(trajectory)} ends before {self.end}")
        hits = (self.mask_at(t)[trajectory[t - 1]] == 1.0 for t in range(self.start, self.end + 1))
        return any(hits) if self.kind == PRESENCE else all(hits)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "regions": [r.astype(int).tolist() for r in self.regions],
                "start": self.start, "end": self.end}


def presence(m: int, cells: Sequence[int], start: int, end: int) -> Event:
    return Event(PRESENCE, (region_mask(m, cells),), start, end)


def pattern(m: int, cells_per_step: Sequence[Sequence[int]], start: int) -> Event:
    masks = tuple(region_mask(m, cells) for cells in cells_per_step)
    return Event(PATTERN, masks, start, start + len(masks) - 1)


def event_from_dict(d: dict, m: int | None = None) -> Event:
    """Parse the JSON/TOML event object.

    ``regions`` holds 0/1 masks; ``cells`` (a list of cell indices, or a
    list of such lists for PATTERN) is accepted as a shorthand when ``m``
    is known.
    """
    try:
        kind = str(d["kind"]).lower()
        start = int(d["start"])
        if "regions" in d:
            regions = d["regions"]
        elif "cells" in d:
            if m is None:
                raise ConfigError("event 'cells' shorthand needs the state count m")
            cells = d["cells"]
            if kind == PATTERN:
                regions = [region_mask(m, c) for c in cells]
            else:
                regions = [region_mask(m, cells)]
        else:
            raise ConfigError("event needs 'regions' or 'cells'")
        # a pattern's window is fixed by its length, so 'end' is optional there
        end = int(d["end"]) if kind != PATTERN or "end" in d else start + len(regions) - 1
        ev = Event(kind, tuple(regions), start, end)
    except KeyError as exc:
        raise ConfigError(f"event missing field {exc.args[0]!r}") from None
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid event {d!r}: {exc}") from exc
    if m is not None and ev.m != m:
        raise ConfigError(f"event masks have length {ev.m}, state space has {m}")
    return ev


def load_events(path, m: int | None = None) -> list[Event]:
    payload = json.loads(Path(path).read_text())
    if isinstance(payload, dict):
        payload = [payload]
    return [event_from_dict(d, m) for d in payload]


# Boolean expressions over (timestamp, cell) predicates ---------------------

@dataclass(frozen=True)
class Pred:
    """``u^t = s_cell``."""
    t: int
    cell: int


@dataclass(frozen=True)
class And:
    terms: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class Or:
    terms: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class Not:
    term: "BoolEvent"


BoolEvent = Union[Pred, And, Or, Not]


def lower(event: Event) -> BoolEvent:
    """Rewrite a PRESENCE/PATTERN event as an explicit Boolean expression."""
    per_step = []
    for t in range(event.start, event.end + 1):
        cells = np.flatnonzero(event.mask_at(t))
        per_step.append(tuple(Pred(t, int(i)) for i in cells))
    if event.kind == PRESENCE:
        return Or(tuple(p for step in per_step for p in step))
    return And(tuple(Or(step) for step in per_step))


def referenced_timestamps(expr: BoolEvent) -> set[int]:
    if isinstance(expr, Pred):
        return {expr.t}
    if isinstance(expr, Not):
        return referenced_timestamps(expr.term)
    out: set[int] = set()
    for term in expr.terms:
        out |= referenced_timestamps(term)
    return out


def compile_event(expr: BoolEvent) -> Callable[[Sequence[int]], bool]:
    """Turn an expression into a fast predicate on trajectories.

    The returned function does no bounds checking; :func:`evaluate` is the
    checked entry point.
    """
    if isinstance(expr, Pred):
        t, cell = expr.t - 1, expr.cell
        return lambda traj: traj[t] == cell
    if isinstance(expr, Not):
        inner = compile_event(expr.term)
        return lambda traj: not inner(traj)
    parts = [compile_event(term) for term in expr.terms]
    if isinstance(expr, And):
        return lambda traj: all(p(traj) for p in parts)
    if isinstance(expr, Or):
        return lambda traj: any(p(traj) for p in parts)
    raise TypeError(f"not a Boolean event: {expr!r}")


def evaluate(expr: BoolEvent, trajectory: Sequence[int]) -> bool:
    ts = referenced_timestamps(expr)
    if ts and (min(ts) < 1 or max(ts) > len(trajectory)):
        raise TimestampOutOfRange(
            f"expression references timestamps {min(ts)}..{max(ts)}, trajectory has {len(trajectory)}")
    return compile_event(expr)(trajectory)
