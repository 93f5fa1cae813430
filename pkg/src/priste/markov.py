"""First-order Markov mobility models over grid cells."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyCorpus, TimestampOutOfRange

ROW_TOL = 1e-9


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_distribution(p, m: int | None = None, tol: float = ROW_TOL) -> np.ndarray:
    """Validate and return ``p`` as a float probability vector."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (m is not None and p.shape[0] != m):
        raise ValueError(f"expected a length-{m} vector, got shape {p.shape}")
    if (p < 0).any() or abs(p.sum() - 1.0) > tol:
        raise ValueError("distribution must be nonnegative and sum to 1")
    return p


def uniform(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


@dataclass(frozen=True)
class MarkovModel:
    """Row-stochastic transitions, homogeneous or one matrix per step.

    ``transitions`` has shape ``(K, m, m)``.  With ``K == 1`` the single
    matrix is used at every step; otherwise step ``t`` (the move from
    timestamp ``t`` to ``t + 1``) uses ``transitions[t - 1]``.
    """

    transitions: np.ndarray
    smoothing: float = 0.0
    m: int = field(init=False)

    def __post_init__(self):
        tr = np.asarray(self.transitions, dtype=float)
        if tr.ndim == 2:
            tr = tr[None]
        if tr.ndim != 3 or tr.shape[1] != tr.shape[2] or tr.shape[0] < 1:
            raise ValueError(f"transitions must be (K, m, m), got {tr.shape}")
        if (tr < 0).any() or (tr > 1 + ROW_TOL).any():
            raise ValueError("transition entries must lie in [0, 1]")
        if np.abs(tr.sum(axis=2) - 1.0).max() > ROW_TOL:
            raise ValueError("every transition row must sum to 1")
        tr.setflags(write=False)
        object.__setattr__(self, "transitions", tr)
        object.__setattr__(self, "m", tr.shape[1])

    @property
    def homogeneous(self) -> bool:
        return self.transitions.shape[0] == 1

    def matrix_at(self, t: int) -> np.ndarray:
        if self.homogeneous:
            return self.transitions[0]
        if not 1 <= t <= self.transitions.shape[0]:
            raise TimestampOutOfRange(
                f"no transition matrix for step {t}; model covers steps 1..{self.transitions.shape[0]}")
        return self.transitions[t - 1]


def train(trajectories: Sequence[Sequence[int]], m: int, smoothing: float = 0.0) -> MarkovModel:
    """Maximum-likelihood transition matrix with additive smoothing.

    Rows that saw no transitions and get no smoothing fall back to uniform.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    if not trajectories and smoothing == 0:
        raise EmptyCorpus("no trajectories to train on and no smoothing")
    counts = np.zeros((m, m))
    for traj in trajectories:
        cells = np.asarray(traj, dtype=int)
        if cells.size and (cells.min() < 0 or cells.max() >= m):
            raise ValueError(f"trajectory references a cell outside [0, {m})")
        np.add.at(counts, (cells[:-1], cells[1:]), 1.0)
    counts += smoothing
    totals = counts.sum(axis=1, keepdims=True)
    empty = totals[:, 0] == 0
    counts[empty] = 1.0
    totals[empty] = m
    return MarkovModel(counts / totals, smoothing=smoothing)


def synth_gaussian(rows: int, cols: int, sigma: float, seed=None) -> MarkovModel:
    """Transition probabilities proportional to a 2-D Gaussian of cell distance.

    ``sigma`` is in cell units.  The construction is deterministic; ``seed``
    is accepted for interface symmetry with the other generators.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    r, c = np.divmod(np.arange(rows * cols), cols)
    d2 = (r[:, None] - r[None, :]) ** 2 + (c[:, None] - c[None, :]) ** 2
    # subtract the row max before exp; the diagonal is always the max
    logits = -d2 / (2.0 * sigma * sigma)
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    return MarkovModel(w / w.sum(axis=1, keepdims=True))


def sample_trajectory(model: MarkovModel, pi, T: int, seed=None) -> np.ndarray:
    if T < 1:
        raise ValueError("T must be at least 1")
    rng = _rng(seed)
    pi = as_distribution(pi, model.m)
    out = np.empty(T, dtype=int)
    u = rng.random(T)
    out[0] = min(np.searchsorted(np.cumsum(pi), u[0], side="right"), model.m - 1)
    cum = None if not model.homogeneous else np.cumsum(model.transitions[0], axis=1)
    for t in range(1, T):
        row = cum[out[t - 1]] if cum is not None else np.cumsum(model.matrix_at(t)[out[t - 1]])
        out[t] = min(np.searchsorted(row, u[t], side="right"), model.m - 1)
    return out


def propagate(pi, model: MarkovModel, steps: int, start: int = 1) -> np.ndarray:
    """Distribution after ``steps`` transitions starting at timestamp ``start``."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    p = as_distribution(pi, model.m).copy()
    for k in range(steps):
        p = p @ model.matrix_at(start + k)
    return p


def save_model(path, model: MarkovModel, pi=None, grid: dict | None = None) -> None:
    """JSON with ``m``, ``transitions``, ``pi``, ``smoothing`` and an optional ``grid`` block."""
    pi = uniform(model.m) if pi is None else as_distribution(pi, model.m)
    payload = {
        "m": model.m,
        "transitions": model.transitions.tolist(),
        "pi": pi.tolist(),
        "smoothing": model.smoothing,
    }
    if grid is not None:
        payload["grid"] = grid
    Path(path).write_text(json.dumps(payload))


def load_model(path) -> tuple[MarkovModel, np.ndarray]:
    try:
        payload = json.loads(Path(path).read_text())
        model = MarkovModel(np.asarray(payload["transitions"], dtype=float),
                            smoothing=float(payload.get("smoothing", 0.0)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: invalid model file ({exc})") from exc
    if int(payload["m"]) != model.m:
        raise ConfigError(f"{path}: m={payload['m']} does not match transitions")
    pi = payload.get("pi")
    pi = uniform(model.m) if pi is None else as_distribution(pi, model.m)
    return model, pi


def load_model_grid(path) -> dict | None:
    """The ``grid`` block stored alongside a model, if any."""
    try:
        return json.loads(Path(path).read_text()).get("grid")
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid model file ({exc})") from exc
