"""Two-world augmented chains for PRESENCE and PATTERN events.

The state space is doubled: index ``i`` in ``[0, m)`` means "at cell i and
the event is (so far) false", index ``m + i`` means "at cell i and the
event is true".  Each augmented transition ``M_t`` (timestamp ``t`` to
``t + 1``) is one of three block shapes built from the base matrix ``M``
and a region mask ``s``::

    diag   [[M, 0], [0, M]]
    enter  [[M - M s^D, M s^D], [0, M]]      mass entering s moves to the true world
    stay   [[M, 0], [M - M s^D, M s^D]]      true-world mass leaving s falls back

PRESENCE uses ``enter`` for ``start-1 <= t <= end-1``.  PATTERN uses
``enter`` at ``t = start-1`` and ``stay`` for ``start <= t <= end-1``, the
mask always being the region for the destination timestamp ``t + 1``.
Every other step is ``diag``.  A step ``t = 0`` with an identity base lifts
``[pi, 0]`` into the worlds when the window opens at timestamp 1; for later
windows it is the identity.

Steps are kept in block form so products cost two or four ``m x m``
multiplications instead of a dense ``2m x 2m`` one.  Probabilities of long
observation sequences are carried as (scaled vector, log scale) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import HorizonExceeded, OutOfOrder, TimestampOutOfRange, WindowOutOfRange
from .events import PATTERN, PRESENCE, Event
from .markov import MarkovModel, as_distribution

DIAG, ENTER, STAY = "diag", "enter", "stay"


class Step:
    """One augmented transition matrix in block form."""

    __slots__ = ("kind", "base", "mask", "m")

    def __init__(self, kind: str, base: np.ndarray | None, mask: np.ndarray | None, m: int):
        self.kind = kind
        self.base = base  # None means identity
        self.mask = mask
        self.m = m

    def _lmul(self, x):
        return x if self.base is None else x @ self.base

    def _rmul(self, v):
        return v if self.base is None else self.base @ v

    def left(self, x: np.ndarray) -> np.ndarray:
        """``x @ M_t`` for a row vector or a stack of rows (last axis 2m)."""
        m = self.m
        x1, x2 = x[..., :m], x[..., m:]
        y1 = self._lmul(x1)
        y2 = self._lmul(x2) if x2.any() else np.zeros_like(x2)
        if self.kind == DIAG:
            return np.concatenate([y1, y2], axis=-1)
        s = self.mask
        if self.kind == ENTER:
            return np.concatenate([y1 * (1.0 - s), y1 * s + y2], axis=-1)
        return np.concatenate([y1 + y2 * (1.0 - s), y2 * s], axis=-1)

    def right(self, v: np.ndarray) -> np.ndarray:
        """``M_t @ v`` for a column vector (or columns, first axis 2m)."""
        m = self.m
        v1, v2 = v[:m], v[m:]
        if self.kind == DIAG:
            return np.concatenate([self._rmul(v1), self._rmul(v2)])
        s = self.mask if v.ndim == 1 else self.mask[:, None]
        mixed = self._rmul((1.0 - s) * v1 + s * v2)
        if self.kind == ENTER:
            return np.concatenate([mixed, self._rmul(v2)])
        return np.concatenate([self._rmul(v1), mixed])

    def dense(self) -> np.ndarray:
        m = self.m
        M = np.eye(m) if self.base is None else self.base
        Z = np.zeros((m, m))
        if self.kind == DIAG:
            return np.block([[M, Z], [Z, M]])
        MS = M * self.mask
        if self.kind == ENTER:
            return np.block([[M - MS, MS], [Z, M]])
        return np.block([[M, Z], [M - MS, MS]])


@dataclass(frozen=True, eq=False)
class AugmentedChain:
    event: Event
    model: MarkovModel
    horizon: int

    @property
    def m(self) -> int:
        return self.model.m

    @cached_property
    def _steps(self) -> tuple:
        ev, m = self.event, self.m
        steps = []
        for t in range(self.horizon):
            base = None if t == 0 else self.model.matrix_at(t)
            if ev.kind == PRESENCE and ev.start - 1 <= t <= ev.end - 1:
                steps.append(Step(ENTER, base, ev.regions[0], m))
            elif ev.kind == PATTERN and t == ev.start - 1:
                steps.append(Step(ENTER, base, ev.mask_at(t + 1), m))
            elif ev.kind == PATTERN and ev.start <= t <= ev.end - 1:
                steps.append(Step(STAY, base, ev.mask_at(t + 1), m))
            else:
                steps.append(Step(DIAG, base, None, m))
        return tuple(steps)

    def step(self, t: int) -> Step:
        if not 0 <= t < self.horizon:
            raise TimestampOutOfRange(f"step {t} outside [0, {self.horizon})")
        return self._steps[t]

    def matrix(self, t: int) -> np.ndarray:
        """Dense ``2m x 2m`` matrix of step ``t`` (``t = 0`` is the initial lift)."""
        return self.step(t).dense()

    @cached_property
    def suffixes(self) -> tuple:
        """``suffixes[t] = prod_{i=t}^{end-1} M_i [0,1]^T`` for ``0 <= t <= end``."""
        end, m = self.event.end, self.m
        v = np.concatenate([np.zeros(m), np.ones(m)])
        out = [v]
        for t in range(end - 1, -1, -1):
            v = self._steps[t].right(v)
            out.append(v)
        return tuple(reversed(out))

    @property
    def a(self) -> np.ndarray:
        """``prod_{i=0}^{end-1} M_i [0,1]^T``; its first m entries give Pr(Event | u^1 = s_i)."""
        return self.suffixes[0]


def build_chain(event: Event, model: MarkovModel, T: int) -> AugmentedChain:
    if event.m != model.m:
        raise ValueError(f"event masks have length {event.m}, model has {model.m} states")
    if event.end > T:
        raise WindowOutOfRange(f"event window ends at {event.end}, horizon is {T}")
    if not model.homogeneous and model.transitions.shape[0] < T - 1:
        raise WindowOutOfRange(f"time-varying model covers {model.transitions.shape[0]} steps, "
                               f"horizon {T} needs {T - 1}")
    return AugmentedChain(event, model, T)


def _lift(pi: np.ndarray) -> np.ndarray:
    return np.concatenate([pi, np.zeros_like(pi)])


def _dup(col) -> np.ndarray:
    col = np.asarray(col, dtype=float)
    return np.concatenate([col, col])


def prior(chain: AugmentedChain, pi) -> float:
    """Pr(Event) as ``[pi, 0] M_0 M_1 ... M_{end-1} [0, 1]^T``, row vector first."""
    x = _lift(as_distribution(pi, chain.m))
    for t in range(chain.event.end):
        x = chain.step(t).left(x)
    return float(x[chain.m:].sum())


def prior_complement(chain: AugmentedChain, pi) -> float:
    x = _lift(as_distribution(pi, chain.m))
    for t in range(chain.event.end):
        x = chain.step(t).left(x)
    return float(x[:chain.m].sum())


def _check_emissions(chain: AugmentedChain, emissions) -> list[np.ndarray]:
    cols = [np.asarray(e, dtype=float) for e in emissions]
    for col in cols:
        if col.shape != (chain.m,):
            raise ValueError(f"emission column must have length {chain.m}, got {col.shape}")
    if len(cols) > chain.horizon:
        raise HorizonExceeded(f"{len(cols)} observations exceed horizon {chain.horizon}")
    return cols


def _forward(chain: AugmentedChain, pi, cols, upto: int) -> tuple[np.ndarray, float]:
    """Scaled ``[pi,0] P_1 M_1 P_2 ... M_{upto-1} P_upto`` and its log scale."""
    x = chain.step(0).left(_lift(as_distribution(pi, chain.m)))
    log_scale = 0.0
    for t in range(1, upto + 1):
        if t > 1:
            x = chain.step(t - 1).left(x)
        x = x * _dup(cols[t - 1])
        total = x.sum()
        if total == 0.0:
            return x, -math.inf
        x = x / total
        log_scale += math.log(total)
    return x, log_scale


def _backward(chain: AugmentedChain, cols, n: int) -> tuple[np.ndarray, float]:
    """Scaled backward column ``beta_end`` for observations ``end+1..n``."""
    v = np.ones(2 * chain.m)
    log_scale = 0.0
    for i in range(n - 1, chain.event.end - 1, -1):
        v = chain.step(i).right(_dup(cols[i]) * v)
        top = v.max()
        if top == 0.0:
            return v, -math.inf
        v = v / top
        log_scale += math.log(top)
    return v, log_scale


def joint_terms(chain: AugmentedChain, pi, emissions) -> tuple[float, float, float]:
    """Scaled ``(Pr(Event, o), Pr(not Event, o), log_scale)`` for any prefix length.

    The true probabilities are the first two entries times ``exp(log_scale)``.
    """
    cols = _check_emissions(chain, emissions)
    n, end, m = len(cols), chain.event.end, chain.m
    if n <= end:
        x, ls = _forward(chain, pi, cols, n)
        suffix = chain.suffixes[n]
        return float(x @ suffix), float(x @ (1.0 - suffix)), ls
    x, ls_f = _forward(chain, pi, cols, end)
    v, ls_b = _backward(chain, cols, n)
    return float(x[m:] @ v[m:]), float(x[:m] @ v[:m]), ls_f + ls_b


def joint_before(chain: AugmentedChain, pi, emissions) -> float:
    """Pr(Event, o_1..o_t) for ``t <= end``."""
    if len(emissions) > chain.event.end:
        raise HorizonExceeded(f"t={len(emissions)} is past end={chain.event.end}; use joint_after")
    je, _, ls = joint_terms(chain, pi, emissions)
    return je * math.exp(ls) if je > 0 else 0.0


def joint_after(chain: AugmentedChain, pi, emissions) -> float:
    """Pr(Event, o_1..o_t) for ``t > end``, forward to ``end`` and backward from ``t``."""
    if len(emissions) <= chain.event.end:
        raise ValueError(f"t={len(emissions)} is not past end={chain.event.end}; use joint_before")
    je, _, ls = joint_terms(chain, pi, emissions)
    return je * math.exp(ls) if je > 0 else 0.0


def joint(chain: AugmentedChain, pi, emissions) -> float:
    je, _, ls = joint_terms(chain, pi, emissions)
    return je * math.exp(ls) if je > 0 else 0.0


def log_joint(chain: AugmentedChain, pi, emissions) -> float:
    je, _, ls = joint_terms(chain, pi, emissions)
    return math.log(je) + ls if je > 0 else -math.inf


# Incremental check vectors -------------------------------------------------

@dataclass(frozen=True)
class CheckVectors:
    """Running state for the release-time privacy check of one event.

    Only ``[1^D, 0^D]`` projections ever meet ``pi``, so ``A`` keeps the
    first ``m`` rows of the full accumulator and ``b``, ``c`` are stored
    projected (length ``m``).  After the event every step is block
    diagonal with identical blocks, so ``B`` keeps one ``m x m`` block.
    ``A``, ``B``, ``b`` and ``c`` are rescaled to avoid underflow; the
    true ``b`` and ``c`` are the stored ones times ``exp(log_scale)``.
    """

    a: np.ndarray
    A: np.ndarray
    B: np.ndarray | None = None
    b: np.ndarray | None = None
    c: np.ndarray | None = None
    t: int = 0
    log_scale: float = 0.0
    log_scale_A: float = 0.0
    log_scale_B: float = 0.0

    @property
    def a_top(self) -> np.ndarray:
        return self.a[: self.A.shape[0]]


def init_check_vectors(chain: AugmentedChain) -> CheckVectors:
    m = chain.m
    return CheckVectors(a=chain.a, A=np.hstack([np.eye(m), np.zeros((m, m))]))


def peek(cv: CheckVectors, chain: AugmentedChain, column) -> tuple[np.ndarray, np.ndarray, float]:
    """``(b, c, log_scale)`` if ``column`` were the emission column at ``cv.t + 1``.

    Costs O(m^2); nothing is committed.
    """
    t = cv.t + 1
    if t > chain.horizon:
        raise HorizonExceeded(f"timestamp {t} exceeds horizon {chain.horizon}")
    p = np.asarray(column, dtype=float)
    if p.shape != (chain.m,):
        raise ValueError(f"emission column must have length {chain.m}")
    m, end = chain.m, chain.event.end
    if t <= end:
        step = chain.step(t - 1)
        p2 = _dup(p)
        b = cv.A @ step.right(p2 * chain.suffixes[t])
        c = cv.A @ step.right(p2)
        return b, c, cv.log_scale_A
    B = np.eye(m) if cv.B is None else cv.B
    beta = (chain.model.matrix_at(t - 1) @ p) @ B
    b = cv.A[:, m:] @ beta
    c = cv.A[:, :m] @ beta + b
    return b, c, cv.log_scale_A + cv.log_scale_B


def advance(cv: CheckVectors, chain: AugmentedChain, column, t: int | None = None) -> CheckVectors:
    """Commit ``column`` as the real observation at ``cv.t + 1``."""
    if t is not None and t != cv.t + 1:
        raise OutOfOrder(f"expected timestamp {cv.t + 1}, got {t}")
    b, c, ls = peek(cv, chain, column)
    t = cv.t + 1
    p = np.asarray(column, dtype=float)
    if t <= chain.event.end:
        A = chain.step(t - 1).left(cv.A) * _dup(p)
        A, shift = _rescale(A)
        return replace(cv, A=A, b=b, c=c, t=t, log_scale=ls, log_scale_A=cv.log_scale_A + shift)
    B = np.eye(chain.m) if cv.B is None else cv.B
    B = (p[:, None] * chain.model.matrix_at(t - 1).T) @ B
    B, shift = _rescale(B)
    return replace(cv, B=B, b=b, c=c, t=t, log_scale=ls, log_scale_B=cv.log_scale_B + shift)


def _rescale(X: np.ndarray) -> tuple[np.ndarray, float]:
    top = np.abs(X).max()
    if top == 0.0 or not np.isfinite(top):
        return X, 0.0
    return X / top, math.log(top)
