"""Exponential-time reference computations.

These enumerate every trajectory and are used only as test oracles and as
the baseline in benchmarks.  Enumeration runs in mixed-radix counter order
(``itertools.product``), one trajectory at a time, multiplying transition
and emission probabilities along it exactly like the naive algorithm.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TooLarge
from .events import Event, compile_event, lower
from .markov import MarkovModel, as_distribution
from . import twoworld

MAX_TRAJECTORIES = 10**7


def _predicate(event):
    if isinstance(event, Event):
        return compile_event(lower(event))
    return compile_event(event)


def _guard(m: int, T: int) -> None:
    if m ** T > MAX_TRAJECTORIES:
        raise TooLarge(f"{m}^{T} trajectories exceed the enumeration guard of {MAX_TRAJECTORIES}")


def enumerate_prior(event, model: MarkovModel, pi, T: int) -> float:
    """Sum of Pr(trajectory) over all length-T trajectories where ``event`` holds."""
    return enumerate_joint(event, model, pi, [np.ones(model.m)] * T, T)


def enumerate_joint(event, model: MarkovModel, pi, emissions: Sequence, T: int) -> float:
    """Pr(event, o_1..o_n) by brute force.

    ``emissions`` holds one likelihood column per observed timestamp; the
    remaining timestamps up to ``T`` are unobserved.
    """
    m = model.m
    _guard(m, T)
    pi = as_distribution(pi, m)
    holds = _predicate(event)
    cols = [list(map(float, e)) for e in emissions]
    cols += [[1.0] * m] * (T - len(cols))
    mats = [None] + [model.matrix_at(t).tolist() for t in range(1, T)]
    pi_l = pi.tolist()
    total = 0.0
    for traj in itertools.product(range(m), repeat=T):
        if not holds(traj):
            continue
        p = pi_l[traj[0]] * cols[0][traj[0]]
        for t in range(1, T):
            p = p * mats[t][traj[t - 1]][traj[t]] * cols[t][traj[t]]
        total += p
    return total


def forward_likelihood(model: MarkovModel, pi, emissions: Sequence) -> float:
    """Pr(o_1..o_n) with the plain (unscaled) HMM forward pass."""
    x = as_distribution(pi, model.m) * np.asarray(emissions[0], dtype=float)
    for t in range(1, len(emissions)):
        x = (x @ model.matrix_at(t)) * np.asarray(emissions[t], dtype=float)
    return float(x.sum())


@dataclass(frozen=True)
class BenchInstance:
    event: Event
    model: MarkovModel
    pi: np.ndarray
    emissions: tuple
    T: int


def fast_joint(inst: BenchInstance) -> float:
    chain = twoworld.build_chain(inst.event, inst.model, inst.T)
    return twoworld.joint(chain, inst.pi, inst.emissions)


def time_call(fn, *args, min_time: float = 0.02, max_reps: int = 10_000) -> float:
    """Median-of-batches wall time of ``fn(*args)`` in nanoseconds."""
    reps = 1
    while True:
        t0 = time.perf_counter_ns()
        for _ in range(reps):
            fn(*args)
        elapsed = time.perf_counter_ns() - t0
        if elapsed >= min_time * 1e9 or reps >= max_reps:
            break
        reps = min(reps * 4, max_reps)
    batches = []
    for _ in range(5):
        t0 = time.perf_counter_ns()
        for _ in range(reps):
            fn(*args)
        batches.append((time.perf_counter_ns() - t0) / reps)
    return float(np.median(batches))


def bench_pair(inst: BenchInstance, rtol: float = 1e-9, min_time: float = 0.02) -> tuple[float, float]:
    """``(fast_ns, naive_ns)`` after asserting both paths agree."""
    naive = enumerate_joint(inst.event, inst.model, inst.pi, inst.emissions, inst.T)
    fast = fast_joint(inst)
    if not np.isclose(fast, naive, rtol=rtol, atol=1e-12):
        raise AssertionError(f"fast path {fast!r} disagrees with enumeration {naive!r}")
    fast_ns = time_call(fast_joint, inst, min_time=min_time)
    naive_ns = time_call(enumerate_joint, inst.event, inst.model, inst.pi, inst.emissions, inst.T,
                         min_time=min_time, max_reps=50)
    return fast_ns, naive_ns
