"""Online enforcement: calibrate the mechanism until every event check certifies.

At each timestamp the session draws a candidate observation at the current
budget, peeks the check vectors of every protected event, and certifies
both likelihood-ratio conditions.  Only when all of them certify in the
same attempt is the observation released and the accumulators committed.
Otherwise the budget is multiplied by ``decay`` and a fresh candidate is
drawn.  The budget starts again from ``initial_alpha`` at every timestamp.

Candidate draws use a generator seeded by ``(seed, t, attempt)``, so two
sessions with the same seed see the same random numbers wherever their
histories agree.  That keeps "same seeds" comparisons low-noise.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import checker, lppm, twoworld
from .errors import DegenerateEvent, HorizonExceeded
from .events import Event
from .markov import MarkovModel, as_distribution, uniform
from .statespace import GridMap


@dataclass(frozen=True)
class EnforceParams:
    epsilon: float
    decay: float = 0.5
    check_budget_ms: float | None = None
    max_halvings: int = 40
    simplex: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")
        if self.check_budget_ms is not None and not self.check_budget_ms > 0:
            raise ValueError("check_budget_ms must be positive")


@dataclass(frozen=True)
class ReleaseRecord:
    t: int
    true_cell: int
    observed_cell: int
    alpha_used: float
    halvings: int
    distance_km: float
    unknowns: int = 0
    timed_out: int = 0
    forced: bool = False
    check_ms: float = 0.0


@dataclass
class _Tracked:
    event: Event
    chain: twoworld.AugmentedChain
    cv: twoworld.CheckVectors


class ReleaseSession:
    """One user's online release protocol. Strictly sequential."""

    def __init__(self, grid: GridMap, model: MarkovModel, events: Sequence[Event], T: int,
                 mechanism: lppm.LppmSpec, params: EnforceParams, pi=None, seed: int = 0):
        if model.m != grid.m:
            raise ValueError(f"model has {model.m} states, grid has {grid.m} cells")
        self.grid, self.model, self.T = grid, model, T
        self.mechanism, self.params, self.seed = mechanism, params, seed
        self.pi = uniform(grid.m) if pi is None else as_distribution(pi, grid.m)
        self.tracked = []
        for ev in events:
            chain = twoworld.build_chain(ev, model, T)
            cv = twoworld.init_check_vectors(chain)
            if not cv.a_top.max() > 0:
                raise DegenerateEvent(f"event {ev.to_dict()} is impossible under every initial distribution")
            self.tracked.append(_Tracked(ev, chain, cv))
        self.t = 0
        self.p_plus = None
        self.records: list[ReleaseRecord] = []
        self.audit: list[dict] = []

    @property
    def alpha0(self) -> float:
        return self.mechanism.alpha

    def _prior_minus(self, t):
        if t == 1:
            return self.pi
        return self.p_plus @ self.model.matrix_at(t - 1)

    def _check(self, columns_b_c):
        """Certify every event; stop at the first failure. Returns (ok, statuses, unknown, timed_out)."""
        statuses, unknown, timed_out = [], 0, 0
        budget = self.params.check_budget_ms
        for tr, (b, c) in zip(self.tracked, columns_b_c):
            conds = checker.conditions_from_vectors(tr.cv.a_top, b, c, self.params.epsilon, self.params.simplex)
            verdicts = checker.certify_pair(conds, budget)
            statuses.append([v.status for v in verdicts])
            for v in verdicts:
                if v.status == checker.UNKNOWN:
                    unknown += 1
                    timed_out += int(v.timed_out)
            if not all(v.certified for v in verdicts):
                return False, statuses, unknown, timed_out
        return True, statuses, unknown, timed_out

    def step(self, true_cell: int) -> ReleaseRecord:
        t = self.t + 1
        if t > self.T:
            raise HorizonExceeded(f"session horizon is {self.T}")
        true_cell = int(true_cell)
        delta_mode = self.mechanism.mechanism == lppm.PLM_DELTASET
        p_minus = self._prior_minus(t) if delta_mode else None
        p = self.params
        t0 = time.perf_counter()
        unknowns = timed_out = 0
        halvings = 0
        while True:
            alpha = self.alpha0 * p.decay ** halvings
            forced = halvings >= p.max_halvings
            if forced:
                matrix = lppm.uniform_matrix(self.grid.m)
            else:
                matrix = lppm.emission_matrix(self.grid, self.mechanism, alpha, p_minus)
            rng = np.random.default_rng([self.seed, t, halvings])
            obs = lppm.sample_output(matrix, true_cell, rng)
            col = matrix[:, obs]
            peeks = [twoworld.peek(tr.cv, tr.chain, col)[:2] for tr in self.tracked]
            if forced:
                # a constant column carries no information, so the ratio is exactly 1
                ok, statuses, u, to = True, [], 0, 0
            else:
                ok, statuses, u, to = self._check(peeks)
            unknowns += u
            timed_out += to
            self.audit.append({"t": t, "attempt": halvings, "alpha": alpha, "obs": obs,
                               "statuses": statuses, "released": ok, "forced": forced})
            if ok:
                break
            halvings += 1
        for tr in self.tracked:
            tr.cv = twoworld.advance(tr.cv, tr.chain, col, t)
        if delta_mode:
            self.p_plus = lppm.posterior(p_minus, col)
        self.t = t
        rec = ReleaseRecord(t, true_cell, obs, alpha, halvings,
                            self.grid.euclidean_km(true_cell, obs), unknowns, timed_out, forced,
                            (time.perf_counter() - t0) * 1e3)
        self.records.append(rec)
        return rec

    # Algorithm-specific names kept as thin aliases
    def step_geoind(self, true_cell: int) -> ReleaseRecord:
        return self.step(true_cell)

    def step_deltaset(self, true_cell: int) -> ReleaseRecord:
        if self.mechanism.mechanism != lppm.PLM_DELTASET:
            raise ValueError("session was not configured with plm_deltaset")
        return self.step(true_cell)

    def released_columns(self) -> list[np.ndarray]:
        """Emission columns of released observations, rebuilt from the audit log."""
        out = []
        p_minus = self.pi
        prev = None
        for rec in self.records:
            if rec.t > 1 and prev is not None:
                p_minus = prev @ self.model.matrix_at(rec.t - 1)
            if rec.forced:
                matrix = lppm.uniform_matrix(self.grid.m)
            else:
                matrix = lppm.emission_matrix(self.grid, self.mechanism, rec.alpha_used, p_minus)
            col = matrix[:, rec.observed_cell]
            out.append(col)
            prev = lppm.posterior(p_minus, col) if self.mechanism.mechanism == lppm.PLM_DELTASET else None
        return out


def step_geoind(session: ReleaseSession, true_cell: int) -> ReleaseRecord:
    return session.step_geoind(true_cell)


def step_deltaset(session: ReleaseSession, true_cell: int) -> ReleaseRecord:
    return session.step_deltaset(true_cell)


def run_session(session: ReleaseSession, trajectory: Sequence[int]) -> list[ReleaseRecord]:
    if len(trajectory) > session.T - session.t:
        raise HorizonExceeded(f"trajectory of {len(trajectory)} steps overruns horizon {session.T}")
    return [session.step(cell) for cell in trajectory]


def make_session(grid: GridMap, model: MarkovModel, events: Sequence[Event], T: int, *,
                 epsilon: float, mechanism: lppm.LppmSpec | None = None, decay: float = 0.5,
                 check_budget_ms: float | None = None, max_halvings: int = 40,
                 simplex: bool = True, pi=None, seed: int = 0) -> ReleaseSession:
    mechanism = lppm.LppmSpec() if mechanism is None else mechanism
    params = EnforceParams(epsilon, decay, check_budget_ms, max_halvings, simplex)
    return ReleaseSession(grid, model, events, T, mechanism, params, pi, seed)
