"""Release-time privacy check over every initial distribution.

For a candidate observation the likelihood-ratio bound has to hold for
all ``pi``.  Multiplying through by ``Pr(E) Pr(not E)`` turns each
direction into a quadratic condition ``pi Q pi^T + l pi^T <= 0`` where
``Q = a w^T`` is rank one.  :func:`certify` decides such a condition.

On the simplex the rank-one structure makes the problem easy: once
``a . pi`` is fixed the objective is linear in ``pi``, and a linear program
with two equality constraints has an optimal vertex with at most two
nonzeros.  Scanning every edge of the simplex (O(m^2), vectorised) is
therefore an exact global maximisation.  Unfactored conditions fall back
to bounds, exhaustive face enumeration for small m, and multistart
projected-gradient ascent.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateEvent, DegeneratePrior
from .markov import MarkovModel, as_distribution
from . import twoworld

CERTIFIED = "certified"
REFUTED = "refuted"
UNKNOWN = "unknown"

TOL = 1e-10
FACE_ENUM_MAX = 12
BOX_ENUM_MAX = 8


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True, eq=False)
class QuadraticCondition:
    """``pi Q pi^T + l pi^T <= 0`` over the simplex (or the unit box).

    Build with ``Q`` directly, or with factors ``u, w`` meaning
    ``Q = (u w^T + w u^T) / 2``.  Either way ``Q`` is symmetric.
    """

    l: np.ndarray
    Q_given: np.ndarray | None = None
    u: np.ndarray | None = None
    w: np.ndarray | None = None
    simplex: bool = True

    def __post_init__(self):
        if self.Q_given is None and (self.u is None or self.w is None):
            raise ValueError("need Q or both factors u and w")

    @classmethod
    def from_matrix(cls, Q, l, simplex: bool = True) -> "QuadraticCondition":
        Q = np.asarray(Q, dtype=float)
        return cls(l=np.asarray(l, dtype=float), Q_given=0.5 * (Q + Q.T), simplex=simplex)

    @classmethod
    def from_factors(cls, u, w, l, simplex: bool = True) -> "QuadraticCondition":
        return cls(l=np.asarray(l, dtype=float), u=np.asarray(u, dtype=float),
                   w=np.asarray(w, dtype=float), simplex=simplex)

    @property
    def m(self) -> int:
        return self.l.shape[0]

    @property
    def factored(self) -> bool:
        return self.u is not None

    @cached_property
    def Q(self) -> np.ndarray:
        if self.Q_given is not None:
            return self.Q_given
        uw = np.outer(self.u, self.w)
        return 0.5 * (uw + uw.T)

    @cached_property
    def H(self) -> np.ndarray:
        """Homogenised form: equals ``Q + l`` terms on the simplex."""
        if self.factored and self.Q_given is None:
            X = np.outer(self.u, self.w) + self.l[:, None]
            return 0.5 * (X + X.T)
        return self.Q + 0.5 * (self.l[:, None] + self.l[None, :])

    def value(self, pi) -> float:
        pi = np.asarray(pi, dtype=float)
        if self.factored:
            return float((pi @ self.u) * (pi @ self.w) + self.l @ pi)
        return float(pi @ self.Q @ pi + self.l @ pi)

    def lambda_max(self) -> float:
        if self.factored:
            uw = float(self.u @ self.w)
            return 0.5 * (uw + float(np.linalg.norm(self.u) * np.linalg.norm(self.w)))
        return float(np.linalg.eigvalsh(self.Q)[-1])


@dataclass(frozen=True)
class CheckVerdict:
    status: str
    witness: np.ndarray | None = None
    margin: float | None = None
    lower: float = -math.inf
    upper: float = math.inf
    timed_out: bool = False
    elapsed_ms: float = 0.0

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def conditions_from_vectors(a_top, b, c, epsilon: float, simplex: bool = True):
    """The two conditions for projected vectors ``a``, ``b``, ``c`` (length m).

    ``b`` and ``c`` are rescaled by ``max(c)`` and both conditions are
    divided by ``e^eps``; neither changes the sign of any value, and it
    keeps every coefficient O(1) for long sequences and large epsilon.
    """
    a_top = np.asarray(a_top, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if not a_top.max(initial=0.0) > 0:
        raise DegenerateEvent("event has zero prior under every initial distribution")
    scale = c.max(initial=0.0)
    if not scale > 0:
        raise DegenerateEvent("observation has zero likelihood under every initial distribution")
    b, c = b / scale, c / scale
    k = math.exp(-epsilon)
    one_minus_k = -math.expm1(-epsilon)
    fwd = QuadraticCondition.from_factors(a_top, (b - c) - k * b, k * b, simplex)
    bwd = QuadraticCondition.from_factors(a_top, one_minus_k * b + k * c, -b, simplex)
    return fwd, bwd


def build_conditions(cv: twoworld.CheckVectors, a, epsilon: float, simplex: bool = True):
    """Conditions for the current ``b``, ``c`` of an advanced :class:`CheckVectors`."""
    if cv.b is None:
        raise ValueError("check vectors have not been advanced yet")
    a = np.asarray(a, dtype=float)
    return conditions_from_vectors(a[: cv.b.shape[0]], cv.b, cv.c, epsilon, simplex)


# Solver --------------------------------------------------------------------

class _Clock:
    def __init__(self, budget_ms):
        self.t0 = time.perf_counter()
        self.deadline = None if budget_ms is None or math.isinf(budget_ms) else self.t0 + budget_ms / 1e3

    def expired(self) -> bool:
        return self.deadline is not None and time.perf_counter() > self.deadline

    def ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1e3


def _edge_scan(H: np.ndarray, clock: _Clock, chunk: int = 128):
    """Exact max of ``pi H pi`` over all edges of the simplex.

    On edge ``(i, j)`` the value is a convex combination of ``H_ii``,
    ``H_ij`` and ``H_jj``, so an interior point can only beat both
    endpoints when ``H_ij > max(H_ii, H_jj)``; only those pairs are solved.
    Returns ``(value, witness, complete)``.
    """
    m = H.shape[0]
    d = H.diagonal()
    k = int(np.argmax(d))
    best, best_pi = float(d[k]), np.eye(m)[k]
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        rows = H[lo:hi]
        r, j = np.nonzero(rows > np.maximum(d[lo:hi, None], d[None, :]))
        if r.size:
            a, c, h = d[lo + r], d[j], rows[r, j]
            denom = 2.0 * h - a - c
            vals = c + (h - c) ** 2 / denom
            n = int(np.argmax(vals))
            if vals[n] > best:
                lam = (h[n] - c[n]) / denom[n]
                pi = np.zeros(m)
                pi[lo + r[n]], pi[j[n]] = lam, 1.0 - lam
                best, best_pi = float(vals[n]), pi
        if hi < m and clock.expired():
            return best, best_pi, False
    return best, best_pi, True


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _project(v, simplex):
    return _project_simplex(v) if simplex else np.clip(v, 0.0, 1.0)


def _ascent(cond: QuadraticCondition, x0: np.ndarray, iters: int, clock: _Clock):
    Q, l, simplex = cond.Q, cond.l, cond.simplex
    x = _project(x0, simplex)
    fx = float(x @ Q @ x + l @ x)
    step = 1.0
    for _ in range(iters):
        g = 2.0 * Q @ x + l
        while step > 1e-14:
            y = _project(x + step * g, simplex)
            fy = float(y @ Q @ y + l @ y)
            if fy > fx + 1e-15:
                break
            step *= 0.5
        else:
            break
        if np.abs(y - x).max() < 1e-13:
            x, fx = y, fy
            break
        x, fx = y, fy
        step *= 2.0
        if clock.expired():
            break
    return x, fx


def _faces_simplex(cond: QuadraticCondition, clock: _Clock):
    """Every relative-interior stationary point of every face; exact for small m."""
    m, Q, l = cond.m, cond.Q, cond.l
    best, best_pi = -math.inf, None
    for size in range(1, m + 1):
        for S in itertools.combinations(range(m), size):
            S = list(S)
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = 2.0 * Q[np.ix_(S, S)]
            K[:size, size] = -1.0
            K[size, :size] = 1.0
            rhs = np.concatenate([-l[S], [1.0]])
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            x = sol[:size]
            if np.abs(K @ sol - rhs).max() > 1e-9 or x.min() < -1e-12:
                continue
            pi = np.zeros(m)
            pi[S] = np.maximum(x, 0.0)
            pi /= pi.sum()
            v = cond.value(pi)
            if v > best:
                best, best_pi = v, pi
            if clock.expired():
                return best, best_pi, False
    return best, best_pi, True


def _faces_box(cond: QuadraticCondition, clock: _Clock):
    m, Q, l = cond.m, cond.Q, cond.l
    best, best_pi = -math.inf, None
    for pattern in itertools.product((0, 1, 2), repeat=m):
        fixed = np.array([p for p in pattern], dtype=int)
        free = np.flatnonzero(fixed == 2)
        base = np.where(fixed == 1, 1.0, 0.0)
        if free.size:
            K = 2.0 * Q[np.ix_(free, free)]
            rhs = -(l[free] + 2.0 * Q[free] @ base)
            x = np.linalg.lstsq(K, rhs, rcond=None)[0]
            if np.abs(K @ x - rhs).max() > 1e-9 or x.min() < -1e-12 or x.max() > 1 + 1e-12:
                continue
            base = base.copy()
            base[free] = np.clip(x, 0.0, 1.0)
        v = cond.value(base)
        if v > best:
            best, best_pi = v, base
        if clock.expired():
            return best, best_pi, False
    return best, best_pi, True


def _concave(cond: QuadraticCondition) -> bool:
    Q = cond.Q
    if cond.simplex:
        m = cond.m
        P = np.eye(m) - 1.0 / m
        Q = P @ Q @ P
    return float(np.linalg.eigvalsh(Q)[-1]) <= 1e-12


def _fw_upper(cond: QuadraticCondition, x: np.ndarray, fx: float) -> float:
    g = 2.0 * cond.Q @ x + cond.l
    if cond.simplex:
        return fx + float(g.max() - g @ x)
    return fx + float(np.maximum(g, 0.0).sum() - g @ x)


def certify(cond: QuadraticCondition, budget_ms: float | None = None, seed: int = 0,
            tol: float = TOL, starts: int = 16, iters: int = 200) -> CheckVerdict:
    """Decide ``max pi Q pi^T + l pi^T <= 0``.

    Certified only on a sound upper bound ``<= tol``; Refuted only with a
    witness whose value exceeds ``tol``; anything else (including running
    out of ``budget_ms``) is Unknown.
    """
    clock = _Clock(budget_ms)

    def verdict(status, witness=None, lower=-math.inf, upper=math.inf, timed_out=False):
        margin = None if witness is None else cond.value(witness)
        if status == REFUTED and not margin > tol:
            status = UNKNOWN
        return CheckVerdict(status, witness, margin, lower, upper, timed_out, clock.ms())

    m, l = cond.m, cond.l
    if cond.simplex:
        upper = min(max(cond.lambda_max(), 0.0) + float(l.max()), float(cond.H.max()))
        diag = cond.H.diagonal()
        i = int(np.argmax(diag))
        lower, witness = float(diag[i]), np.eye(m)[i]
    else:
        pos_pairs = float(np.maximum(cond.Q, 0.0).sum())
        upper = min(max(cond.lambda_max(), 0.0) * m, pos_pairs) + float(np.maximum(l, 0.0).sum())
        cands = np.vstack([np.eye(m), np.ones((1, m))])
        vals = np.array([cond.value(x) for x in cands])
        i = int(np.argmax(vals))
        lower, witness = max(float(vals[i]), 0.0), cands[i] if vals[i] > 0 else np.zeros(m)

    if upper <= tol:
        return verdict(CERTIFIED, witness, lower, upper)
    if lower > tol:
        return verdict(REFUTED, witness, lower, upper)

    exact = None
    if cond.simplex and cond.factored:
        exact = _edge_scan(cond.H, clock)
    elif cond.simplex and m <= FACE_ENUM_MAX:
        exact = _faces_simplex(cond, clock)
    elif not cond.simplex and m <= BOX_ENUM_MAX:
        exact = _faces_box(cond, clock)
    if exact is not None:
        best, pi, complete = exact
        if pi is not None and best > lower:
            lower, witness = best, pi
        if lower > tol:
            return verdict(REFUTED, witness, lower, upper)
        if complete:
            return verdict(CERTIFIED, witness, lower, min(upper, lower))
        return verdict(UNKNOWN, witness, lower, upper, timed_out=True)

    rng = np.random.default_rng(seed)
    x0s = [witness] + [rng.dirichlet(np.ones(m)) if cond.simplex else rng.random(m)
                       for _ in range(starts - 1)]
    best_x, best_f = witness, lower
    for x0 in x0s:
        if clock.expired():
            return verdict(UNKNOWN, best_x, best_f, upper, timed_out=True)
        x, fx = _ascent(cond, x0, iters, clock)
        if fx > best_f:
            best_x, best_f = x, fx
        if best_f > tol:
            return verdict(REFUTED, best_x, best_f, upper)
    if _concave(cond):
        upper = min(upper, _fw_upper(cond, best_x, best_f))
        if upper <= tol:
            return verdict(CERTIFIED, best_x, best_f, upper)
    return verdict(UNKNOWN, best_x, best_f, upper, timed_out=clock.expired())


def certify_pair(conds, budget_ms: float | None = None, **kwargs) -> list[CheckVerdict]:
    """Certify conditions in order, stopping at the first one that is not Certified.

    The budget is shared across the conditions.
    """
    clock = _Clock(budget_ms)
    out = []
    for cond in conds:
        remaining = None if clock.deadline is None else max((clock.deadline - time.perf_counter()) * 1e3, 0.0)
        v = certify(cond, remaining, **kwargs)
        out.append(v)
        if not v.certified:
            break
    return out


# Fixed-pi quantification -----------------------------------------------------

def quantify_fixed_pi(event, model: MarkovModel, pi, emissions, epsilon: float,
                      rtol: float = 1e-9) -> tuple[float, float, bool]:
    """Likelihood ratios ``Pr(o|E)/Pr(o|not E)`` and its reciprocal for one ``pi``."""
    pi = as_distribution(pi, model.m)
    T = max(len(emissions), event.end)
    chain = twoworld.build_chain(event, model, T)
    p_event = twoworld.prior(chain, pi)
    if p_event <= 1e-12 or p_event >= 1.0 - 1e-12:
        raise DegeneratePrior(f"Pr(Event) = {p_event!r} leaves a conditional undefined")
    je, jn, _ = twoworld.joint_terms(chain, pi, emissions)
    return _ratios(je / p_event, jn / (1.0 - p_event), epsilon, rtol)


def quantify_from_vectors(a_top, b, c, pi, epsilon: float, rtol: float = 1e-9):
    """Same ratios computed from check vectors instead of a fresh forward pass."""
    pi = np.asarray(pi, dtype=float)
    p_event = float(pi @ a_top)
    if p_event <= 1e-12 or p_event >= 1.0 - 1e-12:
        raise DegeneratePrior(f"Pr(Event) = {p_event!r} leaves a conditional undefined")
    je, jall = float(pi @ b), float(pi @ c)
    return _ratios(je / p_event, (jall - je) / (1.0 - p_event), epsilon, rtol)


def _ratios(given_event, given_not, epsilon, rtol):
    if given_event == 0 and given_not == 0:
        raise DegenerateEvent("observations have zero likelihood")
    fwd = math.inf if given_not == 0 else given_event / given_not
    bwd = math.inf if given_event == 0 else given_not / given_event
    holds = max(fwd, bwd) <= math.exp(epsilon) * (1.0 + rtol)
    return fwd, bwd, holds


def check_sequence(event, model: MarkovModel, emissions, epsilon: float, T: int | None = None,
                   budget_ms: float | None = None, simplex: bool = True) -> list[tuple]:
    """``(fwd, bwd)`` verdicts for every prefix of ``emissions``, over all ``pi``."""
    T = max(len(emissions), event.end) if T is None else T
    chain = twoworld.build_chain(event, model, T)
    cv = twoworld.init_check_vectors(chain)
    out = []
    for t, col in enumerate(emissions, start=1):
        cv = twoworld.advance(cv, chain, col, t)
        fwd, bwd = build_conditions(cv, chain.a, epsilon, simplex)
        out.append((certify(fwd, budget_ms), certify(bwd, budget_ms)))
    return out
