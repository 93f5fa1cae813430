import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from priste import events
from priste.errors import ConfigError, TimestampOutOfRange, WindowOutOfRange
from priste.events import And, Not, Or, Pred

from conftest import random_event


def test_predicate_lookup():
    # u^2 = s_1 on [s_3, s_1, s_2], 0-based cells
    assert events.evaluate(Pred(2, 0), [2, 0, 1])


def test_contradiction_always_false():
    expr = And((Pred(1, 0), Pred(1, 1)))
    assert not any(events.evaluate(expr, [a, b]) for a in range(3) for b in range(3))


def test_presence_lowering_matches_example():
    ev = events.presence(3, [0, 1], 3, 4)
    assert events.lower(ev) == Or((Pred(3, 0), Pred(3, 1), Pred(4, 0), Pred(4, 1)))


def test_pattern_lowering_matches_example():
    ev = events.pattern(3, [[0, 1], [1, 2]], 2)
    assert events.lower(ev) == And((Or((Pred(2, 0), Pred(2, 1))), Or((Pred(3, 1), Pred(3, 2)))))


def test_full_map_presence_is_tautology():
    ev = events.presence(2, [0, 1], 1, 1)
    expr = events.lower(ev)
    assert expr == Or((Pred(1, 0), Pred(1, 1)))
    assert all(events.evaluate(expr, [c]) for c in range(2))


def test_presence_lowering_agrees_on_random_trajectories():
    ev = events.presence(3, [0, 1], 3, 4)
    expr = events.lower(ev)
    rng = np.random.default_rng(0)
    for _ in range(100):
        traj = rng.integers(0, 3, 5).tolist()
        assert events.evaluate(expr, traj) == ev.occurs(traj)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lowering_agrees_exhaustively(seed):
    rng = np.random.default_rng(seed)
    m, T = int(rng.integers(1, 5)), int(rng.integers(1, 6))
    ev = random_event(rng, m, T)
    expr = events.lower(ev)
    for traj in itertools.product(range(m), repeat=T):
        assert events.evaluate(expr, traj) == ev.occurs(traj)


def test_not_and_or_semantics():
    expr = Or((Not(Pred(1, 0)), And((Pred(1, 0), Pred(2, 1)))))
    assert events.evaluate(expr, [1, 0])
    assert events.evaluate(expr, [0, 1])
    assert not events.evaluate(expr, [0, 0])
    assert events.referenced_timestamps(expr) == {1, 2}


def test_evaluate_out_of_range():
    with pytest.raises(TimestampOutOfRange):
        events.evaluate(Pred(4, 0), [0, 1, 2])
    with pytest.raises(TimestampOutOfRange):
        events.presence(2, [0], 2, 3).occurs([0, 0])


def test_event_validation():
    with pytest.raises(WindowOutOfRange):
        events.presence(3, [0], 3, 2)
    with pytest.raises(WindowOutOfRange):
        events.presence(3, [0], 0, 2)
    with pytest.raises(ValueError):
        events.Event(events.PATTERN, (events.region_mask(3, [0]),), 1, 2)
    with pytest.raises(ValueError):
        events.Event("sometimes", (events.region_mask(3, [0]),), 1, 1)
    with pytest.raises(ValueError):
        events.Event(events.PRESENCE, ([0, 2, 1],), 1, 1)


def test_mask_at():
    ev = events.pattern(3, [[0], [1, 2]], 4)
    assert ev.end == 5
    assert ev.mask_at(5).tolist() == [0, 1, 1]
    with pytest.raises(TimestampOutOfRange):
        ev.mask_at(3)


def test_event_json(tmp_path):
    ev = events.pattern(4, [[0], [1, 2]], 3)
    path = tmp_path / "ev.json"
    path.write_text(json.dumps([ev.to_dict(), {"kind": "presence", "cells": [1], "start": 1, "end": 2}]))
    back, other = events.load_events(path, 4)
    assert back.to_dict() == ev.to_dict()
    assert other.regions[0].tolist() == [0, 1, 0, 0]


def test_event_json_errors():
    with pytest.raises(ConfigError):
        events.event_from_dict({"kind": "presence", "start": 1, "end": 2}, 3)
    with pytest.raises(ConfigError):
        events.event_from_dict({"kind": "presence", "regions": [[1, 0]], "start": 1}, 2)
    with pytest.raises(ConfigError):
        events.event_from_dict({"kind": "presence", "regions": [[1, 0]], "start": 1, "end": 1}, 3)
    with pytest.raises(ConfigError):
        events.event_from_dict({"kind": "presence", "cells": [0], "start": 1, "end": 1})
