import numpy as np
import pytest

from priste import events, oracle, twoworld
from priste.errors import TooLarge
from priste.events import And, Or, Pred

from conftest import random_columns, random_event, random_model


def test_example_prior(example_model, example_event):
    assert oracle.enumerate_prior(example_event, example_model, [1, 0, 0], 4) == pytest.approx(0.28, abs=1e-12)


def test_tautology_and_contradiction(example_model):
    taut = Or((Pred(1, 0), Pred(1, 1), Pred(1, 2)))
    assert oracle.enumerate_prior(taut, example_model, [0.2, 0.3, 0.5], 2) == pytest.approx(1.0)
    contra = And((Pred(1, 0), Pred(1, 1)))
    assert oracle.enumerate_prior(contra, example_model, [0.2, 0.3, 0.5], 2) == 0.0


def test_all_ones_emissions(example_model, example_event):
    pi = [0.2, 0.3, 0.5]
    p = oracle.enumerate_prior(example_event, example_model, pi, 4)
    assert oracle.enumerate_joint(example_event, example_model, pi, [np.ones(3)] * 4, 4) == pytest.approx(p, abs=1e-12)


def test_single_step_presence(example_model):
    ev = events.presence(3, [1], 1, 1)
    e = np.array([0.3, 0.6, 0.9])
    pi = np.array([0.2, 0.3, 0.5])
    assert oracle.enumerate_joint(ev, example_model, pi, [e], 1) == pytest.approx(pi[1] * e[1])


def test_guard():
    rng = np.random.default_rng(0)
    model = random_model(rng, 10)
    with pytest.raises(TooLarge):
        oracle.enumerate_prior(events.presence(10, [0], 1, 8), model, np.full(10, 0.1), 8)


def test_agrees_with_fast_path_random():
    rng = np.random.default_rng(21)
    for _ in range(30):
        m, T = 3, 5
        ev = random_event(rng, m, T)
        model = random_model(rng, m)
        pi = rng.dirichlet(np.ones(m))
        cols = random_columns(rng, m, T)
        chain = twoworld.build_chain(ev, model, T)
        n = int(rng.integers(1, T + 1))
        assert twoworld.joint(chain, pi, cols[:n]) == pytest.approx(
            oracle.enumerate_joint(ev, model, pi, cols[:n], T), rel=1e-9, abs=1e-15)


def test_forward_likelihood_matches_enumeration(example_model):
    rng = np.random.default_rng(1)
    cols = random_columns(rng, 3, 4)
    taut = Or(tuple(Pred(1, i) for i in range(3)))
    pi = [0.2, 0.3, 0.5]
    assert oracle.forward_likelihood(example_model, pi, cols) == pytest.approx(
        oracle.enumerate_joint(taut, example_model, pi, cols, 4), rel=1e-12)


def test_bench_pair_tiny_instance():
    rng = np.random.default_rng(0)
    inst = oracle.BenchInstance(events.presence(2, [0], 1, 3), random_model(rng, 2),
                                np.array([0.5, 0.5]), tuple(random_columns(rng, 2, 3)), 3)
    fast, naive = oracle.bench_pair(inst, min_time=0.005)
    assert fast < 1e6 and naive < 1e6


def test_naive_grows_with_length_fast_does_not():
    from priste.experiments import bench_instance
    short, long_ = bench_instance(3, 5, 2), bench_instance(3, 10, 2)
    f5, n5 = oracle.bench_pair(short, min_time=0.01)
    f10, n10 = oracle.bench_pair(long_, min_time=0.01)
    assert n10 / n5 >= 10
    assert f10 / f5 <= 3


def test_fast_path_width_growth_is_polynomial():
    from priste.experiments import bench_instance
    t5 = oracle.time_call(oracle.fast_joint, bench_instance(5, 5, 5), min_time=0.01)
    t10 = oracle.time_call(oracle.fast_joint, bench_instance(10, 5, 10), min_time=0.01)
    assert t10 / t5 <= 8
