import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from priste import lppm
from priste.errors import ConfigError, EmptySet, ZeroLikelihood
from priste.statespace import GridMap


def plm(grid, alpha, n=3, kernel=lppm.GEOIND):
    return lppm.planar_laplace_matrix(grid, lppm.PlanarLaplaceSpec(alpha, n, kernel))


def test_single_cell():
    assert np.array_equal(plm(GridMap(1, 1), 0.7), [[1.0]])


def test_flat_limit():
    assert np.allclose(plm(GridMap(3, 3), 1e-9), 1 / 9, atol=1e-6)


def test_sharp_limit():
    assert np.all(np.diag(plm(GridMap(3, 3), 100.0)) > 0.99)


def test_sharp_limit_against_dense_integration():
    g = GridMap(3, 3)
    coarse = plm(g, 100.0, n=3)
    dense = plm(g, 100.0, n=20)
    assert np.all(np.diag(dense) > 0.99)
    assert np.allclose(np.diag(coarse), np.diag(dense), atol=1e-6)


def test_rows_stochastic():
    P = plm(GridMap(5, 4), 0.8)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.2, 1.0, 5.0])
@pytest.mark.parametrize("n", [5, 7])
def test_geo_indistinguishability(alpha, n):
    g = GridMap(6, 6)
    P = plm(g, alpha, n)
    bound = np.exp(alpha * g.distance_matrix_km)[:, :, None] * P[None, :, :]
    assert np.all(P[:, None, :] <= bound * (1 + 1e-6))


def test_plain_kernel_breaks_the_inequality():
    # normalising the full-rate kernel per row lets edge rows exceed the bound
    g = GridMap(10, 10)
    P = plm(g, 1.0, 5, kernel=lppm.PLAIN)
    ratio = P[:, None, :] / (np.exp(g.distance_matrix_km)[:, :, None] * P[None, :, :])
    assert ratio.max() > 1.0 + 1e-6


def test_matrix_is_cached_and_read_only():
    g = GridMap(4, 4)
    a, b = plm(g, 0.3), plm(g, 0.3)
    assert a is b
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


def test_sample_output():
    rng = np.random.default_rng(0)
    assert lppm.sample_output(np.eye(4), 2, rng) == 2
    assert all(lppm.sample_output(np.array([[0, 1, 0]] * 3), 0, rng) == 1 for _ in range(50))
    M = np.array([[0.2, 0.3, 0.5]])
    draws = np.array([lppm.sample_output(M, 0, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=3) / draws.size
    assert np.allclose(freq, [0.2, 0.3, 0.5], atol=0.01)


def test_sample_output_deterministic():
    M = plm(GridMap(3, 3), 0.5)
    assert lppm.sample_output(M, 4, 11) == lppm.sample_output(M, 4, 11)


def test_delta_set_examples():
    assert lppm.delta_set([0.5, 0.3, 0.15, 0.05], 0.1).cells.tolist() == [0, 1, 2]
    assert lppm.delta_set([0.4, 0.0, 0.6, 0.0], 0.0).cells.tolist() == [0, 2]
    assert lppm.delta_set([0, 0, 1, 0], 0.9).cells.tolist() == [2]


def test_delta_set_ties_by_index():
    assert lppm.delta_set([0.25] * 4, 0.5).cells.tolist() == [0, 1]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 0.99))
def test_delta_set_is_minimal(seed, delta):
    rng = np.random.default_rng(seed)
    prior = rng.dirichlet(np.ones(int(rng.integers(1, 12))) * 0.5)
    s = lppm.delta_set(prior, delta)
    assert prior[s.mask].sum() >= 1 - delta - 1e-9
    k = int(s.mask.sum())
    # no smaller set reaches the target: the best k-1 cells fall short
    if k > 1:
        assert np.sort(prior)[::-1][: k - 1].sum() < 1 - delta + 1e-9


def test_restrict_examples():
    M = np.array([[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.1, 0.1, 0.8]])
    full = lppm.DeltaLocationSet(0.0, np.ones(3, bool))
    assert np.allclose(lppm.restrict(M, full), M)
    single = lppm.DeltaLocationSet(0.0, np.array([False, True, False]))
    assert np.allclose(lppm.restrict(M, single), [[0, 1, 0]] * 3)
    two = lppm.restrict(M, lppm.DeltaLocationSet(0.1, np.array([True, True, False])))
    assert np.allclose(two[0], [0.625, 0.375, 0])
    # true cell outside the set falls back to uniform over the set
    assert np.allclose(two[2], [0.5, 0.5, 0])


def test_restrict_empty():
    with pytest.raises(EmptySet):
        lppm.restrict(np.eye(2), lppm.DeltaLocationSet(0.1, np.zeros(2, bool)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_restrict_properties(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 10))
    M = rng.dirichlet(np.ones(m), size=m)
    mask = rng.random(m) < 0.5
    mask[rng.integers(m)] = True
    R = lppm.restrict(M, lppm.DeltaLocationSet(0.1, mask))
    assert np.allclose(R.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(R[:, ~mask] == 0)


def test_posterior_examples():
    prior = np.array([0.2, 0.3, 0.5])
    assert np.allclose(lppm.posterior(prior, np.full(3, 0.4)), prior)
    assert np.allclose(lppm.posterior(prior, [0, 1, 0]), [0, 1, 0])
    assert np.allclose(lppm.posterior([0.5, 0.5], [0.9, 0.1]), [0.9, 0.1])
    with pytest.raises(ZeroLikelihood):
        lppm.posterior([1.0, 0.0], [0.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_posterior_normalised(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 20))
    p = lppm.posterior(rng.dirichlet(np.ones(m)), rng.uniform(0.01, 1, m))
    assert abs(p.sum() - 1) <= 1e-12


def test_emission_matrix_dispatch():
    g = GridMap(3, 3)
    assert np.allclose(lppm.emission_matrix(g, lppm.LppmSpec(lppm.UNIFORM)), 1 / 9)
    base = lppm.emission_matrix(g, lppm.LppmSpec(lppm.PLM, alpha=0.5))
    assert np.allclose(base, plm(g, 0.5))
    prior = np.zeros(9)
    prior[[0, 1]] = 0.5
    R = lppm.emission_matrix(g, lppm.LppmSpec(lppm.PLM_DELTASET, alpha=0.5, delta=0.0), prior=prior)
    assert np.all(R[:, 2:] == 0)
    with pytest.raises(ValueError):
        lppm.emission_matrix(g, lppm.LppmSpec(lppm.PLM_DELTASET))


def test_mechanism_params_validation():
    with pytest.raises(ConfigError):
        lppm.LppmSpec("laplace")
    with pytest.raises(ConfigError):
        lppm.LppmSpec(delta=1.0)
    with pytest.raises(ValueError):
        lppm.PlanarLaplaceSpec(0.0)
