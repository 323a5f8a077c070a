import numpy as np
import pytest

from qsasep.master import (
    MasterEquation,
    all_states,
    bernoulli_product,
    exact_master_equation,
    index_state,
    state_index,
)
from qsasep.rates import Liggett, ModelSpec, Reversible, Schedule


def test_state_indexing_round_trip():
    for N in (1, 3, 5):
        for k in range(2**N):
            assert state_index(index_state(k, N)) == k
    assert all_states(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_generator_columns_sum_to_zero():
    s = ModelSpec(4, 0.5, 0.3, Reversible(0.2, 0.9, 1.5, 0.7, 1.2, 2.0))
    Q = MasterEquation(s).Q
    assert np.allclose(Q.sum(axis=0), 0.0, atol=1e-12)
    off = Q - np.diag(np.diag(Q))
    assert np.all(off >= 0)


def test_two_site_mass_flow():
    # p = 1 and inert reservoirs: (1,0) -> (0,1) at rate N**(1+a)
    s = ModelSpec(2, 0.0, 1.0, Liggett(0.0, 1.0))
    Q = MasterEquation(s).Q
    s_in, s_out = state_index([1, 0]), state_index([0, 1])
    # the reservoirs are inert only in the relevant directions
    assert Q[s_out, s_in] == pytest.approx(2.0)
    for t in (0.1, 0.5, 2.0):
        mu = exact_master_equation(s, t, np.array([1, 0]))
        assert mu[s_out] == pytest.approx(1 - np.exp(-2 * t), abs=1e-12)


def test_balanced_liggett_stationary_is_product():
    s = ModelSpec(3, 0.0, 1.0, Liggett(0.3, 0.3))
    pi = MasterEquation(s).stationary()
    assert np.max(np.abs(pi - bernoulli_product(3, 0.3))) < 1e-10


def test_time_zero_is_identity():
    s = ModelSpec(3, 1.0, 0.5, Liggett(0.2, 0.6))
    mu0 = np.arange(1, 9, dtype=float)
    mu0 /= mu0.sum()
    assert np.array_equal(exact_master_equation(s, 0.0, mu0), mu0)


def test_rejects_large_or_time_dependent():
    with pytest.raises(ValueError):
        MasterEquation(ModelSpec(11, 1.0, 1.0, Liggett(0.3, 0.3)))
    with pytest.raises(ValueError):
        MasterEquation(ModelSpec(3, 1.0, 1.0, Liggett(Schedule.linear(0.2, 0.4), 0.3)))
