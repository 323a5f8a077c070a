import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from qsasep import engine
from qsasep.experiments import conservation_holds
from qsasep.master import MasterEquation, state_index
from qsasep.rates import Liggett, ModelSpec, Reversible, Schedule
from qsasep.rng import Stream


def test_rate_bound_examples():
    s = ModelSpec(2, 0.0, 1.0, Liggett(0.5, 0.5))
    assert engine.total_rate_bound(s) >= 4.0 - 1e-12
    s = ModelSpec(2, 0.0, 1.0, Liggett(0.0, 0.0))
    assert engine.total_rate_bound(s) >= 2.0 * 1
    s = ModelSpec(4, 1.0, 1.0, Reversible(0.5, 0.5, 1.0, 1.0, 2.0, 4.0))
    assert s.p == pytest.approx(0.75)
    assert engine.total_rate_bound(s) >= 16 * (3 * 2 * 0.75 + 8) - 1e-9


def test_single_enabled_event():
    # p = 1 and both reservoirs empty/full so that no boundary move is possible
    s = ModelSpec(2, 0.0, 1.0, Liggett(0.0, 1.0))
    cfg = engine.Configuration(np.array([1, 0], np.int8))
    new, counts, t = engine.step(cfg, engine.CountingProcesses.zeros(2), s, Stream(3))
    assert new.eta.tolist() == [0, 1]
    assert counts.h_plus.tolist() == [0, 1, 0] and counts.h_minus.sum() == 0
    assert t > 0


def test_horizon_zero_returns_initial():
    s = ModelSpec(8, 1.0, 1.0, Liggett(0.3, 0.3), T=0.0)
    tr = engine.run(s, initial="10110010")
    assert len(tr) == 1 and tr.eta[0].tolist() == [1, 0, 1, 1, 0, 0, 1, 0]
    assert tr.h.sum() == 0


def test_determinism():
    s = ModelSpec(32, 1.0, 0.6, Liggett(Schedule.linear(0.2, 0.7), 0.4), T=0.3)
    a = engine.run(s, seed=11, replica=2, cadence=0.05)
    b = engine.run(s, seed=11, replica=2, cadence=0.05)
    c = engine.run(s, seed=11, replica=3, cadence=0.05)
    assert np.array_equal(a.eta, b.eta) and np.array_equal(a.h_plus, b.h_plus)
    assert np.array_equal(a.h_minus, b.h_minus) and a.event_count == b.event_count
    assert not np.array_equal(a.h_plus, c.h_plus)


def test_snapshot_times_cadence():
    s = ModelSpec(16, 1.0, 1.0, Liggett(0.3, 0.3), T=0.35)
    tr = engine.run(s, cadence=0.1)
    assert np.allclose(tr.times, [0.0, 0.1, 0.2, 0.3, 0.35])
    assert np.all(np.diff(tr.times) > 0)


def test_balanced_stationary_density():
    s = ModelSpec(64, 1.0, 1.0, Liggett(0.3, 0.3), T=0.5)
    means = [engine.run(s, initial=0.3, seed=5, replica=r).final.eta.mean() for r in range(30)]
    assert 0.27 <= np.mean(means) <= 0.33


def test_envelope_check_passes_for_valid_spec():
    sched = Schedule.cosine(0.1, 0.9, 1.0)
    s = ModelSpec(12, 1.0, 0.5, Reversible(sched, 0.4, Schedule.linear(0.5, 2.0), 1.0, 2.0, 3.0))
    tr = engine.run(s, check=True, seed=1)
    assert conservation_holds(tr)


def test_budget_guard():
    s = ModelSpec(512, 2.0, 1.0, Liggett(0.5, 0.5), T=10.0)
    with pytest.raises(engine.EventBudgetExceeded):
        engine.run(s, max_candidates=10**6)


def test_advance_counts_events():
    s = ModelSpec(64, 1.0, 1.0, Liggett(0.5, 0.5), T=100.0)
    rng = Stream(0)
    c0 = engine.Configuration(rng.bernoulli(0.5, 64))
    cfg, counts, n = engine.advance(c0, engine.CountingProcesses.zeros(64), s, rng, 5000)
    assert n == 5000
    assert counts.h_plus.sum() + counts.h_minus.sum() == 5000
    assert np.array_equal(cfg.eta.astype(int) - c0.eta, counts.h[:-1] - counts.h[1:])


spec_strategy = st.builds(
    lambda N, a, pb, fam, x, y, ramp: ModelSpec(
        N,
        a,
        pb,
        Liggett(Schedule.linear(x, y, 0.2) if ramp else x, y)
        if fam
        else Reversible(Schedule.cosine(x, y, 0.2) if ramp else x, y, 1.0, 2.0, 1.5, 2.0),
        T=0.2,
    ),
    st.integers(2, 24),
    st.floats(0.0, 1.0),
    st.floats(0.05, 1.0),
    st.booleans(),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.booleans(),
)


@given(spec_strategy, st.integers(0, 2**32))
def test_conservation_and_counter_properties(spec, seed):
    tr = engine.run(spec, seed=seed, cadence=0.02)
    assert conservation_holds(tr)
    assert np.all(np.diff(tr.h_plus, axis=0) >= 0) and np.all(np.diff(tr.h_minus, axis=0) >= 0)
    h = tr.h
    # adjacent height differences are occupation changes, hence in {-1, 0, 1}
    assert np.all(np.abs(np.diff(h, axis=1)) <= 1)
    assert set(np.unique(tr.eta)) <= {0, 1}


def test_two_site_long_run_matches_stationary_vector():
    s = ModelSpec(2, 0.0, 1.0, Liggett(0.5, 0.5), T=20.0)
    states = engine.final_states(s, 20000, seed=9)
    idx = np.array([state_index(e) for e in states])
    counts = np.bincount(idx, minlength=4)
    pi = MasterEquation(s).stationary()
    assert np.allclose(pi, 0.25, atol=1e-12)
    se = np.sqrt(pi * (1 - pi) / len(idx))
    assert np.all(np.abs(counts / len(idx) - pi) <= 3 * se)


def test_final_states_chisquare_small_system():
    s = ModelSpec(3, 0.25, 0.4, Liggett(0.2, 0.9), T=0.5)
    states = engine.final_states(s, 40000, seed=2, initial="010")
    idx = np.array([state_index(e) for e in states])
    obs = np.bincount(idx, minlength=8)
    mu = MasterEquation(s).distribution(0.5, np.array([0, 1, 0]))
    keep = mu * len(idx) >= 5
    exp = mu[keep] * len(idx)
    o = obs[keep]
    exp = exp * o.sum() / exp.sum()
    assert chisquare(o, exp).pvalue > 1e-3
