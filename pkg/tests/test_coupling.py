import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from qsasep.coupling import (
    OrderingError,
    PairedConfiguration,
    check_rate_ordering,
    coupled_final_states,
    coupled_step,
    current_direction,
    monotonicity_current_experiment,
    monotonicity_density_experiment,
    run_coupled,
)
from qsasep.master import MasterEquation, state_index
from qsasep.rates import Liggett, ModelSpec, Reversible
from qsasep.rng import Stream


def _chi2_ok(states, mu, alpha=1e-3):
    idx = np.array([state_index(e) for e in states])
    obs = np.bincount(idx, minlength=mu.size)
    exp = mu * idx.size
    keep = exp >= 5
    o, e = obs[keep], exp[keep]
    return chisquare(o, e * o.sum() / e.sum()).pvalue > alpha


def test_rate_ordering_detection():
    lo = ModelSpec(8, 1.0, 0.5, Liggett(0.2, 0.3))
    hi = ModelSpec(8, 1.0, 0.5, Liggett(0.6, 0.3))
    assert check_rate_ordering(lo, hi) == {"left": True, "right": False}
    assert current_direction(lo, hi) == "le"
    assert current_direction(lo, lo) == "eq"
    with pytest.raises(OrderingError):
        run_coupled(hi, lo)
    with pytest.raises(ValueError):
        current_direction(lo, ModelSpec(8, 1.0, 0.5, Liggett(0.6, 0.8)))


def test_exhaustive_ordering_three_sites():
    lo = ModelSpec(3, 0.0, 0.5, Liggett(0.2, 0.3), T=50.0)
    hi = ModelSpec(3, 0.0, 0.5, Liggett(0.7, 0.9), T=50.0)
    states = [np.array(s, np.int8) for s in itertools.product((0, 1), repeat=3)]
    seen = set()
    for a, b in itertools.product(states, states):
        if np.any(a > b):
            continue
        for seed in range(40):
            pair = PairedConfiguration.start(a, b)
            new = coupled_step(pair, lo, hi, Stream(seed))
            assert np.all(new.lower.eta <= new.upper.eta)
            seen.add((tuple(a), tuple(b), tuple(new.lower.eta), tuple(new.upper.eta)))
    # every ordered pair moved somewhere, and many distinct transitions were exercised
    assert len(seen) > 100


def test_identical_marginals_stay_identical():
    spec = ModelSpec(16, 1.0, 0.7, Reversible.with_defaults(16, 0.3, 0.6), T=0.3)
    tr = run_coupled(spec, spec, "same", seed=3, cadence=0.05)
    assert np.array_equal(tr.lower, tr.upper)
    assert tr.identity_holds() and tr.h_discrepancy.sum() == 0


def test_lower_marginal_matches_master_equation():
    spec = ModelSpec(4, 0.0, 0.5, Liggett(0.3, 0.6), T=0.5)
    lo, _ = coupled_final_states(spec, spec, 20000, seed=8, initial=(np.array([1, 0, 0, 1]),) * 2)
    mu = MasterEquation(spec).distribution(0.5, np.array([1, 0, 0, 1]))
    assert _chi2_ok(lo, mu)


def test_both_marginals_match_master_equation_with_gaps():
    lo_spec = ModelSpec(4, 0.0, 0.5, Liggett(0.2, 0.3), T=0.5)
    hi_spec = ModelSpec(4, 0.0, 0.5, Liggett(0.7, 0.8), T=0.5)
    init = (np.array([0, 0, 1, 0]), np.array([1, 0, 1, 1]))
    lo, hi = coupled_final_states(lo_spec, hi_spec, 20000, seed=5, initial=init)
    assert np.all(lo <= hi)
    assert _chi2_ok(lo, MasterEquation(lo_spec).distribution(0.5, init[0]))
    assert _chi2_ok(hi, MasterEquation(hi_spec).distribution(0.5, init[1]))


def test_no_discrepancy_enters_from_the_left():
    lo = ModelSpec(24, 1.0, 1.0, Liggett(0.6, 0.2), T=0.5)
    hi = ModelSpec(24, 1.0, 1.0, Liggett(0.6, 0.6), T=0.5)
    tr = run_coupled(lo, hi, "same", seed=2, cadence=0.01)
    assert np.all(tr.h[:, 4, 0] == 0)
    assert tr.identity_holds() and tr.discrepancy_balance_holds()


def test_current_monotonicity_left_gap():
    lo = ModelSpec(32, 1.0, 1.0, Liggett(0.3, 0.3), T=0.5)
    hi = ModelSpec(32, 1.0, 1.0, Liggett(0.5, 0.3), T=0.5)
    rep = monotonicity_current_experiment(lo, hi, replicas=10, seed=1)
    assert rep.direction == "le" and rep.ok


def test_current_monotonicity_identical():
    spec = ModelSpec(32, 1.0, 1.0, Liggett(0.3, 0.3), T=0.3)
    rep = monotonicity_current_experiment(spec, spec, replicas=5, seed=1, initial="same")
    assert rep.direction == "eq" and rep.difference[0] == 0.0 and rep.ok


def test_density_monotonicity_ordered():
    lo = ModelSpec(64, 1.0, 1.0, Liggett(0.3, 0.6), T=0.3)
    hi = ModelSpec(64, 1.0, 1.0, Liggett(0.5, 0.6), T=0.3)
    rep = monotonicity_density_experiment(lo, hi, [0.2, 0.4, 0.6], replicas=5, seed=3, cadence=0.03)
    assert rep.ok
    assert np.all(rep.lower_mean <= rep.upper_mean + 1e-12)
