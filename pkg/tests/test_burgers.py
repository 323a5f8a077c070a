import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsasep.burgers import (
    CFLError,
    Field1D,
    godunov_step,
    interface_fluxes,
    max_stable_dt,
    quasi_static_sweep,
    steady_state,
)
from qsasep.rates import Schedule
from qsasep.theory import variational_current


def test_hand_step():
    f = Field1D(np.array([0.3, 0.6]), 0.3, 0.6)
    assert interface_fluxes(f.cells, 0.3, 0.6).tolist() == pytest.approx([0.21, 0.21, 0.24])
    new = godunov_step(f, 1.0, 0.1, cfl=1.0)
    assert new.cells.tolist() == pytest.approx([0.3, 0.594])


def test_constant_field_is_fixed_point():
    f = Field1D(np.full(50, 0.37), 0.37, 0.37)
    new = godunov_step(f, 0.1, max_stable_dt(0.1, f.dx))
    assert np.array_equal(new.cells, f.cells)


def test_cfl_guard():
    f = Field1D(np.full(10, 0.5), 0.5, 0.5)
    with pytest.raises(CFLError):
        godunov_step(f, 0.01, 2 * max_stable_dt(0.01, f.dx))


@given(
    st.lists(st.floats(0, 1), min_size=4, max_size=30),
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0.05, 1.0),
)
def test_maximum_principle(cells, gl, gr, pb):
    f = Field1D(np.array(cells), gl, gr)
    lo = min(min(cells), gl, gr)
    hi = max(max(cells), gl, gr)
    for _ in range(5):
        f = godunov_step(f, 0.2, max_stable_dt(0.2, f.dx, pb), p_bar=pb)
    assert f.cells.min() >= lo - 1e-12 and f.cells.max() <= hi + 1e-12


def test_riemann_to_max_current():
    M = 100
    f = Field1D(np.where(np.arange(M) < M // 2, 0.8, 0.2), 0.8, 0.2)
    eps = 1.0
    dt = max_stable_dt(eps, f.dx)
    for _ in range(4000):
        f = godunov_step(f, eps, dt)
    flux = interface_fluxes(f.cells, 0.8, 0.2)
    assert np.abs(flux[10:-10] - 0.25).max() < 1e-3


def test_steady_state_examples():
    for (a, b) in [(0.3, 0.6), (0.8, 0.2), (0.4, 0.9), (0.1, 0.1), (0.9, 0.95)]:
        ss = steady_state(a, b, M=100)
        assert ss.converged
        assert ss.flux == pytest.approx(variational_current(a, b), abs=1e-12)
        assert ss.flux_spread < 1e-12


def test_sweep_balanced_constant_is_exact():
    runs = quasi_static_sweep([0.3, 0.1], 0.4, 0.4, T=1.0, M=50, records=10)
    for r in runs:
        assert r.density_distance < 1e-14 and r.flux_distance < 1e-14


def test_sweep_ramp_distance_decreases():
    ramp = Schedule.linear(0.3, 0.45)
    runs = quasi_static_sweep([0.3, 0.1, 0.03], ramp, ramp, T=1.0, M=100, records=20)
    d = [r.density_distance for r in runs]
    assert d[0] > d[1] > d[2]


def test_sweep_rejects_bad_epsilons():
    with pytest.raises(ValueError):
        quasi_static_sweep([0.1, 0.3], 0.4, 0.4)
