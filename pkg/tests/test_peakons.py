"""Point-momentum dynamics: rates, conservation, orbits, and measurement."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cchlab.errors import (BlowUpError, ConfigurationError, DomainTooSmallError,
                           MeasurementError)
from cchlab.grid import green_kernel_eval, make_grid
from cchlab.peakons import (PeakonState, evolve_peakons, kernel,
                            kernel_derivative, measure_waltz, peakon_fields,
                            peakon_hamiltonian, peakon_rhs,
                            waltz_period_closed_form)

LN2 = float(np.log(2.0))


# ------------------------------------------------------------------- kernel

def test_kernel_values_and_symmetry():
    assert kernel(0.0) == 0.5
    assert kernel(LN2) == pytest.approx(0.25)
    assert kernel(-3.0) == kernel(3.0)
    assert kernel_derivative(0.0) == 0.0  # odd-symmetric convention at the kink
    assert kernel_derivative(LN2) == pytest.approx(-0.25)
    assert kernel_derivative(-LN2) == pytest.approx(0.25)


# -------------------------------------------------------------------- rates

def test_rates_at_coincident_positions():
    # Each position moves with the other family's velocity; at a coincident
    # pair the amplitude rates vanish (the kernel slope is zero there).
    ps = PeakonState(0.0, [0.0], [10.0], [0.0], [1.0])
    rates = peakon_rhs(ps)
    assert rates.dq[0] == pytest.approx(0.5)   # n * K(0)
    assert rates.dr[0] == pytest.approx(5.0)   # m * K(0)
    assert rates.dm_amp[0] == 0.0
    assert rates.dn_amp[0] == 0.0
    assert peakon_hamiltonian(ps) == pytest.approx(5.0)  # m * n * K(0)


def test_rates_at_half_kernel_separation():
    # At separation ln 2 the kernel halves, so the induced speed halves too,
    # and the amplitudes exchange at rate m*n*K'(z).
    ps = PeakonState(0.0, [-LN2], [10.0], [0.0], [1.0])
    rates = peakon_rhs(ps)
    assert rates.dq[0] == pytest.approx(0.25)
    assert rates.dm_amp[0] == pytest.approx(-10.0 * 1.0 * kernel_derivative(-LN2))
    assert rates.dn_amp[0] == pytest.approx(+1.0 * 10.0 * kernel_derivative(-LN2))


@settings(max_examples=60, deadline=None)
@given(
    q=st.lists(st.floats(-10.0, 10.0), min_size=1, max_size=3),
    r=st.lists(st.floats(-10.0, 10.0), min_size=1, max_size=3),
    data=st.data(),
)
def test_total_amplitude_rate_always_cancels(q, r, data):
    amp = st.floats(-5.0, 5.0)
    m = [data.draw(amp) for _ in q]
    n = [data.draw(amp) for _ in r]
    rates = peakon_rhs(PeakonState(0.0, q, m, r, n))
    scale = 1.0 + sum(abs(a) for a in m) * sum(abs(b) for b in n)
    assert abs(float(np.sum(rates.dm_amp) + np.sum(rates.dn_amp))) < 1e-12 * scale


# --------------------------------------------------------------- validation

def test_state_validation():
    with pytest.raises(ValueError):
        PeakonState(0.0, [[0.0, 1.0]], [[1.0, 1.0]], [0.0], [1.0])
    with pytest.raises(FloatingPointError):
        PeakonState(0.0, [np.nan], [1.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        PeakonState(0.0, [0.0, 1.0], [1.0], [0.0], [1.0])
    ps = PeakonState(0.0, 0.0, 1.0, 5.0, 2.0)  # scalars become 1-vectors
    assert ps.q.shape == (1,)


def test_evolve_validation_and_blowup_guard():
    ps = PeakonState(0.0, [0.0], [10.0], [5.0], [1.0])
    with pytest.raises(ConfigurationError):
        evolve_peakons(ps, 1.0, -1e-3)
    with pytest.raises(ConfigurationError):
        evolve_peakons(ps, -1.0, 1e-3)
    assert evolve_peakons(ps, 0.0, 1e-3) == [ps]
    with pytest.raises(BlowUpError) as info:
        evolve_peakons(ps, 1.0, 1e-3, blowup_factor=0.01)
    assert info.value.trajectory == [ps]


# ------------------------------------------------------------------- orbits

def test_equal_amplitudes_at_coincidence_comove():
    # The symmetric coincident pair is a relative fixed point: both peakons
    # travel together at constant speed m*K(0) with frozen amplitudes.
    ps = PeakonState(0.0, [0.0], [3.0], [0.0], [3.0])
    traj = evolve_peakons(ps, 0.5, 1e-2)
    final = traj[-1]
    assert abs(final.q[0] - final.r[0]) < 1e-13
    assert final.m_amp[0] == pytest.approx(3.0, abs=1e-13)
    assert final.q[0] == pytest.approx(1.5 * 0.5, abs=1e-12)


def test_closed_form_period_values_and_validation():
    # Coincident start: the period reduces to 4|m - n| / (m n).
    assert waltz_period_closed_form(10.0, 1.0, 0.0) == pytest.approx(3.6, abs=1e-14)
    with pytest.raises(ConfigurationError):
        waltz_period_closed_form(10.0, -1.0, 1.0)  # opposite signs never orbit
    with pytest.raises(ConfigurationError):
        waltz_period_closed_form(2.0, 2.0, 0.0)  # stationary symmetric pair


def test_quick_orbit_matches_closed_form_period():
    traj = evolve_peakons(PeakonState(0.0, [0.0], [10.0], [0.0], [1.0]), 4.0, 1e-3)
    period, swap_error = measure_waltz(traj)
    assert period == pytest.approx(3.6, abs=1e-7)  # measured gap 5.9e-9
    assert swap_error < 1e-6                       # measured 3.1e-8


def test_waltz_measurement_error_paths():
    ps = PeakonState(0.0, [0.0], [10.0], [5.0], [1.0])
    with pytest.raises(MeasurementError):
        measure_waltz(evolve_peakons(ps, 0.005, 1e-3))  # too few samples
    with pytest.raises(MeasurementError, match="one orbit"):
        measure_waltz(evolve_peakons(ps, 2.0, 1e-3))  # far short of a winding
    stationary = PeakonState(0.0, [0.0], [3.0], [0.0], [3.0])
    with pytest.raises(MeasurementError, match="stationary"):
        measure_waltz(evolve_peakons(stationary, 0.5, 1e-2))
    crowd = PeakonState(0.0, [0.0, 1.0], [1.0, 1.0], [2.0], [1.0])
    with pytest.raises(ValueError):
        measure_waltz(evolve_peakons(crowd, 0.1, 1e-2))


# ------------------------------------------------------------------- fields

def test_fields_on_a_grid():
    g = make_grid(30.0, 256)
    ps = PeakonState(0.0, [1.0], [2.0], [], [])
    u, v = peakon_fields(ps, g)
    assert np.allclose(u.values, 2.0 * green_kernel_eval(g.nodes - 1.0, 30.0))
    assert np.all(v.values == 0.0)
    assert peakon_hamiltonian(ps) == 0.0  # no opposite family to couple to
    outside = PeakonState(0.0, [40.0], [1.0], [0.0], [1.0])
    with pytest.raises(DomainTooSmallError):
        peakon_fields(outside, g)
