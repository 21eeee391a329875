import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maglev_conveyor.dynamics import (
    ForceBalance,
    IntegrationError,
    MoverState,
    closed_form,
    constant_force,
    net_acceleration,
    simulate,
    step,
)


def test_net_acceleration_examples():
    assert net_acceleration(ForceBalance(10.0), 2.0, 0) == 5.0
    assert net_acceleration(ForceBalance(1.5, 1.0, 0.5), 1.0, 1) == 0.0
    assert net_acceleration(ForceBalance(5.0, 1.0, 0.5), 0.5, 1) == pytest.approx(7.0)


def test_net_acceleration_resistance_opposes_motion():
    assert net_acceleration(ForceBalance(0.0, 1.0, 0.0), 1.0, -1) == 1.0
    assert net_acceleration(ForceBalance(0.0, 1.0, 0.0), 1.0, 1) == -1.0


def test_net_acceleration_static_threshold():
    assert net_acceleration(ForceBalance(0.5, 0.2), 1.0, 0, static_threshold=1.0) == 0.0
    # at rest, resistance can only cancel the drive, never reverse it
    assert net_acceleration(ForceBalance(0.5, 2.0), 1.0, 0) == 0.0
    assert net_acceleration(ForceBalance(-3.0, 1.0), 1.0, 0) == -2.0


def test_force_balance_rejects_negative_resistance():
    with pytest.raises(ValueError):
        ForceBalance(1.0, -0.1)


def test_closed_form_examples():
    assert closed_form(3.0, 1.0, 0.0) == (3.0, 0.0)
    assert closed_form(3.0, 0.0, 2.0) == (3.0, 6.0)
    assert closed_form(0.0, 2.0, 3.0) == (6.0, 9.0)
    with pytest.raises(ValueError):
        closed_form(0.0, 1.0, -1.0)


def test_step_zero_force_advances_by_v_dt():
    s = step(MoverState(1.0, 2.0, 1.0), constant_force(0.0), 0.01)
    assert s.velocity == 2.0
    assert s.position == 1.0 + 2.0 * 0.01


def test_step_reports_tick_of_bad_force():
    def bad(state):
        return ForceBalance(math.nan)

    with pytest.raises(IntegrationError) as info:
        simulate(MoverState(0.0, 0.0, 1.0), bad, 1.0, 0.1)
    assert info.value.tick == 0
    assert "tick 0" in str(info.value)


def test_simulate_constant_acceleration_matches_closed_form():
    tr = simulate(MoverState(0.0, 0.0, 1.0), constant_force(2.0), 3.0, 1e-3)
    v, x = closed_form(0.0, 2.0, 3.0)
    assert tr.velocity[-1] == pytest.approx(v, rel=1e-12)
    # semi-implicit Euler overshoots by a t dt / 2
    assert abs(tr.position[-1] - x) <= 0.5 * 2.0 * 3.0 * 1e-3 + 1e-9
    assert tr.position[-1] == pytest.approx(x, rel=1e-3)


def test_simulate_sample_counts():
    s0 = MoverState(0.0, 0.0, 1.0)
    assert len(simulate(s0, constant_force(1.0), 0.0, 0.1)) == 1
    assert len(simulate(s0, constant_force(1.0), 1.0, 0.1)) == 11
    tr = simulate(s0, constant_force(1.0), 1.05, 0.1)
    assert len(tr) == math.floor(1.05 / 0.1) + 1 + 1
    assert tr.t[-1] == 1.05
    assert np.all(np.diff(tr.t) > 0)


@pytest.mark.parametrize("dt", [1e-2, 1e-3, 1e-4])
def test_first_order_error_constant(dt):
    t_end, a = 1.0, 2.0
    tr = simulate(MoverState(0.0, 0.0, 1.0), constant_force(a), t_end, dt)
    err = abs(tr.position[-1] - closed_form(0.0, a, t_end)[1])
    # error / dt is the same constant across the sweep
    assert err / dt == pytest.approx(0.5 * a * t_end, rel=1e-6)


def test_halving_dt_halves_error():
    errs = []
    for dt in (0.02, 0.01, 0.005):
        tr = simulate(MoverState(0.0, 0.0, 1.0), constant_force(2.0), 1.0, dt)
        errs.append(abs(tr.position[-1] - 1.0))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=1e-6)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(
    v0=st.floats(-5.0, 5.0),
    friction=st.floats(0.0, 3.0),
    drag=st.floats(0.0, 3.0),
    mass=st.floats(0.1, 10.0),
)
def test_resistance_never_adds_energy(v0, friction, drag, mass):
    tr = simulate(MoverState(0.0, v0, mass), constant_force(0.0, friction, drag), 2.0, 1e-2)
    ke = 0.5 * mass * tr.velocity**2
    assert np.all(np.diff(ke) <= 1e-12)
    # never reverses direction
    assert np.all(tr.velocity * np.sign(v0) >= 0)


def test_simulate_is_deterministic():
    f = constant_force(1.3, 0.2, 0.4)
    a = simulate(MoverState(0.0, 0.0, 1.7), f, 2.0, 1e-3)
    b = simulate(MoverState(0.0, 0.0, 1.7), f, 2.0, 1e-3)
    assert a.position.tobytes() == b.position.tobytes()
    assert a.velocity.tobytes() == b.velocity.tobytes()
    assert np.all(np.isfinite(a.acceleration))
