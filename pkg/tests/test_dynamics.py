from __future__ import annotations

import math

import numpy as np
import pytest

from cacc_app.dynamics import VehicleParams, VehicleState, closed_form_response, step_vehicle, steady_state_accel
from cacc_app.errors import InvalidArgumentError, InvalidStateError

TAU = 0.9


def _integrate(u: float, t_end: float, dt: float, integrator: str) -> VehicleState:
    params = VehicleParams(tau=TAU)
    st = VehicleState()
    for _ in range(int(round(t_end / dt))):
        st = step_vehicle(st, params, u, dt, integrator=integrator)
    return st


def test_rest_with_zero_input_stays_at_rest() -> None:
    st = VehicleState(p=3.0)
    for _ in range(100):
        st = step_vehicle(st, VehicleParams(tau=TAU), 0.0, 0.01)
    assert st == VehicleState(p=3.0)


def test_exact_integrator_matches_closed_form_over_100s() -> None:
    expected = closed_form_response(VehicleState(), VehicleParams(tau=TAU), 0.1, 100.0)
    got = _integrate(0.1, 100.0, 0.01, "exact")
    assert got.a == pytest.approx(expected.a, abs=1e-9)
    assert got.v == pytest.approx(expected.v, abs=1e-6)
    assert got.p == pytest.approx(expected.p, abs=1e-6)


def test_trapezoidal_integrator_tracks_closed_form() -> None:
    expected = closed_form_response(VehicleState(), VehicleParams(tau=TAU), 0.1, 100.0)
    got = _integrate(0.1, 100.0, 0.01, "trapezoidal")
    # acceleration uses the exact exponential update
    assert got.a == pytest.approx(expected.a, abs=1e-12)
    assert got.v == pytest.approx(expected.v, abs=1e-5)
    assert got.p == pytest.approx(expected.p, abs=1e-3)


def test_closed_form_at_zero_time_is_identity() -> None:
    st = VehicleState(p=1.0, v=2.0, a=-0.5)
    assert closed_form_response(st, VehicleParams(tau=TAU), 0.3, 0.0) == st


def test_acceleration_settles_to_command() -> None:
    st = _integrate(0.3, 20.0, 0.01, "trapezoidal")
    assert st.a == pytest.approx(steady_state_accel(0.3), abs=1e-6)


def test_bad_step_rejected() -> None:
    params = VehicleParams(tau=TAU)
    with pytest.raises(InvalidArgumentError):
        step_vehicle(VehicleState(), params, 0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        step_vehicle(VehicleState(), params, 0.0, -0.01)
    with pytest.raises(InvalidArgumentError):
        step_vehicle(VehicleState(), params, 0.0, 0.01, integrator="euler")


def test_non_finite_input_rejected() -> None:
    params = VehicleParams(tau=TAU)
    with pytest.raises(InvalidStateError):
        step_vehicle(VehicleState(v=math.nan), params, 0.0, 0.01)
    with pytest.raises(InvalidStateError):
        step_vehicle(VehicleState(), params, math.inf, 0.01)


def test_vehicle_params_collect_all_violations() -> None:
    with pytest.raises(InvalidArgumentError) as exc:
        VehicleParams(tau=-1.0, v_min=math.nan)
    assert "tau" in str(exc.value)
    assert "v_min" in str(exc.value)


def test_clamp_stops_at_zero_velocity() -> None:
    st = step_vehicle(VehicleState(v=0.001, a=-1.0), VehicleParams(tau=TAU), -1.0, 0.01, clamp=True)
    assert st.v == 0.0
    assert st.a == 0.0


def test_clamp_uses_positive_velocity_floor() -> None:
    st = step_vehicle(VehicleState(v=0.4, a=-1.0), VehicleParams(tau=TAU, v_min=0.5), -1.0, 0.01, clamp=True)
    assert st.v == 0.5


def test_without_clamp_velocity_goes_negative() -> None:
    st = step_vehicle(VehicleState(v=0.001, a=-1.0), VehicleParams(tau=TAU), -1.0, 0.01)
    assert st.v < 0


def test_acceleration_decays_by_e_over_one_time_constant() -> None:
    st = step_vehicle(VehicleState(a=0.4), VehicleParams(tau=TAU), 0.0, TAU)
    assert st.a == pytest.approx(0.4 / math.e, abs=1e-15)


def test_steady_state_accel_is_the_command() -> None:
    for u in (0.0, 0.1, -0.25):
        assert steady_state_accel(u) == u


def test_step_is_linear_without_clamp() -> None:
    params = VehicleParams(tau=TAU)
    x1, u1 = VehicleState(1.0, 2.0, 0.3), 0.2
    x2, u2 = VehicleState(-4.0, 0.5, -0.1), -0.7
    alpha, beta = 1.5, -0.25
    mixed = VehicleState(*(alpha * a + beta * b for a, b in zip((x1.p, x1.v, x1.a), (x2.p, x2.v, x2.a))))
    lhs = step_vehicle(mixed, params, alpha * u1 + beta * u2, 0.01)
    s1, s2 = step_vehicle(x1, params, u1, 0.01), step_vehicle(x2, params, u2, 0.01)
    assert lhs.p == pytest.approx(alpha * s1.p + beta * s2.p, abs=1e-12)
    assert lhs.v == pytest.approx(alpha * s1.v + beta * s2.v, abs=1e-12)
    assert lhs.a == pytest.approx(alpha * s1.a + beta * s2.a, abs=1e-12)


def test_two_half_steps_match_one_step_in_acceleration() -> None:
    params = VehicleParams(tau=TAU)
    st = VehicleState(0.0, 1.0, 0.5)
    one = step_vehicle(st, params, 0.1, 0.02)
    two = step_vehicle(step_vehicle(st, params, 0.1, 0.01), params, 0.1, 0.01)
    assert two.a == pytest.approx(one.a, abs=1e-12)
    assert two.v == pytest.approx(one.v, abs=1e-6)


def _one_vs_tenth_steps(dt: float) -> tuple[float, float]:
    params = VehicleParams(tau=TAU)
    st = VehicleState(0.0, 1.0, 0.5)
    one = step_vehicle(st, params, 0.1, dt)
    ref = st
    for _ in range(10):
        ref = step_vehicle(ref, params, 0.1, dt / 10)
    return abs(one.p - ref.p), abs(one.v - ref.v)


def test_local_error_is_third_order() -> None:
    coarse = _one_vs_tenth_steps(0.02)
    fine = _one_vs_tenth_steps(0.01)
    for c, f in zip(coarse, fine):
        assert f <= 0.01**3
        # halving dt cuts a dt^3 error by about 8
        assert 6.0 < c / f < 10.0


@pytest.mark.parametrize("a0", [1.0, -1.0, 0.3])
def test_acceleration_converges_monotonically(a0: float) -> None:
    params = VehicleParams(tau=TAU)
    u = 0.1
    st = VehicleState(a=a0)
    gaps = [abs(st.a - u)]
    for _ in range(500):
        st = step_vehicle(st, params, u, 0.01)
        gaps.append(abs(st.a - u))
        assert (st.a - u) * (a0 - u) > 0
    assert np.all(np.diff(gaps) < 0)


def test_clamped_vehicle_at_rest_does_not_creep() -> None:
    params = VehicleParams(tau=TAU)
    st = VehicleState(p=5.0)
    for _ in range(300):
        st = step_vehicle(st, params, -0.2, 0.01, clamp=True)
        assert st.p == 5.0
        assert st.v == 0.0
