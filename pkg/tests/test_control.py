from __future__ import annotations

import numpy as np
import pytest

from cacc_app.control import (
    Gains,
    NeighborSnapshot,
    SpacingPolicy,
    Topology,
    constant_accel_offsets,
    desired_gap,
    mpf_control,
    spacing_error,
)
from cacc_app.dynamics import VehicleState
from cacc_app.errors import InvalidArgumentError

GAINS = Gains(kp=0.1, kv=0.61, ka=0.41)
POLICY = SpacingPolicy(h=0.78, d=0.6)


def test_topology_caps_predecessors() -> None:
    topo = Topology(n=3, r_max=2)
    assert topo.r == (1, 2, 2)
    assert topo.predecessors(1) == (0,)
    assert topo.predecessors(3) == (2, 1)
    with pytest.raises(InvalidArgumentError):
        topo.r_of(0)
    with pytest.raises(InvalidArgumentError):
        Topology(n=3, r_max=0)


def test_desired_gap_sums_headways() -> None:
    assert desired_gap(POLICY, 1, [2.0]) == pytest.approx(0.78 * 2.0 + 0.6)
    assert desired_gap(POLICY, 2, [1.0, 2.0]) == pytest.approx(0.78 * 3.0 + 1.2)
    with pytest.raises(InvalidArgumentError):
        desired_gap(POLICY, 2, [1.0])


def test_spacing_policy_rejects_bad_values() -> None:
    with pytest.raises(InvalidArgumentError) as exc:
        SpacingPolicy(h=-1.0, d=0.0)
    assert "headway" in str(exc.value) and "standstill" in str(exc.value)


def test_zero_input_at_equilibrium_spacing() -> None:
    v = 10.0
    gap = POLICY.h * v + POLICY.d
    own = VehicleState(p=0.0, v=v)
    snap = NeighborSnapshot(own, (VehicleState(p=gap, v=v), VehicleState(p=2 * gap, v=v)))
    assert mpf_control(GAINS, POLICY, snap) == pytest.approx(0.0, abs=1e-12)


def test_too_close_means_braking() -> None:
    own = VehicleState(p=0.0)
    snap = NeighborSnapshot(own, (VehicleState(p=0.3),))
    # p_i - p_{i-1} + d = -0.3 + 0.6
    assert mpf_control(GAINS, POLICY, snap) == pytest.approx(-0.1 * 0.3)


def test_faster_predecessor_means_accelerating() -> None:
    own = VehicleState(p=0.0, v=5.0)
    snap = NeighborSnapshot(own, (VehicleState(p=POLICY.h * 5.0 + POLICY.d, v=6.0),))
    assert mpf_control(GAINS, POLICY, snap) == pytest.approx(0.61)


def test_empty_snapshot_rejected() -> None:
    with pytest.raises(InvalidArgumentError):
        mpf_control(GAINS, POLICY, NeighborSnapshot(VehicleState(), ()))


def test_spacing_error_against_immediate_predecessor() -> None:
    assert spacing_error(10.0, 0.0, 5.0, POLICY) == pytest.approx(10.0 - (0.78 * 5.0 + 0.6))


def test_constant_accel_offsets_for_two_predecessors() -> None:
    offsets = constant_accel_offsets(GAINS, POLICY, Topology(3, 2), 0.1)
    assert offsets == pytest.approx((0.5242, -0.4758, 0.0242), abs=1e-9)


def test_constant_accel_offsets_need_position_gain() -> None:
    with pytest.raises(InvalidArgumentError):
        constant_accel_offsets(Gains(0.0, 0.61, 0.41), POLICY, Topology(3, 2), 0.1)


def test_single_predecessor_hand_value() -> None:
    own = VehicleState(p=0.0, v=1.0)
    snap = NeighborSnapshot(own, (VehicleState(p=2.0, v=1.0),))
    # -0.1 * (0 - 2.0 + 1.38)
    assert mpf_control(GAINS, POLICY, snap) == pytest.approx(0.062, abs=1e-12)


def test_two_predecessors_at_desired_gaps() -> None:
    v = 1.0
    gap = POLICY.h * v + POLICY.d
    snap = NeighborSnapshot(VehicleState(v=v), (VehicleState(p=gap, v=v), VehicleState(p=2 * gap, v=v)))
    assert mpf_control(GAINS, POLICY, snap) == pytest.approx(0.0, abs=1e-12)


def _random_state(rng: np.random.Generator) -> VehicleState:
    return VehicleState(p=float(rng.uniform(-50, 50)), v=float(rng.uniform(0, 30)), a=float(rng.uniform(-3, 3)))


def _one_predecessor(own: VehicleState, p1: VehicleState) -> float:
    kp, kv, ka, h, d = GAINS.kp, GAINS.kv, GAINS.ka, POLICY.h, POLICY.d
    return -(kp * (own.p - p1.p + h * own.v + d) + kv * (own.v - p1.v) + ka * (own.a - p1.a))


def _two_predecessors(own: VehicleState, p1: VehicleState, p2: VehicleState) -> float:
    kp, kv, ka, h, d = GAINS.kp, GAINS.kv, GAINS.ka, POLICY.h, POLICY.d
    near = kp * (own.p - p1.p + h * own.v + d) + kv * (own.v - p1.v) + ka * (own.a - p1.a)
    far = kp * (own.p - p2.p + h * (own.v + p1.v) + 2 * d) + kv * (own.v - p2.v) + ka * (own.a - p2.a)
    return -(near + far)


def test_general_law_matches_written_out_forms() -> None:
    rng = np.random.default_rng(20240611)
    for _ in range(200):
        own, p1, p2 = (_random_state(rng) for _ in range(3))
        assert mpf_control(GAINS, POLICY, NeighborSnapshot(own, (p1,))) == pytest.approx(
            _one_predecessor(own, p1), abs=1e-12
        )
        assert mpf_control(GAINS, POLICY, NeighborSnapshot(own, (p1, p2))) == pytest.approx(
            _two_predecessors(own, p1, p2), abs=1e-12
        )


def _shifted(st: VehicleState, dp: float, dv: float, da: float, scale: float) -> VehicleState:
    return VehicleState(st.p + scale * dp, st.v + scale * dv, st.a + scale * da)


def test_doubling_every_error_doubles_input() -> None:
    rng = np.random.default_rng(5)
    v = 8.0
    gap = POLICY.h * v + POLICY.d
    base = [VehicleState(p=0.0, v=v), VehicleState(p=gap, v=v), VehicleState(p=2 * gap, v=v)]
    for _ in range(50):
        deltas = rng.uniform(-1, 1, size=(3, 3))

        def u_at(scale: float) -> float:
            own, p1, p2 = (_shifted(st, *deltas[j], scale) for j, st in enumerate(base))
            return mpf_control(GAINS, POLICY, NeighborSnapshot(own, (p1, p2)))

        assert u_at(2.0) == pytest.approx(2.0 * u_at(1.0), abs=1e-12)


def test_uniform_translation_leaves_input_unchanged() -> None:
    rng = np.random.default_rng(9)
    for _ in range(50):
        own, p1, p2 = (_random_state(rng) for _ in range(3))
        c = float(rng.uniform(-100, 100))
        moved = [VehicleState(st.p + c, st.v, st.a) for st in (own, p1, p2)]
        assert mpf_control(GAINS, POLICY, NeighborSnapshot(moved[0], tuple(moved[1:]))) == pytest.approx(
            mpf_control(GAINS, POLICY, NeighborSnapshot(own, (p1, p2))), abs=1e-12
        )
