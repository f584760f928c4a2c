from __future__ import annotations

import pytest

from cacc_app.comms import ChannelParams, DelayedChannel, HistoryBuffer, delay_steps, publish, sample_delayed
from cacc_app.dynamics import VehicleState
from cacc_app.errors import InvalidArgumentError

DT = 0.01
INITIAL = VehicleState(p=-1.0)


def _feed(ch: DelayedChannel, steps: int) -> list[float]:
    """Publish p = k at t = k*dt and sample right after, like the run loop does."""
    seen = []
    for k in range(steps):
        t = k * DT
        ch.publish(t, VehicleState(p=float(k)))
        seen.append(ch.sample(t).p)
    return seen


def test_sample_is_exactly_delay_steps_old() -> None:
    ch = DelayedChannel.open(0, 1, INITIAL, ChannelParams(delta=0.05))
    seen = _feed(ch, 200)
    assert seen[:5] == [-1.0] * 5
    assert seen[5:] == [float(k - 5) for k in range(5, 200)]


def test_zero_delay_returns_current_state() -> None:
    ch = DelayedChannel.open(0, 1, INITIAL, ChannelParams(delta=0.0))
    assert _feed(ch, 10) == [float(k) for k in range(10)]


def test_history_is_pruned() -> None:
    ch = DelayedChannel.open(0, 1, INITIAL, ChannelParams(delta=0.05))
    for k in range(500):
        ch.publish(k * DT, VehicleState(p=float(k)))
        assert len(ch.buffer) <= delay_steps(0.05, DT) + 1


def test_query_before_start_gives_initial_state() -> None:
    buf = HistoryBuffer(INITIAL, 0.05)
    publish(buf, 0.0, VehicleState(p=7.0), ChannelParams(delta=0.05))
    assert sample_delayed(buf, -3.0, 0.05) == INITIAL
    assert sample_delayed(buf, 0.0, 0.05) == INITIAL


def test_out_of_order_publish_rejected() -> None:
    buf = HistoryBuffer(INITIAL, 0.0)
    params = ChannelParams()
    publish(buf, 0.1, VehicleState(), params)
    with pytest.raises(InvalidArgumentError):
        publish(buf, 0.1, VehicleState(), params)
    with pytest.raises(InvalidArgumentError):
        publish(buf, 0.05, VehicleState(), params)


def test_full_loss_holds_initial_state() -> None:
    ch = DelayedChannel.open(0, 1, INITIAL, ChannelParams(delta=0.0, loss_prob=1.0))
    assert _feed(ch, 20) == [-1.0] * 20
    assert (ch.stats.sent, ch.stats.delivered, ch.stats.dropped) == (20, 0, 20)


def test_own_link_never_loses() -> None:
    ch = DelayedChannel.open(2, 2, INITIAL, ChannelParams(delta=0.0, loss_prob=1.0))
    assert _feed(ch, 5) == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert ch.stats.dropped == 0


def _drops(sender: int, receiver: int, seed: int) -> list[float]:
    ch = DelayedChannel.open(sender, receiver, INITIAL, ChannelParams(delta=0.0, loss_prob=0.5, seed=seed))
    return _feed(ch, 300)


def test_loss_is_reproducible_per_link() -> None:
    assert _drops(0, 1, seed=7) == _drops(0, 1, seed=7)
    assert _drops(0, 1, seed=7) != _drops(0, 2, seed=7)
    assert _drops(0, 1, seed=7) != _drops(0, 1, seed=8)


def test_delay_must_be_whole_steps() -> None:
    assert delay_steps(0.05, 0.01) == 5
    assert delay_steps(0.0, 0.01) == 0
    with pytest.raises(InvalidArgumentError):
        delay_steps(0.05, 0.013)


def test_channel_params_validation() -> None:
    with pytest.raises(InvalidArgumentError) as exc:
        ChannelParams(delta=-0.1, loss_prob=1.5)
    assert "delay" in str(exc.value) and "loss" in str(exc.value)


def test_publish_drops_with_params_alone() -> None:
    buf = HistoryBuffer(INITIAL, 0.0)
    params = ChannelParams(loss_prob=1.0, seed=1)
    for k in range(5):
        publish(buf, k * DT, VehicleState(p=float(k)), params)
    assert sample_delayed(buf, 0.04, 0.0) == INITIAL
    assert len(buf) == 1


def test_publish_loss_is_seeded_by_params() -> None:
    def delivered(seed: int) -> list[float]:
        buf = HistoryBuffer(INITIAL, 0.0)
        params = ChannelParams(loss_prob=0.5, seed=seed)
        seen = []
        for k in range(200):
            publish(buf, k * DT, VehicleState(p=float(k)), params)
            seen.append(sample_delayed(buf, k * DT, 0.0).p)
        return seen

    assert delivered(11) == delivered(11)
    assert delivered(11) != delivered(12)
    assert -1.0 < max(delivered(11))
