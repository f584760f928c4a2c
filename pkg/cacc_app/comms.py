from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import VehicleState
from .errors import InvalidArgumentError

LOG = logging.getLogger(__name__)

# timestamps are k*dt products; comparisons allow for rounding in t - delta
TIME_EPS = 1e-9


@dataclass(frozen=True)
class ChannelParams:
    delta: float = 0.0
    loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        bad: list[str] = []
        if not math.isfinite(self.delta) or self.delta < 0:
            bad.append(f"delay must be >= 0, got {self.delta!r}")
        if not 0.0 <= self.loss_prob <= 1.0:
            bad.append(f"loss probability must be in [0, 1], got {self.loss_prob!r}")
        if self.seed < 0:
            bad.append(f"seed must be >= 0, got {self.seed!r}")
        if bad:
            raise InvalidArgumentError("; ".join(bad))


def delay_steps(delta: float, dt: float) -> int:
    """Число целых шагов в delta; delta должна быть кратна dt."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt!r}")
    k = round(delta / dt)
    if abs(k * dt - delta) > TIME_EPS * max(1.0, abs(delta)):
        raise InvalidArgumentError(f"delay {delta!r} is not a multiple of dt {dt!r}")
    return int(k)


@dataclass(frozen=True)
class Sample:
    t: float
    state: VehicleState


class HistoryBuffer:
    """
    Отсчёты одной машины в одном канале, от старых к новым.

    Начальное состояние лежит с меткой -inf: любой запрос при t < 0
    (и до первой доставки) возвращает его.
    """

    def __init__(self, initial: VehicleState, delta: float, rng: np.random.Generator | None = None):
        self.delta = float(delta)
        # loss draws for this link; created from ChannelParams.seed on first lossy publish
        self.rng = rng
        self._samples: deque[Sample] = deque([Sample(-math.inf, initial)])
        self.last_publish_t = -math.inf

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._samples)

    @property
    def newest(self) -> Sample:
        return self._samples[-1]

    def _append(self, sample: Sample) -> None:
        self._samples.append(sample)
        # later queries never reach further back than t - delta
        horizon = sample.t - self.delta + TIME_EPS
        while len(self._samples) >= 2 and self._samples[1].t <= horizon:
            self._samples.popleft()


def publish(
    buffer: HistoryBuffer,
    t: float,
    state: VehicleState,
    params: ChannelParams,
    rng: np.random.Generator | None = None,
) -> HistoryBuffer:
    """
    Отправка одного отсчёта. С вероятностью loss_prob он теряется, и приёмник
    держит последний полученный. Возвращает тот же буфер.

    Без явного rng используется собственный поток буфера (seed из params.seed).
    """
    if t <= buffer.last_publish_t + TIME_EPS:
        raise InvalidArgumentError(
            f"out-of-order publish: t={t!r} after t={buffer.last_publish_t!r}"
        )
    buffer.last_publish_t = t
    if params.loss_prob > 0.0:
        if rng is None:
            if buffer.rng is None:
                buffer.rng = np.random.default_rng(np.random.SeedSequence(params.seed))
            rng = buffer.rng
        # always draw, so the stream position depends only on the step count
        if rng.random() < params.loss_prob:
            return buffer
    buffer._append(Sample(t, state))
    return buffer


def sample_delayed(buffer: HistoryBuffer, t: float, delta: float) -> VehicleState:
    """Последний доставленный отсчёт с меткой не позже t - delta (удержание нулевого порядка)."""
    cutoff = t - delta + TIME_EPS
    for s in reversed(buffer._samples):
        if s.t <= cutoff:
            return s.state
    return buffer._samples[0].state


def link_rng(seed: int, sender: int, receiver: int) -> np.random.Generator:
    # independent stream per link, stable when other links are added or removed
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sender, receiver)))


@dataclass
class LinkStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0


@dataclass
class DelayedChannel:
    """
    Канал отправитель -> получатель. Собственный канал (sender == receiver)
    бортовой и без потерь.
    """

    sender: int
    receiver: int
    params: ChannelParams
    buffer: HistoryBuffer
    stats: LinkStats = field(default_factory=LinkStats)

    @classmethod
    def open(cls, sender: int, receiver: int, initial: VehicleState, params: ChannelParams) -> DelayedChannel:
        if sender == receiver:
            params = replace(params, loss_prob=0.0)
        return cls(
            sender=sender,
            receiver=receiver,
            params=params,
            buffer=HistoryBuffer(initial, params.delta, rng=link_rng(params.seed, sender, receiver)),
        )

    def publish(self, t: float, state: VehicleState) -> None:
        before = self.buffer.newest
        publish(self.buffer, t, state, self.params)
        self.stats.sent += 1
        if self.buffer.newest is before:
            self.stats.dropped += 1
        else:
            self.stats.delivered += 1

    def sample(self, t: float) -> VehicleState:
        return sample_delayed(self.buffer, t, self.params.delta)


def total_stats(channels: dict[tuple[int, int], DelayedChannel]) -> LinkStats:
    out = LinkStats()
    for ch in channels.values():
        out.sent += ch.stats.sent
        out.delivered += ch.stats.delivered
        out.dropped += ch.stats.dropped
    return out
