from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

from .dynamics import VehicleState
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SpacingPolicy:
    """Политика постоянного временного интервала: желаемая дистанция h*v + d."""

    h: float
    d: float

    def __post_init__(self) -> None:
        bad: list[str] = []
        if not math.isfinite(self.h) or self.h < 0:
            bad.append(f"headway h must be >= 0, got {self.h!r}")
        if not math.isfinite(self.d) or self.d <= 0:
            bad.append(f"standstill distance d must be > 0, got {self.d!r}")
        if bad:
            raise InvalidArgumentError("; ".join(bad))


@dataclass(frozen=True)
class Gains:
    kp: float
    kv: float
    ka: float

    def __post_init__(self) -> None:
        for name in ("kp", "kv", "ka"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"gain {name} must be finite")


@dataclass(frozen=True)
class Topology:
    """
    Топология MPF: ведомый i слушает r_i = min(i, r_max) машин впереди.
    Машина 0 - лидер, ведомые 1..n.
    """

    n: int
    r_max: int

    def __post_init__(self) -> None:
        bad: list[str] = []
        if self.n < 0:
            bad.append(f"follower count must be >= 0, got {self.n!r}")
        if self.r_max < 1:
            bad.append(f"r_max must be >= 1, got {self.r_max!r}")
        if bad:
            raise InvalidArgumentError("; ".join(bad))

    @property
    def r(self) -> tuple[int, ...]:
        return tuple(self.r_of(i) for i in range(1, self.n + 1))

    def r_of(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise InvalidArgumentError(f"follower index {i} outside 1..{self.n}")
        return min(i, self.r_max)

    def predecessors(self, i: int) -> tuple[int, ...]:
        return tuple(i - l for l in range(1, self.r_of(i) + 1))


@dataclass(frozen=True)
class NeighborSnapshot:
    """
    Задержанные состояния, с которыми работает регулятор ведомого.

    `predecessors[l-1]` - машина i-l; все записи (и своя тоже) сняты в один
    момент `t`.
    """

    own: VehicleState
    predecessors: tuple[VehicleState, ...]
    t: float = 0.0


def desired_gap(policy: SpacingPolicy, l: int, velocities: Sequence[float]) -> float:
    """velocities: v_k для k = i-l+1 .. i, в этом порядке."""
    if l < 1:
        raise InvalidArgumentError(f"predecessor offset must be >= 1, got {l}")
    if len(velocities) != l:
        raise InvalidArgumentError(f"expected {l} velocities, got {len(velocities)}")
    return sum(policy.h * v + policy.d for v in velocities)


def mpf_control(gains: Gains, policy: SpacingPolicy, snapshot: NeighborSnapshot) -> float:
    preds = snapshot.predecessors
    if not preds:
        raise InvalidArgumentError("snapshot has no predecessor entries")
    own = snapshot.own

    # velocities of i-l+1 .. i grow by one vehicle per l
    chain = [own.v]
    u = 0.0
    for l, pred in enumerate(preds, start=1):
        gap = desired_gap(policy, l, chain)
        u -= (
            gains.kp * (own.p - pred.p + gap)
            + gains.kv * (own.v - pred.v)
            + gains.ka * (own.a - pred.a)
        )
        chain.insert(0, pred.v)
    return u


def spacing_error(p_pred: float, p_own: float, v_own: float, policy: SpacingPolicy) -> float:
    # actual gap minus desired gap to the immediate predecessor
    return (p_pred - p_own) - (policy.h * v_own + policy.d)


def constant_accel_offsets(
    gains: Gains, policy: SpacingPolicy, topology: Topology, accel: float
) -> tuple[float, ...]:
    """
    Установившиеся ошибки дистанции, пока вся колонна разгоняется с `accel`.

    При временном интервале каждая дистанция растёт со скоростью h*accel,
    скоростные члены регулятора не обнуляются, и позиционный член
    компенсирует их постоянным смещением.
    """
    if gains.kp <= 0:
        raise InvalidArgumentError("constant-acceleration offsets need kp > 0")
    offsets: list[float] = []
    for i in range(1, topology.n + 1):
        r_i = topology.r_of(i)
        rhs = accel * (1.0 - gains.kv * policy.h * r_i * (r_i + 1) / 2.0) / gains.kp
        for m in range(1, r_i):
            rhs -= (r_i - m) * offsets[i - 1 - m]
        offsets.append(rhs / r_i)
    return tuple(offsets)
