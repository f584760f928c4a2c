from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import InvalidArgumentError, InvalidStateError

Integrator = Literal["trapezoidal", "exact"]
INTEGRATORS: tuple[str, ...] = ("trapezoidal", "exact")

DEFAULT_DT = 0.01


@dataclass(frozen=True)
class VehicleParams:
    # powertrain lag, s
    tau: float
    # velocity floor, m/s (only with clamping; non-positive means "no reversing")
    v_min: float = 0.0

    def __post_init__(self) -> None:
        bad: list[str] = []
        if not math.isfinite(self.tau) or self.tau <= 0:
            bad.append(f"tau must be > 0, got {self.tau!r}")
        if not math.isfinite(self.v_min):
            bad.append(f"v_min must be finite, got {self.v_min!r}")
        if bad:
            raise InvalidArgumentError("; ".join(bad))

    @property
    def velocity_floor(self) -> float:
        return self.v_min if self.v_min > 0 else 0.0


@dataclass(frozen=True)
class VehicleState:
    p: float = 0.0
    v: float = 0.0
    a: float = 0.0

    def is_finite(self) -> bool:
        return math.isfinite(self.p) and math.isfinite(self.v) and math.isfinite(self.a)


def closed_form_response(state: VehicleState, params: VehicleParams, u: float, t: float) -> VehicleState:
    """
    Аналитическое решение p' = v, v' = a, tau*a' + a = u при постоянном u из `state`.

    При t = dt это точный шаг с удержанием нулевого порядка.
    """
    tau = params.tau
    one_minus_e = -math.expm1(-t / tau)
    da = state.a - u
    return VehicleState(
        p=state.p + state.v * t + 0.5 * u * t * t + da * tau * (t - tau * one_minus_e),
        v=state.v + u * t + da * tau * one_minus_e,
        a=u + da * (1.0 - one_minus_e),
    )


def step_vehicle(
    state: VehicleState,
    params: VehicleParams,
    u: float,
    dt: float,
    clamp: bool = False,
    integrator: Integrator = "trapezoidal",
) -> VehicleState:
    """
    Шаг dt одной машины при команде u, постоянной на шаге.

    Ускорение всегда обновляется точно (экспонента). Интегратор "trapezoidal"
    (по умолчанию) считает v и p трапециями по концам a, затем v;
    "exact" берёт аналитическое решение для всех трёх состояний.
    """
    if not (dt > 0) or not math.isfinite(dt):
        raise InvalidArgumentError(f"dt must be > 0, got {dt!r}")
    if not state.is_finite() or not math.isfinite(u):
        raise InvalidStateError(f"non-finite input: state={state!r}, u={u!r}")

    if integrator == "exact":
        nxt = closed_form_response(state, params, u, dt)
        p2, v2, a2 = nxt.p, nxt.v, nxt.a
    elif integrator == "trapezoidal":
        a2 = u + (state.a - u) * math.exp(-dt / params.tau)
        v2 = state.v + 0.5 * dt * (state.a + a2)
        p2 = state.p + 0.5 * dt * (state.v + v2)
    else:
        raise InvalidArgumentError(f"unknown integrator {integrator!r}; expected one of {INTEGRATORS}")

    if clamp:
        floor = params.velocity_floor
        if v2 < floor:
            v2 = floor
            a2 = max(a2, 0.0)
            # position over the step follows the clamped velocity
            p2 = state.p + 0.5 * dt * (state.v + v2)
    return VehicleState(p2, v2, a2)


def steady_state_accel(u: float) -> float:
    # equilibrium of tau*a' + a = u
    return float(u)
