from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .comms import ChannelParams, DelayedChannel, LinkStats, TIME_EPS, delay_steps, total_stats
from .control import Gains, NeighborSnapshot, SpacingPolicy, Topology, mpf_control, spacing_error
from .dynamics import DEFAULT_DT, INTEGRATORS, Integrator, VehicleParams, VehicleState, step_vehicle
from .errors import ConfigValidationError, DivergenceError, InvalidArgumentError
from .stability import PlatoonParams

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class LeaderProfile:
    """
    Команда ускорения лидера (без обратной связи):
    покой -> ступенька -> провал полусинусом -> снова ступенька (или круиз) -> торможение.
    """

    a_step: float = 0.1
    t_step: float = 5.0
    a_dist: float = 0.25
    omega_0: float = math.pi
    t_dist: float = 15.0
    a_brake: float = -0.2
    t_brake: float = 40.0
    # "amplitude of throttle" alternative to a_step
    a0: float = 0.05
    use_a0: bool = False
    # step released from here to t_brake; None keeps accelerating
    t_cruise: float | None = None

    def violations(self) -> list[str]:
        bad: list[str] = []
        numbers = {
            "a_step": self.a_step, "t_step": self.t_step, "a_dist": self.a_dist,
            "omega_0": self.omega_0, "t_dist": self.t_dist, "a_brake": self.a_brake,
            "t_brake": self.t_brake, "a0": self.a0,
        }
        for name, value in numbers.items():
            if not math.isfinite(value):
                bad.append(f"leader.{name} must be finite, got {value!r}")
        if bad:
            return bad
        if self.omega_0 <= 0:
            bad.append(f"leader.omega_0 must be > 0, got {self.omega_0!r}")
        if not self.t_step < self.t_dist < self.t_brake:
            bad.append(
                f"leader times must satisfy t_step < t_dist < t_brake, got "
                f"{self.t_step!r}, {self.t_dist!r}, {self.t_brake!r}"
            )
        elif self.omega_0 > 0 and self.disturbance_end > self.t_brake:
            bad.append(f"disturbance half-cycle ends at {self.disturbance_end!r}, after t_brake")
        if self.t_cruise is not None:
            if not math.isfinite(self.t_cruise):
                bad.append(f"leader.t_cruise must be finite, got {self.t_cruise!r}")
            elif self.omega_0 > 0 and not self.disturbance_end <= self.t_cruise < self.t_brake:
                bad.append(
                    f"leader.t_cruise must lie in [end of disturbance, t_brake), got {self.t_cruise!r}"
                )
        return bad

    @property
    def step_amplitude(self) -> float:
        return self.a0 if self.use_a0 else self.a_step

    @property
    def disturbance_end(self) -> float:
        return self.t_dist + math.pi / self.omega_0


def leader_input(profile: LeaderProfile, t: float) -> float:
    amp = profile.step_amplitude
    if t < profile.t_step:
        return 0.0
    if t < profile.t_dist:
        return amp
    if t < profile.disturbance_end:
        return amp + profile.a_dist * math.sin(profile.omega_0 * (t - profile.t_dist) + math.pi)
    if t < profile.t_brake:
        if profile.t_cruise is not None and t >= profile.t_cruise:
            return 0.0
        return amp
    return profile.a_brake


def scenario_violations(
    *,
    n_followers: int,
    r_max: int,
    delta: float,
    leader: LeaderProfile,
    dt: float,
    t_end: float,
    integrator: str,
) -> list[str]:
    """Перекрёстные проверки запуска; проверки отдельных типов живут в самих типах."""
    bad: list[str] = []
    if n_followers < 0:
        bad.append(f"platoon.n_followers must be >= 0, got {n_followers!r}")
    if r_max < 1:
        bad.append(f"platoon.r_max must be >= 1, got {r_max!r}")
    bad.extend(leader.violations())
    if integrator not in INTEGRATORS:
        bad.append(f"simulation.integrator must be one of {INTEGRATORS}, got {integrator!r}")
    if not math.isfinite(dt) or dt <= 0:
        bad.append(f"simulation.dt must be > 0, got {dt!r}")
    elif math.isfinite(delta) and delta >= 0:
        try:
            delay_steps(delta, dt)
        except InvalidArgumentError:
            bad.append(f"simulation.dt={dt!r} must divide channel.delta={delta!r}")
    if not math.isfinite(t_end) or not t_end > leader.t_brake:
        bad.append(f"simulation.t_end must be > leader.t_brake, got {t_end!r}")
    return bad


@dataclass(frozen=True)
class ScenarioConfig:
    n_followers: int = 3
    r_max: int = 2
    vehicle: VehicleParams = field(default_factory=lambda: VehicleParams(tau=0.9))
    spacing: SpacingPolicy = field(default_factory=lambda: SpacingPolicy(h=0.78, d=0.6))
    gains: Gains = field(default_factory=lambda: Gains(kp=0.1, kv=0.61, ka=0.41))
    channel: ChannelParams = field(default_factory=lambda: ChannelParams(delta=0.05))
    leader: LeaderProfile = field(default_factory=LeaderProfile)
    dt: float = DEFAULT_DT
    t_end: float = 60.0
    clamp: bool = True
    integrator: Integrator = "trapezoidal"

    def __post_init__(self) -> None:
        bad = self.violations()
        if bad:
            raise ConfigValidationError(bad)

    def violations(self) -> list[str]:
        return scenario_violations(
            n_followers=self.n_followers,
            r_max=self.r_max,
            delta=self.channel.delta,
            leader=self.leader,
            dt=self.dt,
            t_end=self.t_end,
            integrator=self.integrator,
        )

    @property
    def seed(self) -> int:
        return self.channel.seed

    @property
    def topology(self) -> Topology:
        return Topology(self.n_followers, self.r_max)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def platoon_params(self) -> PlatoonParams:
        return PlatoonParams(
            tau=self.vehicle.tau,
            h=self.spacing.h,
            delta=self.channel.delta,
            r=self.r_max,
            gains=self.gains,
        )


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """
    Строка на шаг k (t = k*dt, k = 0..N). Столбцы p, v, a, u - машины 0..n,
    столбцы e - ведомые 1..n (ошибка дистанции до машины впереди).
    """

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray
    e: np.ndarray
    window: tuple[float, float] = (0.0, math.inf)
    links: LinkStats = field(default_factory=LinkStats)

    @property
    def n_vehicles(self) -> int:
        return int(self.p.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.t.shape[0])


def init_platoon(
    config: ScenarioConfig,
) -> tuple[list[VehicleState], dict[tuple[int, int], DelayedChannel]]:
    """
    Всё стоит: лидер в p=0, ведомый i в p = -i*d (нулевая ошибка дистанции).
    Каналы (включая собственный канал каждого ведомого) заполнены начальным состоянием.
    """
    d = config.spacing.d
    states = [VehicleState(p=-i * d) for i in range(config.n_followers + 1)]
    channels: dict[tuple[int, int], DelayedChannel] = {}
    topo = config.topology
    for i in range(1, config.n_followers + 1):
        for sender in (i, *topo.predecessors(i)):
            channels[(sender, i)] = DelayedChannel.open(sender, i, states[sender], config.channel)
    return states, channels


def run(config: ScenarioConfig) -> TrajectoryLog:
    """
    Замкнутый контур с задержкой, постоянный шаг. На каждом шаге каналы
    публикуют текущие состояния, управления считаются по задержанным
    отсчётам, затем все машины интегрируются одновременно.
    """
    states, channels = init_platoon(config)
    topo = config.topology
    n_veh = config.n_followers + 1
    n_rows = config.n_steps + 1
    dt = config.dt
    if config.channel.loss_prob > 0:
        LOG.warning("lossy channel (loss_prob=%s): results are exploratory, not certified", config.channel.loss_prob)

    cols = {name: np.zeros((n_rows, n_veh)) for name in ("p", "v", "a", "u")}
    errs = np.zeros((n_rows, config.n_followers))
    times = np.arange(n_rows) * dt
    senders = {i: topo.predecessors(i) for i in range(1, n_veh)}

    for k in range(n_rows):
        t = float(times[k])
        for (sender, _), ch in channels.items():
            ch.publish(t, states[sender])

        u = [leader_input(config.leader, t)]
        for i in range(1, n_veh):
            own = channels[(i, i)].sample(t)
            preds = tuple(channels[(j, i)].sample(t) for j in senders[i])
            u.append(mpf_control(config.gains, config.spacing, NeighborSnapshot(own, preds, t - config.channel.delta)))

        for i, st in enumerate(states):
            cols["p"][k, i] = st.p
            cols["v"][k, i] = st.v
            cols["a"][k, i] = st.a
            cols["u"][k, i] = u[i]
            if i > 0:
                errs[k, i - 1] = spacing_error(states[i - 1].p, st.p, st.v, config.spacing)
            if not math.isfinite(u[i]):
                raise DivergenceError(k, t, i)

        if k == n_rows - 1:
            break
        braking = t >= config.leader.t_brake - TIME_EPS
        nxt = []
        for i, st in enumerate(states):
            # the leader never reverses once braking has started
            clamp = config.clamp or (i == 0 and braking)
            new = step_vehicle(st, config.vehicle, u[i], dt, clamp=clamp, integrator=config.integrator)
            if not new.is_finite():
                raise DivergenceError(k + 1, t + dt, i)
            nxt.append(new)
        states = nxt

    links = total_stats(channels)
    LOG.info(
        "run finished: %d steps, %d vehicles, %d/%d messages delivered",
        n_rows - 1, n_veh, links.delivered, links.sent,
    )
    return TrajectoryLog(
        t=times,
        p=cols["p"],
        v=cols["v"],
        a=cols["a"],
        u=cols["u"],
        e=errs,
        window=(config.leader.t_dist, config.leader.t_brake),
        links=links,
    )


@dataclass(frozen=True)
class FollowerMetrics:
    vehicle: int
    peak_abs_error: float
    t_peak: float
    rms_error: float
    final_abs_error: float
    window_peak: float


@dataclass(frozen=True)
class PlatoonMetrics:
    followers: tuple[FollowerMetrics, ...]
    # window_peak of follower i+1 over follower i, i = 1..n-1
    peak_ratios: tuple[float, ...]


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def metrics(log: TrajectoryLog) -> PlatoonMetrics:
    if log.n_rows == 0:
        raise InvalidArgumentError("empty trajectory log")
    t0, t1 = log.window
    in_window = (log.t >= t0 - TIME_EPS) & (log.t < t1 - TIME_EPS)
    if not in_window.any():
        in_window = np.ones_like(log.t, dtype=bool)

    followers = []
    for j in range(log.e.shape[1]):
        col = np.abs(log.e[:, j])
        k = int(np.argmax(col))
        followers.append(
            FollowerMetrics(
                vehicle=j + 1,
                peak_abs_error=float(col[k]),
                t_peak=float(log.t[k]),
                rms_error=float(np.sqrt(np.mean(log.e[:, j] ** 2))),
                final_abs_error=float(col[-1]),
                window_peak=float(col[in_window].max()),
            )
        )
    ratios = tuple(
        _ratio(followers[j + 1].window_peak, followers[j].window_peak) for j in range(len(followers) - 1)
    )
    return PlatoonMetrics(tuple(followers), ratios)
