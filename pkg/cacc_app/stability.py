from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .control import Gains
from .errors import BudgetExceededError, InvalidArgumentError

LOG = logging.getLogger(__name__)

# |expr| below this counts as zero for the "must not vanish" gain condition
NONZERO_TOL = 1e-9
# slack on sup|H_l| <= 1/r; the supremum is attained at w = 0 for certified gains
NORM_TOL = 1e-9
SWEEP_BUDGET = 10**7

OMEGA_MIN = 1e-3
OMEGA_MAX = 1e3
OMEGA_POINTS = 2000


@dataclass(frozen=True)
class PlatoonParams:
    """Однородная колонна: у всех ведомых общие tau, h, r и коэффициенты."""

    tau: float
    h: float
    delta: float
    r: int
    gains: Gains

    def __post_init__(self) -> None:
        bad: list[str] = []
        if not math.isfinite(self.tau) or self.tau <= 0:
            bad.append(f"tau must be > 0, got {self.tau!r}")
        if not math.isfinite(self.h) or self.h < 0:
            bad.append(f"h must be >= 0, got {self.h!r}")
        if not math.isfinite(self.delta) or self.delta < 0:
            bad.append(f"delta must be >= 0, got {self.delta!r}")
        if self.r < 1:
            bad.append(f"r must be >= 1, got {self.r!r}")
        if bad:
            raise InvalidArgumentError("; ".join(bad))

    @property
    def velocity_gain(self) -> float:
        # k_v + k_p*h shows up in nearly every condition
        return self.gains.kv + self.gains.kp * self.h


@dataclass(frozen=True)
class Condition:
    name: str
    expression: str
    lhs: float
    relation: str
    rhs: float
    passed: bool


def _cond(name: str, expression: str, lhs: float, relation: str, rhs: float) -> Condition:
    if relation == ">":
        ok = lhs > rhs
    elif relation == ">=":
        ok = lhs >= rhs
    elif relation == "<":
        ok = lhs < rhs
    elif relation == "<=":
        ok = lhs <= rhs
    elif relation == "!=":
        ok = abs(lhs - rhs) > NONZERO_TOL
    else:
        raise InvalidArgumentError(f"unknown relation {relation!r}")
    return Condition(name, expression, float(lhs), relation, float(rhs), bool(ok))


@dataclass(frozen=True)
class Verdict:
    conditions: tuple[Condition, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.conditions if not c.passed)

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class InternalVerdict(Verdict):
    delay_margin_lhs: float = 0.0


def check_internal(params: PlatoonParams) -> InternalVerdict:
    """
    Достаточные условия внутренней устойчивости и запас по задержке
    Delta*r*(k_v + k_p*h) < 1, при котором они верны для заданной задержки.
    """
    g = params.gains
    tau = params.tau
    kvh = params.velocity_gain
    margin = params.delta * params.r * kvh
    return InternalVerdict(
        conditions=(
            _cond("kp_positive", "k_p > 0", g.kp, ">", 0.0),
            _cond("ka_positive", "k_a > 0", g.ka, ">", 0.0),
            _cond("nonsingular", "k_p - tau(k_v + k_p h) + tau^2 k_p != 0", g.kp - tau * kvh + tau * tau * g.kp, "!=", 0.0),
            _cond("velocity_dominance", "k_v + k_p h >= k_p tau", kvh, ">=", g.kp * tau),
            _cond("delay_margin", "Delta r (k_v + k_p h) < 1", margin, "<", 1.0),
        ),
        delay_margin_lhs=margin,
    )


def check_string_conditions(params: PlatoonParams) -> Verdict:
    g = params.gains
    tau, h, dl, r = params.tau, params.h, params.delta, params.r
    kvh = params.velocity_gain
    conds = [
        _cond("damping_margin", "k_v + k_p(h - tau) >= 0", g.kv + g.kp * (h - tau), ">=", 0.0),
        _cond("headway_delay", "2 tau Delta - Delta h - tau h <= 0", 2 * tau * dl - dl * h - tau * h, "<=", 0.0),
        _cond("accel_gain_bound", "k_a - tau(k_v + k_p h) <= 0", g.ka - tau * kvh, "<=", 0.0),
        _cond("delay_accel", "tau - 2 r k_a Delta >= 0", tau - 2 * r * g.ka * dl, ">=", 0.0),
        _cond(
            "combined_margin",
            "1 + 2r(k_a - tau(k_v + k_p h)) + 2r Delta(k_p(tau - h) - k_v) >= 0",
            1 + 2 * r * (g.ka - tau * kvh) + 2 * r * dl * (g.kp * (tau - h) - g.kv),
            ">=",
            0.0,
        ),
    ]
    for l in range(1, r + 1):
        lhs = (
            r * r * g.kp**2 * h * h * (1 - (r - l) ** 2)
            + 2 * r * r * g.kp * g.kv * h * (1 + r - l)
            - 2 * r * g.kp
        )
        conds.append(
            _cond(
                f"chain_l{l}",
                f"r^2 k_p^2 h^2 (1-(r-l)^2) + 2 r^2 k_p k_v h (1+r-l) - 2 r k_p >= 0, l={l}",
                lhs,
                ">=",
                0.0,
            )
        )
    return Verdict(tuple(conds))


def min_headway(tau: float, delta: float, r: int, ka: float) -> float:
    den = 2 * r * ka + 1
    if not den > 0:
        raise InvalidArgumentError(f"2 r k_a + 1 must be > 0, got {den!r}")
    return 2 * (tau + delta) / den


def _check_l(params: PlatoonParams, l: int) -> None:
    if not 1 <= l <= params.r:
        raise InvalidArgumentError(f"l must be in 1..{params.r}, got {l}")


def transfer_magnitude(params: PlatoonParams, l: int, omega):
    """
    |H_l(jw)| - усиление от движения машины i-l к машине i.

    Принимает скаляр или массив частот. Из-за задержки H не рациональна,
    поэтому считается поточечно в комплексной арифметике.
    """
    _check_l(params, l)
    g = params.gains
    w = np.asarray(omega, dtype=float)
    s = 1j * w
    delay = np.exp(-params.delta * s)
    num = delay * (g.ka * s**2 + (g.kv - g.kp * params.h * (params.r - l)) * s + g.kp)
    den = params.tau * s**3 + s**2 + params.r * delay * (g.ka * s**2 + params.velocity_gain * s + g.kp)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.abs(num) / np.abs(den)
    return float(mag) if mag.ndim == 0 else mag


def default_omega_grid(
    omega_min: float = OMEGA_MIN, omega_max: float = OMEGA_MAX, points: int = OMEGA_POINTS
) -> np.ndarray:
    """w = 0, затем логарифмическая сетка на [omega_min, omega_max]."""
    if not (0 < omega_min < omega_max) or points < 2:
        raise InvalidArgumentError(
            f"bad frequency grid: omega_min={omega_min!r}, omega_max={omega_max!r}, points={points!r}"
        )
    return np.concatenate(([0.0], np.logspace(math.log10(omega_min), math.log10(omega_max), points)))


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    omegas: np.ndarray
    # magnitudes[l-1, k] = |H_l(j omegas[k])|
    magnitudes: np.ndarray

    @property
    def r(self) -> int:
        return int(self.magnitudes.shape[0])


def frequency_response(params: PlatoonParams, omegas: Sequence[float] | np.ndarray | None = None) -> FrequencyResponse:
    w = default_omega_grid() if omegas is None else np.asarray(omegas, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidArgumentError("frequency grid must be a non-empty 1-D sequence")
    if np.any(np.diff(w) <= 0) or np.any(w < 0):
        raise InvalidArgumentError("frequency grid must be non-negative and strictly increasing")
    mags = np.vstack([transfer_magnitude(params, l, w) for l in range(1, params.r + 1)])
    return FrequencyResponse(omegas=w, magnitudes=mags)


def hinf_peak(params: PlatoonParams, l: int, omegas: np.ndarray | None = None) -> tuple[float, float]:
    """
    (sup |H_l(jw)|, w в точке супремума): плотная сетка, затем золотое сечение
    вокруг максимума сетки, если это внутренний пик.
    """
    _check_l(params, l)
    grid = default_omega_grid() if omegas is None else np.asarray(omegas, dtype=float)
    mags = transfer_magnitude(params, l, grid)
    if np.all(np.isnan(mags)):
        return math.nan, math.nan
    k = int(np.nanargmax(mags))
    best, best_w = float(mags[k]), float(grid[k])

    if 0 < k < grid.size - 1 and mags[k] > mags[k - 1] and mags[k] > mags[k + 1]:
        try:
            res = minimize_scalar(
                lambda w: -transfer_magnitude(params, l, w),
                bracket=(grid[k - 1], grid[k], grid[k + 1]),
                method="golden",
                options={"xtol": 1e-6},
            )
        except ValueError as e:
            LOG.debug("golden refinement skipped for l=%d: %s", l, e)
        else:
            if -res.fun > best:
                best, best_w = float(-res.fun), float(res.x)
    return best, best_w


def hinf_norm(params: PlatoonParams, l: int, omegas: np.ndarray | None = None) -> float:
    if not check_internal(params).ok:
        LOG.warning("H-infinity norm requested for parameters that fail internal stability: %s", params)
    return hinf_peak(params, l, omegas)[0]


@dataclass(frozen=True)
class StabilityReport:
    params: PlatoonParams
    internal: InternalVerdict
    string_conditions: Verdict
    h_min: float
    headway: Condition
    norm_checks: tuple[Condition, ...]
    hinf_norms: tuple[float, ...]
    peak_omegas: tuple[float, ...] = field(default=())

    @property
    def internal_ok(self) -> bool:
        return self.internal.ok

    @property
    def string_ok(self) -> bool:
        return (
            self.internal_ok
            and self.string_conditions.ok
            and self.headway.passed
            and all(c.passed for c in self.norm_checks)
        )

    @property
    def certified(self) -> bool:
        return self.internal_ok and self.string_ok

    @property
    def failed(self) -> tuple[str, ...]:
        names = list(self.internal.failed) + list(self.string_conditions.failed)
        if not self.headway.passed:
            names.append(self.headway.name)
        names.extend(c.name for c in self.norm_checks if not c.passed)
        return tuple(names)


def analyze(params: PlatoonParams, omegas: np.ndarray | None = None) -> StabilityReport:
    internal = check_internal(params)
    string_conditions = check_string_conditions(params)
    try:
        h_min = min_headway(params.tau, params.delta, params.r, params.gains.ka)
    except InvalidArgumentError:
        h_min = math.nan
    headway = _cond("min_headway", "h >= 2(tau + Delta) / (2 r k_a + 1)", params.h, ">=", h_min)

    bound = 1.0 / params.r
    norms: list[float] = []
    peaks: list[float] = []
    checks: list[Condition] = []
    for l in range(1, params.r + 1):
        norm, w = hinf_peak(params, l, omegas)
        norms.append(norm)
        peaks.append(w)
        checks.append(_cond(f"hinf_l{l}", f"sup |H_{l}(jw)| <= 1/r, l={l}", norm, "<=", bound + NORM_TOL))
    return StabilityReport(
        params=params,
        internal=internal,
        string_conditions=string_conditions,
        h_min=h_min,
        headway=headway,
        norm_checks=tuple(checks),
        hinf_norms=tuple(norms),
        peak_omegas=tuple(peaks),
    )


# ------------------------------ gain-region sweep ------------------------------

SWEEP_PARAMS: tuple[str, ...] = ("kp", "kv", "ka", "tau", "h", "delta", "r")


@dataclass(frozen=True)
class RegionRow:
    values: dict[str, float]
    internal_ok: bool
    string_conditions_ok: bool
    h_min: float
    h_ok: bool
    norm_ok: bool | None
    failed: tuple[str, ...]

    @property
    def certified(self) -> bool:
        return self.internal_ok and self.string_conditions_ok and self.h_ok


def _with_values(fixed: PlatoonParams, values: Mapping[str, float]) -> PlatoonParams:
    gains = replace(
        fixed.gains,
        **{k: float(v) for k, v in values.items() if k in ("kp", "kv", "ka")},
    )
    rest: dict[str, float | int] = {}
    for k, v in values.items():
        if k == "r":
            rest["r"] = int(v)
        elif k in ("tau", "h", "delta"):
            rest[k] = float(v)
    return replace(fixed, gains=gains, **rest)


def _evaluate_point(job: tuple[PlatoonParams, tuple[str, ...], tuple[float, ...], bool]) -> RegionRow:
    fixed, names, point, with_norm = job
    values = dict(zip(names, point))
    try:
        params = _with_values(fixed, values)
    except InvalidArgumentError:
        return RegionRow(values, False, False, math.nan, False, False if with_norm else None, ("invalid",))

    internal = check_internal(params)
    conds = check_string_conditions(params)
    try:
        h_min = min_headway(params.tau, params.delta, params.r, params.gains.ka)
    except InvalidArgumentError:
        h_min = math.nan
    h_ok = params.h >= h_min
    failed = list(internal.failed) + list(conds.failed)
    if not h_ok:
        failed.append("min_headway")

    norm_ok: bool | None = None
    if with_norm:
        bound = 1.0 / params.r + NORM_TOL
        norm_ok = all(hinf_peak(params, l)[0] <= bound for l in range(1, params.r + 1))
        if not norm_ok:
            failed.append("hinf")
    return RegionRow(values, internal.ok, conds.ok, h_min, h_ok, norm_ok, tuple(failed))


def sweep_gain_region(
    ranges: Mapping[str, Sequence[float]],
    fixed: PlatoonParams,
    *,
    with_norm: bool = False,
    budget: int = SWEEP_BUDGET,
    workers: int = 1,
) -> list[RegionRow]:
    """
    Классификация каждой точки декартовой сетки `ranges` (прочие параметры из
    `fixed`). Строки идут в порядке сетки (быстрее всех меняется последний
    параметр), и при нескольких процессах тоже.
    """
    unknown = sorted(set(ranges) - set(SWEEP_PARAMS))
    if unknown:
        raise InvalidArgumentError(f"unknown sweep parameters: {', '.join(unknown)}")
    sizes = {k: len(v) for k, v in ranges.items()}
    empty = [k for k, n in sizes.items() if n == 0]
    if empty:
        raise InvalidArgumentError(f"empty grid for: {', '.join(empty)}")
    points = math.prod(sizes.values())
    if points > budget:
        raise BudgetExceededError(points, budget, sizes)

    names = tuple(ranges)
    jobs = ((fixed, names, tuple(p), with_norm) for p in itertools.product(*(ranges[n] for n in names)))
    LOG.info("sweeping %d grid points over %s (workers=%d)", points, ", ".join(names) or "-", workers)
    if workers > 1 and points > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_point, jobs, chunksize=max(1, points // (workers * 8))))
    else:
        rows = [_evaluate_point(j) for j in jobs]
    LOG.debug("sweep done: %d certified of %d", sum(r.certified for r in rows), len(rows))
    return rows
