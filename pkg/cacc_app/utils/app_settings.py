from __future__ import annotations

import copy
import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..comms import ChannelParams
from ..control import Gains, SpacingPolicy
from ..dynamics import VehicleParams
from ..errors import ConfigValidationError, InvalidArgumentError
from ..scenario import LeaderProfile, ScenarioConfig, scenario_violations
from ..stability import OMEGA_MAX, OMEGA_MIN, OMEGA_POINTS, default_omega_grid

SCHEMA_VERSION = 1

# section -> key -> (kind, default); defaults are the two-predecessor reference experiment
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "platoon": {"n_followers": ("int", 3), "r_max": ("int", 2)},
    "vehicle": {"tau": ("float", 0.9), "v_min": ("float", 0.0)},
    "spacing": {"h": ("float", 0.78), "d": ("float", 0.6)},
    "gains": {"kp": ("float", 0.1), "kv": ("float", 0.61), "ka": ("float", 0.41)},
    "channel": {"delta": ("float", 0.05), "loss_prob": ("float", 0.0)},
    "leader": {
        "a_step": ("float", 0.1),
        "t_step": ("float", 5.0),
        "a_dist": ("float", 0.25),
        "omega_0": ("float", math.pi),
        "t_dist": ("float", 15.0),
        "a_brake": ("float", -0.2),
        "t_brake": ("float", 40.0),
        "a0": ("float", 0.05),
        "use_a0": ("bool", False),
        "t_cruise": ("float?", None),
    },
    "simulation": {
        "dt": ("float", 0.01),
        "t_end": ("float", 60.0),
        "clamp": ("bool", True),
        "seed": ("int", 0),
        "integrator": ("str", "trapezoidal"),
    },
    "analysis": {
        "omega_min": ("float", OMEGA_MIN),
        "omega_max": ("float", OMEGA_MAX),
        "omega_points": ("int", OMEGA_POINTS),
    },
}

# spelling used in the control-law notation
KEY_ALIASES = {"k_p": "kp", "k_v": "kv", "k_a": "ka", "n": "n_followers", "r": "r_max"}


@dataclass(frozen=True)
class AnalysisSettings:
    omega_min: float = OMEGA_MIN
    omega_max: float = OMEGA_MAX
    omega_points: int = OMEGA_POINTS

    def omega_grid(self):
        return default_omega_grid(self.omega_min, self.omega_max, self.omega_points)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    schema_version: int = SCHEMA_VERSION


def default_config_dict() -> dict[str, Any]:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    for section, keys in SCHEMA.items():
        out[section] = {k: default for k, (_, default) in keys.items()}
    return out


def _coerce(kind: str, value: Any, where: str, bad: list[str]) -> Any:
    if kind == "float?" and value is None:
        return None
    if kind in ("float", "float?"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            bad.append(f"{where}: expected a number, got {value!r}")
            return None
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            bad.append(f"{where}: expected an integer, got {value!r}")
            return None
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            bad.append(f"{where}: expected true/false, got {value!r}")
            return None
        return value
    if not isinstance(value, str):
        bad.append(f"{where}: expected a string, got {value!r}")
        return None
    return value


def _normalize(data: Mapping[str, Any], bad: list[str]) -> dict[str, dict[str, Any]]:
    """Проверка типов по SCHEMA, значения по умолчанию, сбор неизвестных ключей."""
    if not isinstance(data, Mapping):
        bad.append(f"config root must be an object, got {type(data).__name__}")
        return {}
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        bad.append(f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")

    for key in data:
        if key != "schema_version" and key not in SCHEMA:
            bad.append(f"unknown section {key!r}")

    out: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        raw = data.get(section, {})
        if not isinstance(raw, Mapping):
            bad.append(f"{section}: expected an object, got {raw!r}")
            raw = {}
        for key in raw:
            if key not in keys:
                bad.append(f"unknown key {section}.{key}")
        out[section] = {}
        for key, (kind, default) in keys.items():
            value = raw.get(key, default)
            out[section][key] = _coerce(kind, value, f"{section}.{key}", bad)
    return out


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    """
    Разбор конфигурации эксперимента. Все ошибки собираются и выдаются одним
    ConfigValidationError (по требованию: не по одной).
    """
    bad: list[str] = []
    v = _normalize(data, bad)
    if not v:
        raise ConfigValidationError(bad)

    def ready(section: str, *keys: str) -> bool:
        # None means a type error that is already on the list
        values = v[section]
        return all(values[k] is not None for k in (keys or values))

    parts: dict[str, Any] = {}

    def build(name: str, factory, **kw) -> None:
        try:
            parts[name] = factory(**kw)
        except InvalidArgumentError as e:
            bad.append(f"{name}: {e}")

    sim = v["simulation"]
    if ready("vehicle"):
        build("vehicle", VehicleParams, **v["vehicle"])
    if ready("spacing"):
        build("spacing", SpacingPolicy, **v["spacing"])
    if ready("gains"):
        build("gains", Gains, **v["gains"])
    if ready("channel") and ready("simulation", "seed"):
        build("channel", ChannelParams, seed=sim["seed"], **v["channel"])
    if ready("analysis"):
        build("analysis", AnalysisSettings, **v["analysis"])
        if "analysis" in parts:
            try:
                parts["analysis"].omega_grid()
            except InvalidArgumentError as e:
                bad.append(f"analysis: {e}")

    leader = None
    if ready("leader", *(k for k in SCHEMA["leader"] if k != "t_cruise")):
        leader = LeaderProfile(**v["leader"])
        if ready("platoon") and ready("simulation", "dt", "t_end", "integrator") and ready("channel", "delta"):
            bad.extend(
                scenario_violations(
                    n_followers=v["platoon"]["n_followers"],
                    r_max=v["platoon"]["r_max"],
                    delta=v["channel"]["delta"],
                    leader=leader,
                    dt=sim["dt"],
                    t_end=sim["t_end"],
                    integrator=sim["integrator"],
                )
            )
        else:
            bad.extend(leader.violations())

    if bad:
        raise ConfigValidationError(bad)

    scenario = ScenarioConfig(
        n_followers=v["platoon"]["n_followers"],
        r_max=v["platoon"]["r_max"],
        vehicle=parts["vehicle"],
        spacing=parts["spacing"],
        gains=parts["gains"],
        channel=parts["channel"],
        leader=leader,
        dt=sim["dt"],
        t_end=sim["t_end"],
        clamp=sim["clamp"],
        integrator=sim["integrator"],
    )
    return ExperimentConfig(scenario=scenario, analysis=parts["analysis"])



def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    s = cfg.scenario
    lp = s.leader
    return {
        "schema_version": cfg.schema_version,
        "platoon": {"n_followers": s.n_followers, "r_max": s.r_max},
        "vehicle": {"tau": s.vehicle.tau, "v_min": s.vehicle.v_min},
        "spacing": {"h": s.spacing.h, "d": s.spacing.d},
        "gains": {"kp": s.gains.kp, "kv": s.gains.kv, "ka": s.gains.ka},
        "channel": {"delta": s.channel.delta, "loss_prob": s.channel.loss_prob},
        "leader": {
            "a_step": lp.a_step,
            "t_step": lp.t_step,
            "a_dist": lp.a_dist,
            "omega_0": lp.omega_0,
            "t_dist": lp.t_dist,
            "a_brake": lp.a_brake,
            "t_brake": lp.t_brake,
            "a0": lp.a0,
            "use_a0": lp.use_a0,
            "t_cruise": lp.t_cruise,
        },
        "simulation": {
            "dt": s.dt,
            "t_end": s.t_end,
            "clamp": s.clamp,
            "seed": s.seed,
            "integrator": s.integrator,
        },
        "analysis": {
            "omega_min": cfg.analysis.omega_min,
            "omega_max": cfg.analysis.omega_max,
            "omega_points": cfg.analysis.omega_points,
        },
    }


def _resolve_key(key: str) -> tuple[str, str]:
    if "." in key:
        section, leaf = key.split(".", 1)
        leaf = KEY_ALIASES.get(leaf, leaf)
        if section not in SCHEMA or leaf not in SCHEMA[section]:
            raise KeyError(f"unknown key {key!r}")
        return section, leaf
    leaf = KEY_ALIASES.get(key, key)
    hits = [s for s, keys in SCHEMA.items() if leaf in keys]
    if not hits:
        raise KeyError(f"unknown key {key!r}")
    if len(hits) > 1:
        raise KeyError(f"ambiguous key {key!r}: use one of {', '.join(f'{s}.{leaf}' for s in hits)}")
    return hits[0], leaf


def parse_override(item: str) -> tuple[str, str, Any]:
    """'gains.kp=-0.1' / 'kp=-0.1' -> ('gains', 'kp', -0.1). Значение - JSON-литерал или просто строка."""
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ValueError(f"override {item!r} is not KEY=VALUE")
    section, leaf = _resolve_key(key)
    raw = raw.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return section, leaf, value


def apply_overrides(data: Mapping[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    if not isinstance(data, Mapping):
        raise ConfigValidationError([f"config root must be an object, got {type(data).__name__}"])
    out = copy.deepcopy(dict(data))
    bad: list[str] = []
    for item in overrides:
        try:
            section, leaf, value = parse_override(item)
        except (KeyError, ValueError) as e:
            bad.append(str(e.args[0]) if e.args else str(e))
            continue
        sec = out.get(section)
        if not isinstance(sec, dict):
            sec = {} if sec is None else sec
            out[section] = sec
        if isinstance(sec, dict):
            sec[leaf] = value
    if bad:
        raise ConfigValidationError(bad)
    return out


def read_config_dict(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigValidationError([f"config file not found: {path}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"{path}: not valid JSON ({e})"]) from None
    if not isinstance(data, dict):
        raise ConfigValidationError([f"{path}: config root must be an object, got {type(data).__name__}"])
    return data


def load_experiment_config(path: Path, overrides: Iterable[str] = ()) -> tuple[ExperimentConfig, dict[str, Any]]:
    """Проверенная конфигурация и её полный словарь (умолчания + переопределения)."""
    data = apply_overrides(read_config_dict(path), overrides)
    cfg = config_from_dict(data)
    return cfg, config_to_dict(cfg)


def save_experiment_config(cfg: ExperimentConfig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_to_dict(cfg), ensure_ascii=False, indent=2), encoding="utf-8")
