from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

from .comms import LinkStats
from .scenario import PlatoonMetrics, TrajectoryLog
from .stability import Condition, FrequencyResponse, RegionRow, StabilityReport

LOG = logging.getLogger(__name__)

TRAJECTORY_CSV = "trajectory.csv"
METRICS_CSV = "metrics.csv"
MANIFEST_JSON = "manifest.json"
REPORT_JSON = "stability_report.json"
REPORT_CSV = "stability_report.csv"
FREQ_CSV = "freq_response.csv"
REGION_CSV = "region.csv"

_UNITS = {"p": "m", "v": "m/s", "a": "m/s^2", "u": "m/s^2", "e": "m"}


def _num(x: float) -> str:
    # repr keeps every digit, so reruns are byte-identical and values re-parse exactly
    return repr(float(x))


def _json_num(x: float) -> float | str | None:
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def trajectory_header(n_vehicles: int) -> list[str]:
    header = ["t[s]"]
    for i in range(n_vehicles):
        for name in ("p", "v", "a", "u", "e"):
            if name == "e" and i == 0:
                continue
            header.append(f"{name}_{i}[{_UNITS[name]}]")
    return header


def write_trajectory(log: TrajectoryLog, out_dir: Path) -> Path:
    """
    t, затем p/v/a/u/e по каждой машине (у лидера e нет).
    """
    n = log.n_vehicles

    def rows():
        for k in range(log.n_rows):
            row = [_num(log.t[k])]
            for i in range(n):
                row += [_num(log.p[k, i]), _num(log.v[k, i]), _num(log.a[k, i]), _num(log.u[k, i])]
                if i > 0:
                    row.append(_num(log.e[k, i - 1]))
            yield row

    return _write_rows(out_dir / TRAJECTORY_CSV, trajectory_header(n), rows())


def write_metrics(m: PlatoonMetrics, out_dir: Path) -> Path:
    header = ["vehicle", "peak_abs_error[m]", "t_peak[s]", "rms_error[m]", "final_abs_error[m]", "window_peak[m]", "peak_ratio"]
    rows = []
    for j, f in enumerate(m.followers):
        ratio = _num(m.peak_ratios[j - 1]) if j > 0 else ""
        rows.append(
            [str(f.vehicle), _num(f.peak_abs_error), _num(f.t_peak), _num(f.rms_error), _num(f.final_abs_error), _num(f.window_peak), ratio]
        )
    return _write_rows(out_dir / METRICS_CSV, header, rows)


def write_manifest(
    out_dir: Path,
    *,
    command: str,
    config: Mapping[str, Any],
    overrides: Sequence[str] = (),
    links: LinkStats | None = None,
    extra: Mapping[str, Any] | None = None,
) -> Path:
    data: dict[str, Any] = {
        "command": command,
        "config": dict(config),
        "overrides": list(overrides),
        "seed": config.get("simulation", {}).get("seed"),
    }
    if links is not None:
        data["links"] = asdict(links)
    if extra:
        data.update(extra)
    return _write_json(out_dir / MANIFEST_JSON, data)


def read_manifest(path: Path) -> dict[str, Any]:
    if path.is_dir():
        path = path / MANIFEST_JSON
    return json.loads(path.read_text(encoding="utf-8"))


def _condition_dict(c: Condition, group: str) -> dict[str, Any]:
    return {
        "group": group,
        "name": c.name,
        "expression": c.expression,
        "lhs": _json_num(c.lhs),
        "relation": c.relation,
        "rhs": _json_num(c.rhs),
        "passed": c.passed,
    }


def grouped_conditions(report: StabilityReport) -> list[tuple[str, Condition]]:
    out = [("internal", c) for c in report.internal.conditions]
    out += [("string", c) for c in report.string_conditions.conditions]
    out.append(("headway", report.headway))
    out += [("norm", c) for c in report.norm_checks]
    return out


def report_to_dict(report: StabilityReport) -> dict[str, Any]:
    p = report.params
    return {
        "params": {"tau": p.tau, "h": p.h, "delta": p.delta, "r": p.r, **asdict(p.gains)},
        "internal_ok": report.internal_ok,
        "string_ok": report.string_ok,
        "certified": report.certified,
        "failed": list(report.failed),
        "h_min": _json_num(report.h_min),
        "delay_margin_lhs": _json_num(report.internal.delay_margin_lhs),
        "hinf_norms": [_json_num(x) for x in report.hinf_norms],
        "peak_omegas": [_json_num(x) for x in report.peak_omegas],
        "conditions": [_condition_dict(c, g) for g, c in grouped_conditions(report)],
    }


def write_stability_report(report: StabilityReport, out_dir: Path) -> tuple[Path, Path]:
    js = _write_json(out_dir / REPORT_JSON, report_to_dict(report))
    rows = (
        [g, c.name, c.expression, _num(c.lhs), c.relation, _num(c.rhs), "pass" if c.passed else "FAIL"]
        for g, c in grouped_conditions(report)
    )
    cs = _write_rows(out_dir / REPORT_CSV, ["group", "name", "expression", "lhs", "relation", "rhs", "verdict"], rows)
    return js, cs


def write_freq_response(resp: FrequencyResponse, out_dir: Path) -> Path:
    r = resp.r
    bound = 1.0 / r
    header = ["omega[rad/s]", *(f"|H_{l}|" for l in range(1, r + 1)), "bound"]
    rows = (
        [_num(w), *(_num(resp.magnitudes[l, k]) for l in range(r)), _num(bound)]
        for k, w in enumerate(resp.omegas)
    )
    return _write_rows(out_dir / FREQ_CSV, header, rows)


def write_region(rows: Sequence[RegionRow], names: Sequence[str], out_dir: Path) -> Path:
    header = [*names, "internal_ok", "string_conditions_ok", "h_min", "h_ok", "norm_ok", "certified", "failed"]

    def flag(b: bool | None) -> str:
        return "" if b is None else str(int(b))

    body = (
        [
            *(_num(row.values[n]) for n in names),
            flag(row.internal_ok),
            flag(row.string_conditions_ok),
            _num(row.h_min),
            flag(row.h_ok),
            flag(row.norm_ok),
            flag(row.certified),
            "|".join(row.failed),
        ]
        for row in rows
    )
    path = _write_rows(out_dir / REGION_CSV, header, body)
    LOG.info("wrote %d region rows to %s", len(rows), path)
    return path
