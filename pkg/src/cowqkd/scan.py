"""Parameter scans, threshold search, and result serialization."""

from __future__ import annotations

import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TextIO

from .finite_key import AnalysisConfig, KeyRateResult, evaluate_analytic_point, evaluate_record
from .gains import analytic_gains, qber
from .params import SystemParams
from .simulator import SimConfig, replay_counts, simulate_session

__all__ = [
    "SCAN_VARIABLES",
    "SCAN_MODES",
    "ScanSpec",
    "ScanRow",
    "NoThresholdError",
    "run_scan",
    "scan_values",
    "find_threshold",
    "emit",
]

SCAN_VARIABLES = ("length_km", "detector_efficiency", "dead_time", "mu")
SCAN_MODES = ("analytic", "simulate", "replay")

CSV_HEADER = "variable,qber,phase_error_upper,key_bits,key_rate_bps,aborted,reason"


@dataclass(frozen=True)
class ScanSpec:
    """One scan: which parameter moves, over what grid, evaluated how."""

    variable: str
    start: float
    stop: float
    step: float
    mode: str = "analytic"
    sim_seed: int = 1
    sim_rounds: int = 1_000_000
    replay_path: str | None = None

    def __post_init__(self) -> None:
        if self.variable not in SCAN_VARIABLES:
            raise ValueError(
                f"unknown scan variable {self.variable!r}, expected one of {SCAN_VARIABLES}"
            )
        if self.mode not in SCAN_MODES:
            raise ValueError(f"unknown scan mode {self.mode!r}, expected one of {SCAN_MODES}")
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.stop < self.start:
            raise ValueError(f"stop {self.stop} is below start {self.start}")
        if self.mode == "replay" and not self.replay_path:
            raise ValueError("replay mode requires replay_path")


@dataclass(frozen=True)
class ScanRow:
    value: float
    qber: float
    phase_error_upper: float
    key_bits: float
    key_rate_bps: float
    aborted: bool
    reason: str | None


class NoThresholdError(RuntimeError):
    """The target level is never crossed inside the bracket."""


def with_variable(params: SystemParams, variable: str, value: float) -> SystemParams:
    """A copy of params with one scan variable replaced."""
    if variable == "length_km":
        return dataclasses.replace(
            params, channel=dataclasses.replace(params.channel, length_km=value)
        )
    if variable == "detector_efficiency":
        return dataclasses.replace(
            params, detectors=dataclasses.replace(params.detectors, efficiency=value)
        )
    if variable == "dead_time":
        return dataclasses.replace(
            params, detectors=dataclasses.replace(params.detectors, dead_time_s=value)
        )
    if variable == "mu":
        return dataclasses.replace(
            params, source=dataclasses.replace(params.source, mu=value)
        )
    raise ValueError(f"unknown scan variable {variable!r}")


def scan_values(spec: ScanSpec) -> list[float]:
    """Grid points start, start+step, ... up to and including stop.

    The count is derived once from the span so accumulated float error
    cannot drop or duplicate the final point.
    """
    n_steps = int(round((spec.stop - spec.start) / spec.step))
    if abs(spec.start + n_steps * spec.step - spec.stop) > 1e-9 * max(1.0, abs(spec.stop)):
        n_steps = int(math.floor((spec.stop - spec.start) / spec.step + 1e-12))
    return [spec.start + i * spec.step for i in range(n_steps + 1)]


def _evaluate(
    point: SystemParams, spec: ScanSpec, analysis: AnalysisConfig
) -> KeyRateResult:
    if spec.mode == "analytic":
        return evaluate_analytic_point(point, analysis)
    if spec.mode == "simulate":
        record = simulate_session(point, SimConfig(seed=spec.sim_seed, rounds=spec.sim_rounds))
        return evaluate_record(record, point, analysis)
    record = replay_counts(spec.replay_path)
    return evaluate_record(record, point, analysis)


def _row_from_result(value: float, result: KeyRateResult, params: SystemParams) -> ScanRow:
    return ScanRow(
        value=value,
        qber=result.qber,
        phase_error_upper=result.phase_error_observed_upper,
        key_bits=float(result.key_length_bits),
        key_rate_bps=result.key_length_bits / params.block_duration_s(),
        aborted=result.aborted,
        reason=result.abort_reason,
    )


def run_scan(
    spec: ScanSpec,
    params: SystemParams,
    analysis: AnalysisConfig | None = None,
) -> list[ScanRow]:
    """Evaluate the grid; a failing point becomes an aborted NaN row.

    Per-point errors are captured rather than raised so one bad point
    cannot lose the rest of a long sweep.
    """
    analysis = analysis or AnalysisConfig()
    rows: list[ScanRow] = []
    for value in scan_values(spec):
        point = with_variable(params, spec.variable, value)
        try:
            result = _evaluate(point, spec, analysis)
            rows.append(_row_from_result(value, result, point))
        except Exception as exc:
            rows.append(
                ScanRow(
                    value=value,
                    qber=math.nan,
                    phase_error_upper=math.nan,
                    key_bits=math.nan,
                    key_rate_bps=math.nan,
                    aborted=True,
                    reason=f"error: {exc}",
                )
            )
    return rows


def _qber_at(params: SystemParams) -> float:
    return qber(analytic_gains(params))


def _key_length_at(params: SystemParams, analysis: AnalysisConfig) -> float:
    result = evaluate_analytic_point(params, analysis)
    return float(result.key_length_bits)


def find_threshold(
    metric: str,
    target: float,
    bracket: tuple[float, float],
    params: SystemParams,
    analysis: AnalysisConfig | None = None,
    variable: str = "length_km",
) -> float:
    """Bisect for where a metric crosses a level along one scan variable.

    For "qber" the crossing is where the error rate first exceeds target;
    for "key_length" it is where the extractable bits fall to target or
    below.  Both metrics are monotone in channel length, the intended use.
    Raises NoThresholdError when the bracket does not straddle the level.
    """
    analysis = analysis or AnalysisConfig()
    if metric == "qber":
        predicate: Callable[[SystemParams], bool] = lambda p: _qber_at(p) > target
    elif metric == "key_length":
        predicate = lambda p: _key_length_at(p, analysis) <= target
    else:
        raise ValueError(f"unknown threshold metric {metric!r}")

    lo, hi = bracket
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got {bracket}")
    at = lambda v: predicate(with_variable(params, variable, v))
    if at(lo):
        raise NoThresholdError(
            f"{metric} already past target {target} at bracket start {lo}"
        )
    if not at(hi):
        raise NoThresholdError(f"{metric} never reaches target {target} by bracket end {hi}")
    tol = 0.01 if variable == "length_km" else 1e-4 * (hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if at(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return repr(x)


def _rows_as_dicts(rows: Sequence[ScanRow]) -> list[dict]:
    out = []
    for row in rows:
        out.append(
            {
                "variable": row.value,
                "qber": None if math.isnan(row.qber) else row.qber,
                "phase_error_upper": None
                if math.isnan(row.phase_error_upper)
                else row.phase_error_upper,
                "key_bits": None if math.isnan(row.key_bits) else row.key_bits,
                "key_rate_bps": None if math.isnan(row.key_rate_bps) else row.key_rate_bps,
                "aborted": row.aborted,
                "reason": row.reason,
            }
        )
    return out


def emit(rows: Sequence[ScanRow], format: str = "csv", destination: str | Path = "-") -> str:
    """Serialize rows to CSV or JSON, byte-stable for identical inputs.

    destination "-" writes to stdout; anything else is a file path.
    Returns the serialized text either way.
    """
    if format == "csv":
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for row in rows:
            reason = row.reason or ""
            if any(c in reason for c in ',"\n'):
                reason = '"' + reason.replace('"', '""') + '"'
            buf.write(
                ",".join(
                    (
                        _format_float(row.value),
                        _format_float(row.qber),
                        _format_float(row.phase_error_upper),
                        _format_float(row.key_bits),
                        _format_float(row.key_rate_bps),
                        "true" if row.aborted else "false",
                        reason,
                    )
                )
                + "\n"
            )
        text = buf.getvalue()
    elif format == "json":
        text = json.dumps(_rows_as_dicts(rows), indent=2, allow_nan=False) + "\n"
    else:
        raise ValueError(f"unknown output format {format!r}")

    if destination == "-":
        _stdout().write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")
    return text


def _stdout() -> TextIO:
    return sys.stdout
