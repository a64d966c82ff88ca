"""Command-line front end.

Subcommands map to the four workflows the package supports: parameter
sweeps (scan), bisection threshold finding (threshold), Monte-Carlo count
generation (simulate), replaying a count log through the finite-key pipeline
(analyze), and configuration checking (validate).

All parameters load from a flat text configuration of dotted keys, for
example "channel.length_km = 100".  Key ordering is free, unknown keys are
rejected, and --set overrides take precedence over the file.  Exit codes:
0 success, 1 configuration or validation error, 2 runtime error, 3 when a
threshold search finds no crossing inside its bracket.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Callable, Sequence

from .finite_key import AnalysisConfig, KeyRateResult, evaluate_record
from .params import (
    ChannelParams,
    DetectorParams,
    ReceiverParams,
    SecurityParams,
    SourceParams,
    SystemParams,
    ValidationError,
    validate,
)
from .scan import (
    SCAN_MODES,
    SCAN_VARIABLES,
    NoThresholdError,
    ScanSpec,
    emit,
    find_threshold,
    run_scan,
)
from .simulator import SIM_MODES, SimConfig, format_counts, replay_counts, simulate_session

__all__ = ["ConfigError", "load_config", "parse_assignments", "build_params", "main"]


class ConfigError(ValueError):
    """Configuration text, key, or value is invalid."""


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _to_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    value = _to_float(text)
    if not value.is_integer():
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(value)


def _to_str(text: str) -> str:
    return text


#: Every accepted configuration key and its value parser.
CONFIG_KEYS: dict[str, Callable[[str], object]] = {
    "source.mu": _to_float,
    "source.pulse_pair_rate": _to_float,
    "source.p_decoy_alpha_alpha": _to_float,
    "source.p_decoy_vacuum": _to_float,
    "source.p_z0": _to_float,
    "source.p_z1": _to_float,
    "channel.length_km": _to_float,
    "channel.attenuation_db_per_km": _to_float,
    "channel.extra_loss_db": _to_float,
    "detectors.efficiency": _to_float,
    "detectors.dark_count_prob": _to_float,
    "detectors.dead_time_s": _to_float,
    "receiver.t_b": _to_float,
    "receiver.phase_shift": _to_float,
    "receiver.disclose_rate": _to_float,
    "receiver.compression_ratio": _to_float,
    "security.eps_cor": _to_float,
    "security.eps_sec": _to_float,
    "security.eps_1": _to_float,
    "security.eps_2": _to_float,
    "security.f_ec": _to_float,
    "security.qber_abort_threshold": _to_float,
    "rounds": _to_int,
    "analysis.delta_provider": _to_str,
    "analysis.cross_term": _to_str,
    "analysis.remainder_terms": _to_str,
    "analysis.m1_model": _to_str,
    "scan.variable": _to_str,
    "scan.start": _to_float,
    "scan.stop": _to_float,
    "scan.step": _to_float,
    "scan.mode": _to_str,
    "scan.sim_seed": _to_int,
    "scan.sim_rounds": _to_int,
    "scan.replay_path": _to_str,
}


def _parse_entry(key: str, value_text: str, where: str) -> object:
    if key not in CONFIG_KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return CONFIG_KEYS[key](value_text.strip())
    except ConfigError as exc:
        raise ConfigError(f"{where}: {key}: {exc}") from None


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, object]:
    """Parse flat "key = value" lines; strict about keys and duplicates."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin} line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        if key in values:
            raise ConfigError(f"{origin} line {lineno}: repeated key {key!r}")
        values[key] = _parse_entry(key, value_text, f"{origin} line {lineno}")
    return values


def load_config(path: str | Path) -> dict[str, object]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, origin=str(path))


def parse_assignments(assignments: Sequence[str]) -> dict[str, object]:
    """Parse --set key=value overrides."""
    values: dict[str, object] = {}
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value_text = item.partition("=")
        key = key.strip()
        values[key] = _parse_entry(key, value_text, "--set")
    return values


def _collect(args: argparse.Namespace) -> dict[str, object]:
    cfg: dict[str, object] = {}
    if args.config:
        cfg.update(load_config(args.config))
    cfg.update(parse_assignments(args.set or []))
    return cfg


def _section(cfg: dict[str, object], prefix: str) -> dict[str, object]:
    head = prefix + "."
    return {k[len(head):]: v for k, v in cfg.items() if k.startswith(head)}


def build_params(cfg: dict[str, object]) -> SystemParams:
    """Assemble and validate SystemParams from flat config values."""
    kwargs: dict[str, object] = {}
    if "rounds" in cfg:
        kwargs["rounds"] = cfg["rounds"]
    params = SystemParams(
        source=SourceParams(**_section(cfg, "source")),
        channel=ChannelParams(**_section(cfg, "channel")),
        detectors=DetectorParams(**_section(cfg, "detectors")),
        receiver=ReceiverParams(**_section(cfg, "receiver")),
        security=SecurityParams(**_section(cfg, "security")),
        **kwargs,
    )
    return validate(params)


def build_analysis(cfg: dict[str, object]) -> AnalysisConfig:
    try:
        return AnalysisConfig(**_section(cfg, "analysis"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_scan_spec(cfg: dict[str, object], args: argparse.Namespace) -> ScanSpec:
    """Scan settings: config scan.* keys, overridden by command flags."""
    merged = _section(cfg, "scan")
    for key, flag in (
        ("variable", args.variable),
        ("start", args.start),
        ("stop", args.stop),
        ("step", args.step),
        ("mode", args.mode),
        ("sim_seed", args.sim_seed),
        ("sim_rounds", args.sim_rounds),
        ("replay_path", args.replay_path),
    ):
        if flag is not None:
            merged[key] = flag
    missing = [key for key in ("variable", "start", "stop") if key not in merged]
    if missing:
        raise ConfigError(f"scan requires {', '.join('scan.' + m for m in missing)}")
    merged.setdefault("step", 1.0)
    try:
        return ScanSpec(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _write_output(text: str, destination: str) -> None:
    if destination == "-":
        sys.stdout.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


def _cmd_scan(args: argparse.Namespace) -> int:
    cfg = _collect(args)
    params = build_params(cfg)
    analysis = build_analysis(cfg)
    spec = build_scan_spec(cfg, args)
    rows = run_scan(spec, params, analysis)
    emit(rows, format=args.format, destination=args.output)
    return 0


def _cmd_threshold(args: argparse.Namespace) -> int:
    cfg = _collect(args)
    params = build_params(cfg)
    analysis = build_analysis(cfg)
    lo, hi = args.bracket
    crossing = find_threshold(
        args.metric, args.target, (lo, hi), params, analysis, variable=args.variable
    )
    print(crossing)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _collect(args)
    params = build_params(cfg)
    rounds = args.rounds if args.rounds is not None else params.rounds
    record = simulate_session(params, SimConfig(seed=args.seed, rounds=rounds, mode=args.mode))
    _write_output(format_counts(record), args.output)
    return 0


def _result_json(result: KeyRateResult, params: SystemParams) -> str:
    def opt(x: float) -> float | None:
        return None if math.isnan(x) else x

    payload = {
        "qber": opt(result.qber),
        "phase_error_expected_upper": opt(result.phase_error_expected_upper),
        "phase_error_observed_upper": opt(result.phase_error_observed_upper),
        "key_length_bits": result.key_length_bits,
        "key_rate_bps": result.key_length_bits / params.block_duration_s(),
        "leak_ec_bits": opt(result.leak_ec_bits),
        "correctness_term_bits": opt(result.correctness_term_bits),
        "secrecy_term_bits": opt(result.secrecy_term_bits),
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
    }
    return json.dumps(payload, indent=2) + "\n"


def _cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _collect(args)
    params = build_params(cfg)
    analysis = build_analysis(cfg)
    record = replay_counts(args.counts)
    result = evaluate_record(record, params, analysis)
    _write_output(_result_json(result, params), args.output)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = _collect(args)
    build_params(cfg)
    build_analysis(cfg)
    print("ok")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a flat key = value configuration file")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one configuration key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cowqkd",
        description="Finite-key analysis and simulation of a two-decoy coherent one-way QKD link.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser("scan", help="sweep one parameter and emit per-point results")
    _add_common(p_scan)
    p_scan.add_argument("--variable", choices=SCAN_VARIABLES)
    p_scan.add_argument("--start", type=float)
    p_scan.add_argument("--stop", type=float)
    p_scan.add_argument("--step", type=float)
    p_scan.add_argument("--mode", choices=SCAN_MODES)
    p_scan.add_argument("--sim-seed", type=int, dest="sim_seed")
    p_scan.add_argument("--sim-rounds", type=int, dest="sim_rounds")
    p_scan.add_argument("--replay-path", dest="replay_path")
    p_scan.add_argument("--format", choices=("csv", "json"), default="csv")
    p_scan.add_argument("--output", default="-")
    p_scan.set_defaults(handler=_cmd_scan)

    p_thr = sub.add_parser("threshold", help="bisect for where a metric crosses a target")
    _add_common(p_thr)
    p_thr.add_argument("--metric", choices=("qber", "key_length"), required=True)
    p_thr.add_argument("--target", type=float, required=True)
    p_thr.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p_thr.add_argument("--variable", choices=SCAN_VARIABLES, default="length_km")
    p_thr.set_defaults(handler=_cmd_threshold)

    p_sim = sub.add_parser("simulate", help="run the Monte-Carlo session and write a count log")
    _add_common(p_sim)
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--rounds", type=int, help="defaults to the configured block size")
    p_sim.add_argument("--mode", choices=SIM_MODES, default="per_pair")
    p_sim.add_argument("--output", default="-")
    p_sim.set_defaults(handler=_cmd_simulate)

    p_ana = sub.add_parser("analyze", help="replay a count log through the finite-key pipeline")
    _add_common(p_ana)
    p_ana.add_argument("--counts", required=True, help="count log produced by simulate")
    p_ana.add_argument("--output", default="-")
    p_ana.set_defaults(handler=_cmd_analyze)

    p_val = sub.add_parser("validate", help="check a configuration and exit")
    _add_common(p_val)
    p_val.set_defaults(handler=_cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.handler(args)
    except (ConfigError, ValidationError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NoThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
