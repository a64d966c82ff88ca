"""Pulse-level Monte-Carlo model of the two-decoy coherent one-way protocol.

Each round draws one emitted state and Bernoulli click indicators for four
detection gates: the two data-line time bins and the two monitoring-line
ports.  Photon clicks fire with probability 1 - exp(-mean photon number) per
gate, dark counts with probability p_d, independently.  Tallies apply the
same exclusivity conventions as the closed-form gains, so every analytic gain
is the exact expectation of its empirical counterpart:

  state      tally        condition (P photon click, D dark, C any click)
  bit 0z     tau0 click   P[d0] and not D[d1], not D[m0], not D[m1]
  bit 0z     tau1 click   C[d1] and not D[m0], not D[m1]
  bit 0z     m port       C[m] and not D[other m], not C[d0], not D[d1]
  both-bins  m0           C[m0] and not D[m1], not D[d0], not C[d1]
  both-bins  m1           D[m1] and not P[m1], not D[m0], not D[d0], not C[d1]
  vacuum     m port       C[m] and not D[other m], not D[d0], not D[d1]

with the bit-1z rows mirrored in time.  The both-bins m1 tally counts
dark-only events because the closed-form value models the destructive port as
light-free; the residual-light suppression factors differ by far less than
one Monte-Carlo standard deviation at any tested scale.

Rounds are processed in fixed-size chunks, each with its own RNG stream
spawned from the seed, so results are reproducible and chunk-parallelizable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterator

import numpy as np

from .concentration import CountRecord, validate_record
from .gains import GainSet
from .params import SystemParams, ValidationError, channel_transmittance

__all__ = [
    "StateKind",
    "EmittedState",
    "DetectionEvent",
    "SimConfig",
    "MissingCountError",
    "EmpiricalGains",
    "CountFileError",
    "simulate_session",
    "detection_events",
    "empirical_gains",
    "replay_counts",
    "format_counts",
    "write_counts",
]

SIM_MODES = ("per_pair", "streaming")

#: Count-log wire keys in canonical order, mapped to CountRecord fields.
WIRE_KEYS = (
    ("rounds", "rounds"),
    ("n_z", "n_z"),
    ("n_sent_aa", "n_sent_alpha_alpha"),
    ("n_sent_vac", "n_sent_vac"),
    ("n_aa_m0", "n_aa_m0"),
    ("n_aa_m1", "n_aa_m1"),
    ("n_vac_m0", "n_vac_m0"),
    ("n_vac_m1", "n_vac_m1"),
)

#: Rounds per RNG chunk; fixed so that tallies are seed-deterministic
#: regardless of the total round count.
_CHUNK_ROUNDS = 1 << 20


class StateKind(IntEnum):
    """Emitted state classes, in sampling order."""

    Z0 = 0
    Z1 = 1
    DECOY_AA = 2
    DECOY_VAC = 3


@dataclass(frozen=True)
class EmittedState:
    kind: StateKind
    round_index: int


@dataclass(frozen=True)
class DetectionEvent:
    """One surviving click: which detector, which time bin, dark or photonic."""

    round_index: int
    detector: str
    time_bin: str
    is_dark: bool


@dataclass(frozen=True)
class SimConfig:
    """Simulation run settings: seed, length, and dead-time handling.

    per_pair treats every round independently, matching the closed-form
    model; streaming additionally suppresses clicks within dead_time_s of a
    prior click on the same detector.
    """

    seed: int
    rounds: int
    mode: str = "per_pair"

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError(f"rounds must be at least 1, got {self.rounds}")
        if self.mode not in SIM_MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {SIM_MODES}")


class MissingCountError(AttributeError):
    """Requested gain field has no emission data in the record."""


class EmpiricalGains:
    """Gain estimates keyed like GainSet fields; absent fields raise."""

    def __init__(self, values: dict[str, float]):
        self._values = dict(values)

    def __getattr__(self, name: str) -> float:
        try:
            return self.__dict__["_values"][name]
        except KeyError:
            raise MissingCountError(
                f"gain {name!r} unavailable: its state class has no recorded emissions"
            ) from None

    def available(self) -> frozenset[str]:
        return frozenset(self._values)

    def as_dict(self) -> dict[str, float]:
        return dict(self._values)

    def as_gainset(self) -> GainSet:
        """Build a GainSet; raises MissingCountError unless all fields exist."""
        missing = [f for f in GainSet.__dataclass_fields__ if f not in self._values]
        if missing:
            raise MissingCountError(f"gains unavailable for {missing}")
        return GainSet(**self._values)


class CountFileError(ValueError):
    """Count-log file is malformed; message carries line diagnostics."""


def _gate_probabilities(params: SystemParams) -> dict[str, np.ndarray]:
    """Photon-click probability per gate, indexed by StateKind.

    Gates: data tau0, data tau1, monitoring m0, monitoring m1.  The
    monitoring feed b splits per the interferometer phase for the both-bins
    decoy and into two temporal copies totalling b/2 for lone pulses.
    """
    eta_data = channel_transmittance(params.channel, params.detectors)
    eta_mon = channel_transmittance(params.channel, params.detectors, monitoring=True)
    mu = params.source.mu
    t_b = params.receiver.t_b
    a = t_b * mu * eta_data
    b = (1.0 - t_b) * mu * eta_mon
    m0_aa = b * (1.0 + math.cos(params.receiver.phase_shift)) / 2.0
    m1_aa = b * (1.0 - math.cos(params.receiver.phase_shift)) / 2.0
    s = b / 2.0
    means = {
        "d0": np.array([a, 0.0, a, 0.0]),
        "d1": np.array([0.0, a, a, 0.0]),
        "m0": np.array([s, s, m0_aa, 0.0]),
        "m1": np.array([s, s, m1_aa, 0.0]),
    }
    return {gate: 1.0 - np.exp(-m) for gate, m in means.items()}


_GATE_ORDER = ("d0", "d1", "m0", "m1")


def _simulate_chunk(
    rng: np.random.Generator,
    n: int,
    state_cum: np.ndarray,
    p_photon: dict[str, np.ndarray],
    p_dark: float,
) -> tuple[np.ndarray, dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Sample one chunk; returns (kinds, photon clicks, dark fires) per gate.

    Draw order is fixed (kinds, then photon and dark per gate in gate order)
    so that identical seeds give identical samples.
    """
    kinds = np.searchsorted(state_cum, rng.random(n), side="right").astype(np.uint8)
    photon: dict[str, np.ndarray] = {}
    dark: dict[str, np.ndarray] = {}
    for gate in _GATE_ORDER:
        photon[gate] = rng.random(n) < p_photon[gate][kinds]
        dark[gate] = rng.random(n) < p_dark
    return kinds, photon, dark


class _DeadTimeFilter:
    """Greedy non-paralyzable dead-time suppression for one detector."""

    def __init__(self, dead_time_s: float):
        self.dead_time = dead_time_s
        self.last_kept = -math.inf

    def keep(self, times: np.ndarray) -> np.ndarray:
        kept = np.zeros(times.shape[0], dtype=bool)
        last = self.last_kept
        dt = self.dead_time
        for i, t in enumerate(times):
            if t - last >= dt:
                kept[i] = True
                last = t
        self.last_kept = last
        return kept


def _apply_dead_time(
    start_round: int,
    round_period: float,
    photon: dict[str, np.ndarray],
    dark: dict[str, np.ndarray],
    filters: dict[str, _DeadTimeFilter],
) -> None:
    """Suppress clicks in place; a suppressed gate registers nothing at all.

    The data line is one physical detector covering both bins, half a period
    apart; each monitoring port is its own detector gated once per round.
    """
    n = photon["d0"].shape[0]
    offsets = np.arange(start_round, start_round + n) * round_period
    groups = {
        "data": ("d0", "d1"),
        "m0": ("m0",),
        "m1": ("m1",),
    }
    bin_shift = {"d0": 0.0, "d1": round_period / 2.0, "m0": 0.0, "m1": 0.0}
    for det, gates in groups.items():
        times_list = []
        tags = []
        for gate in gates:
            clicked = photon[gate] | dark[gate]
            idx = np.flatnonzero(clicked)
            times_list.append(offsets[idx] + bin_shift[gate])
            tags.append((gate, idx))
        if len(gates) == 2:
            t0, t1 = times_list
            merged = np.concatenate([t0, t1])
            order = np.argsort(merged, kind="stable")
            kept = np.empty(merged.shape[0], dtype=bool)
            kept[order] = filters[det].keep(merged[order])
            splits = np.split(kept, [t0.shape[0]])
        else:
            kept = filters[det].keep(times_list[0])
            splits = [kept]
        for (gate, idx), keep_mask in zip(tags, splits):
            drop = idx[~keep_mask]
            photon[gate][drop] = False
            dark[gate][drop] = False


def _tally_chunk(
    tallies: dict[str, int],
    kinds: np.ndarray,
    photon: dict[str, np.ndarray],
    dark: dict[str, np.ndarray],
) -> None:
    click = {g: photon[g] | dark[g] for g in _GATE_ORDER}
    is_z0 = kinds == StateKind.Z0
    is_z1 = kinds == StateKind.Z1
    is_aa = kinds == StateKind.DECOY_AA
    is_vac = kinds == StateKind.DECOY_VAC

    no_mon_dark = ~dark["m0"] & ~dark["m1"]

    def count(mask: np.ndarray) -> int:
        return int(np.count_nonzero(mask))

    tallies["n_sent_0z"] += count(is_z0)
    tallies["n_sent_1z"] += count(is_z1)
    tallies["n_sent_alpha_alpha"] += count(is_aa)
    tallies["n_sent_vac"] += count(is_vac)
    tallies["n_z"] += count((is_z0 | is_z1) & (click["d0"] | click["d1"]))

    tallies["n_0z_tau0"] += count(is_z0 & photon["d0"] & ~dark["d1"] & no_mon_dark)
    tallies["n_0z_tau1"] += count(is_z0 & click["d1"] & no_mon_dark)
    tallies["n_1z_tau1"] += count(is_z1 & photon["d1"] & ~dark["d0"] & no_mon_dark)
    tallies["n_1z_tau0"] += count(is_z1 & click["d0"] & no_mon_dark)

    quiet_z0 = ~click["d0"] & ~dark["d1"]
    quiet_z1 = ~click["d1"] & ~dark["d0"]
    tallies["n_0z_m0"] += count(is_z0 & click["m0"] & ~dark["m1"] & quiet_z0)
    tallies["n_0z_m1"] += count(is_z0 & click["m1"] & ~dark["m0"] & quiet_z0)
    tallies["n_1z_m0"] += count(is_z1 & click["m0"] & ~dark["m1"] & quiet_z1)
    tallies["n_1z_m1"] += count(is_z1 & click["m1"] & ~dark["m0"] & quiet_z1)

    quiet_aa = ~dark["d0"] & ~click["d1"]
    tallies["n_aa_m0"] += count(is_aa & click["m0"] & ~dark["m1"] & quiet_aa)
    tallies["n_aa_m1"] += count(is_aa & dark["m1"] & ~photon["m1"] & ~dark["m0"] & quiet_aa)

    quiet_vac = ~dark["d0"] & ~dark["d1"]
    tallies["n_vac_m0"] += count(is_vac & click["m0"] & ~dark["m1"] & quiet_vac)
    tallies["n_vac_m1"] += count(is_vac & click["m1"] & ~dark["m0"] & quiet_vac)


def _state_cumulative(params: SystemParams) -> np.ndarray:
    s = params.source
    probs = np.array([s.p_z0, s.p_z1, s.p_decoy_alpha_alpha, s.p_decoy_vacuum])
    if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-9:
        raise ValidationError([f"state probabilities must be a distribution, got {probs}"])
    return np.cumsum(probs)


def _chunk_streams(seed: int, rounds: int) -> list[tuple[int, int, np.random.Generator]]:
    n_chunks = (rounds + _CHUNK_ROUNDS - 1) // _CHUNK_ROUNDS
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    out = []
    for i, child in enumerate(children):
        start = i * _CHUNK_ROUNDS
        size = min(_CHUNK_ROUNDS, rounds - start)
        out.append((start, size, np.random.Generator(np.random.PCG64(child))))
    return out


def simulate_session(params: SystemParams, cfg: SimConfig) -> CountRecord:
    """Simulate one session and return its validated count record.

    Deterministic for a fixed seed and parameters.  In streaming mode the
    dead-time filter runs over the merged click train of each physical
    detector before tallying, so suppression can only remove counts relative
    to per_pair mode on the same seed.
    """
    p_photon = _gate_probabilities(params)
    p_dark = params.detectors.dark_count_prob
    state_cum = _state_cumulative(params)
    round_period = 1.0 / params.source.pulse_pair_rate
    tallies = {
        key: 0
        for key in (
            "n_z", "n_sent_alpha_alpha", "n_sent_vac", "n_aa_m0", "n_aa_m1",
            "n_vac_m0", "n_vac_m1", "n_sent_0z", "n_sent_1z", "n_0z_tau0",
            "n_0z_tau1", "n_1z_tau0", "n_1z_tau1", "n_0z_m0", "n_0z_m1",
            "n_1z_m0", "n_1z_m1",
        )
    }
    filters = {
        det: _DeadTimeFilter(params.detectors.dead_time_s) for det in ("data", "m0", "m1")
    }
    for start, size, rng in _chunk_streams(cfg.seed, cfg.rounds):
        kinds, photon, dark = _simulate_chunk(rng, size, state_cum, p_photon, p_dark)
        if cfg.mode == "streaming" and params.detectors.dead_time_s > 0:
            _apply_dead_time(start, round_period, photon, dark, filters)
        _tally_chunk(tallies, kinds, photon, dark)
    return validate_record(CountRecord(rounds=cfg.rounds, **tallies))


def detection_events(params: SystemParams, cfg: SimConfig) -> Iterator[DetectionEvent]:
    """Yield every surviving click of a session, for small diagnostic runs.

    Uses the same sampling and dead-time logic as simulate_session, so the
    event stream is consistent with the tallies for the same seed.
    """
    p_photon = _gate_probabilities(params)
    p_dark = params.detectors.dark_count_prob
    state_cum = _state_cumulative(params)
    round_period = 1.0 / params.source.pulse_pair_rate
    filters = {
        det: _DeadTimeFilter(params.detectors.dead_time_s) for det in ("data", "m0", "m1")
    }
    gate_detector = {"d0": "data", "d1": "data", "m0": "mon_m0", "m1": "mon_m1"}
    gate_bin = {"d0": "tau0", "d1": "tau1", "m0": "interference", "m1": "interference"}
    for start, size, rng in _chunk_streams(cfg.seed, cfg.rounds):
        _, photon, dark = _simulate_chunk(rng, size, state_cum, p_photon, p_dark)
        if cfg.mode == "streaming" and params.detectors.dead_time_s > 0:
            _apply_dead_time(start, round_period, photon, dark, filters)
        per_round: dict[int, list[DetectionEvent]] = {}
        for gate in _GATE_ORDER:
            clicked = photon[gate] | dark[gate]
            for i in np.flatnonzero(clicked):
                event = DetectionEvent(
                    round_index=start + int(i),
                    detector=gate_detector[gate],
                    time_bin=gate_bin[gate],
                    is_dark=bool(dark[gate][i] and not photon[gate][i]),
                )
                per_round.setdefault(int(i), []).append(event)
        for i in sorted(per_round):
            yield from per_round[i]


def empirical_gains(record: CountRecord, params: SystemParams | None = None) -> EmpiricalGains:
    """Frequency estimates of every gain the record can resolve.

    Each gain is its class-conditional click count over the class emission
    count.  Fields whose class has no recorded emissions are absent, and
    reading them raises MissingCountError.
    """
    sources = {
        "data_0z_tau0": ("n_0z_tau0", "n_sent_0z"),
        "data_0z_tau1": ("n_0z_tau1", "n_sent_0z"),
        "data_1z_tau0": ("n_1z_tau0", "n_sent_1z"),
        "data_1z_tau1": ("n_1z_tau1", "n_sent_1z"),
        "mon_alpha_alpha_m0": ("n_aa_m0", "n_sent_alpha_alpha"),
        "mon_alpha_alpha_m1": ("n_aa_m1", "n_sent_alpha_alpha"),
        "mon_vac_m0": ("n_vac_m0", "n_sent_vac"),
        "mon_vac_m1": ("n_vac_m1", "n_sent_vac"),
        "mon_0z_m0": ("n_0z_m0", "n_sent_0z"),
        "mon_0z_m1": ("n_0z_m1", "n_sent_0z"),
        "mon_1z_m0": ("n_1z_m0", "n_sent_1z"),
        "mon_1z_m1": ("n_1z_m1", "n_sent_1z"),
    }
    values: dict[str, float] = {}
    for field, (click_name, sent_name) in sources.items():
        clicks = getattr(record, click_name)
        sent = getattr(record, sent_name)
        if clicks is None or sent is None or sent == 0:
            continue
        values[field] = clicks / sent
    return EmpiricalGains(values)


def replay_counts(path: str | Path) -> CountRecord:
    """Parse a count-log file into a validated CountRecord.

    The format is one "key = integer" per line with exactly the eight core
    keys required; blank lines and lines starting with '#' are ignored.
    Unknown or repeated keys, malformed lines, and invariant violations are
    all rejected with line diagnostics.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    field_for = dict(WIRE_KEYS)
    values: dict[str, int] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = integer', got {raw!r}")
            continue
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in field_for:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if field_for[key] in values:
            errors.append(f"line {lineno}: repeated key {key!r}")
            continue
        try:
            values[field_for[key]] = int(value_text)
        except ValueError:
            errors.append(f"line {lineno}: value for {key!r} is not an integer: {value_text!r}")
    missing = [key for key, field in WIRE_KEYS if field not in values]
    if missing:
        errors.append(f"missing keys: {', '.join(missing)}")
    if errors:
        raise CountFileError(f"{path}: " + "; ".join(errors))
    try:
        return validate_record(CountRecord(**values))
    except ValidationError as exc:
        raise CountFileError(f"{path}: {exc}") from exc


def format_counts(record: CountRecord) -> str:
    """Render the eight wire keys in canonical order, one per line."""
    return "".join(f"{key} = {getattr(record, field)}\n" for key, field in WIRE_KEYS)


def write_counts(record: CountRecord, path: str | Path) -> None:
    Path(path).write_text(format_counts(record), encoding="utf-8")
