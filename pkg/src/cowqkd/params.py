"""Experimental parameters and shared numeric primitives.

Holds the immutable configuration of a two-decoy coherent one-way QKD link
(source, fiber channel, detectors, receiver optics, security targets), the
channel transmittance model, binary entropy, and aggregate validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "SourceParams",
    "ChannelParams",
    "DetectorParams",
    "ReceiverParams",
    "SecurityParams",
    "SystemParams",
    "ValidationError",
    "channel_transmittance",
    "binary_entropy",
    "validate",
]

# Probability-balance checks tolerate this much floating error.
_PROB_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when parameter invariants fail; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class SourceParams:
    """Transmitter settings.

    mu is the mean photon number of a non-empty pulse, pulse_pair_rate the
    number of two-bin rounds emitted per second.  Each round carries one of
    four states: a bit state with the pulse in the early or late bin, a
    both-bins decoy, or a vacuum decoy.  The two bit states share the
    probability left over by the decoys; omitted bit-state probabilities are
    filled in with that balanced value.
    """

    mu: float = 0.5
    pulse_pair_rate: float = 5.0e8
    p_decoy_alpha_alpha: float = 0.01
    p_decoy_vacuum: float = 0.01
    p_z0: float | None = None
    p_z1: float | None = None

    def __post_init__(self) -> None:
        balanced = 0.5 * (1.0 - self.p_decoy_alpha_alpha - self.p_decoy_vacuum)
        if self.p_z0 is None:
            object.__setattr__(self, "p_z0", balanced)
        if self.p_z1 is None:
            object.__setattr__(self, "p_z1", balanced)


@dataclass(frozen=True)
class ChannelParams:
    """Fiber link: length, attenuation, and lumped insertion loss.

    extra_loss_db models receiver-side insertion loss (for example the
    delay interferometer) and is charged to the monitoring line only; the
    default 0 dB keeps the closed-form gains in their plain form.
    """

    length_km: float = 100.0
    attenuation_db_per_km: float = 0.2
    extra_loss_db: float = 0.0


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector model: efficiency, dark counts, dead time."""

    efficiency: float = 0.1
    dark_count_prob: float = 1.8e-6
    dead_time_s: float = 50e-6


@dataclass(frozen=True)
class ReceiverParams:
    """Receiver optics and post-processing ratios.

    t_b is the transmittance of the asymmetric tap sending light to the data
    line; the rest feeds the monitoring interferometer with phase_shift
    between its arms.  disclose_rate and compression_ratio only enter the
    engineering throughput estimate, never the key-length bound.
    """

    t_b: float = 0.90
    phase_shift: float = math.pi / 2
    disclose_rate: float = 0.10
    compression_ratio: float = 0.80


@dataclass(frozen=True)
class SecurityParams:
    """Failure budgets and error-correction settings for the key bound."""

    eps_cor: float = 1e-15
    eps_sec: float = 1e-10
    eps_1: float = 1e-11
    eps_2: float = 1e-11
    f_ec: float = 1.1
    qber_abort_threshold: float = 0.05


@dataclass(frozen=True)
class SystemParams:
    """Complete system configuration plus the number of rounds per block."""

    source: SourceParams = field(default_factory=SourceParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    detectors: DetectorParams = field(default_factory=DetectorParams)
    receiver: ReceiverParams = field(default_factory=ReceiverParams)
    security: SecurityParams = field(default_factory=SecurityParams)
    rounds: int = 500_000_000

    def block_duration_s(self) -> float:
        """Wall-clock duration of one block of rounds."""
        return self.rounds / self.source.pulse_pair_rate


def channel_transmittance(
    channel: ChannelParams,
    detectors: DetectorParams,
    *,
    monitoring: bool = False,
) -> float:
    """Net transmittance from transmitter output to detector input.

    The data line sees efficiency * 10^(-attenuation * length / 10); the
    monitoring line additionally pays extra_loss_db.  Strictly decreasing in
    length and attenuation, equal to the bare efficiency at zero length and
    zero extra loss.
    """
    loss_db = channel.attenuation_db_per_km * channel.length_km
    if monitoring:
        loss_db += channel.extra_loss_db
    return detectors.efficiency * 10.0 ** (-loss_db / 10.0)


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy in bits, with h(0) = h(1) = 0 by continuity."""
    if p < 0.0 or p > 1.0:
        raise ValueError(f"binary_entropy: p must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def _prob_range(name: str, value: float, out: list[str]) -> None:
    if not (0.0 <= value <= 1.0):
        out.append(f"{name} must lie in [0, 1], got {value}")


def _source_violations(s: SourceParams) -> list[str]:
    out: list[str] = []
    if not (0.0 < s.mu < 1.0):
        out.append(f"source.mu must satisfy 0 < mu < 1, got {s.mu}")
    if s.pulse_pair_rate <= 0.0:
        out.append(f"source.pulse_pair_rate must be positive, got {s.pulse_pair_rate}")
    _prob_range("source.p_decoy_alpha_alpha", s.p_decoy_alpha_alpha, out)
    _prob_range("source.p_decoy_vacuum", s.p_decoy_vacuum, out)
    _prob_range("source.p_z0", s.p_z0, out)
    _prob_range("source.p_z1", s.p_z1, out)
    balanced = 0.5 * (1.0 - s.p_decoy_alpha_alpha - s.p_decoy_vacuum)
    if abs(s.p_z0 - balanced) > _PROB_TOL or abs(s.p_z1 - balanced) > _PROB_TOL:
        out.append(
            "source.p_z0 and source.p_z1 must both equal "
            f"(1 - p_decoy_alpha_alpha - p_decoy_vacuum)/2 = {balanced}, "
            f"got {s.p_z0} and {s.p_z1}"
        )
    total = s.p_z0 + s.p_z1 + s.p_decoy_alpha_alpha + s.p_decoy_vacuum
    if abs(total - 1.0) > _PROB_TOL:
        out.append(f"source state probabilities must sum to 1, got {total}")
    return out


def _channel_violations(c: ChannelParams) -> list[str]:
    out: list[str] = []
    if c.length_km < 0.0:
        out.append(f"channel.length_km must be non-negative, got {c.length_km}")
    if c.attenuation_db_per_km <= 0.0:
        out.append(
            f"channel.attenuation_db_per_km must be positive, got {c.attenuation_db_per_km}"
        )
    if c.extra_loss_db < 0.0:
        out.append(f"channel.extra_loss_db must be non-negative, got {c.extra_loss_db}")
    return out


def _detector_violations(d: DetectorParams) -> list[str]:
    out: list[str] = []
    if not (0.0 < d.efficiency <= 1.0):
        out.append(f"detectors.efficiency must lie in (0, 1], got {d.efficiency}")
    if not (0.0 <= d.dark_count_prob < 1.0):
        out.append(f"detectors.dark_count_prob must lie in [0, 1), got {d.dark_count_prob}")
    if d.dead_time_s < 0.0:
        out.append(f"detectors.dead_time_s must be non-negative, got {d.dead_time_s}")
    return out


def _receiver_violations(r: ReceiverParams) -> list[str]:
    out: list[str] = []
    if not (0.0 < r.t_b < 1.0):
        out.append(f"receiver.t_b must lie in (0, 1), got {r.t_b}")
    _prob_range("receiver.disclose_rate", r.disclose_rate, out)
    _prob_range("receiver.compression_ratio", r.compression_ratio, out)
    return out


def _security_violations(s: SecurityParams) -> list[str]:
    out: list[str] = []
    for name in ("eps_cor", "eps_sec", "eps_1", "eps_2"):
        value = getattr(s, name)
        if not (0.0 < value < 1.0):
            out.append(f"security.{name} must lie in (0, 1), got {value}")
    if s.f_ec < 1.0:
        out.append(f"security.f_ec must be at least 1, got {s.f_ec}")
    if not (0.0 < s.qber_abort_threshold < 0.5):
        out.append(
            f"security.qber_abort_threshold must lie in (0, 0.5), got {s.qber_abort_threshold}"
        )
    return out


def validate(params: SystemParams) -> SystemParams:
    """Check every invariant and return the params unchanged if all hold.

    All violations are collected before raising, so one failed run reports
    everything that needs fixing.  Idempotent on valid input.
    """
    violations: list[str] = []
    violations += _source_violations(params.source)
    violations += _channel_violations(params.channel)
    violations += _detector_violations(params.detectors)
    violations += _receiver_violations(params.receiver)
    violations += _security_violations(params.security)
    if params.rounds < 1:
        violations.append(f"rounds must be at least 1, got {params.rounds}")
    if violations:
        raise ValidationError(violations)
    return params
