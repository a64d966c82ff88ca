"""Shared parameter builder for the test suite."""

from __future__ import annotations

from cowqkd import (
    ChannelParams,
    DetectorParams,
    ReceiverParams,
    SecurityParams,
    SourceParams,
    SystemParams,
)


def make_params(
    *,
    length_km: float = 100.0,
    attenuation_db_per_km: float = 0.2,
    extra_loss_db: float = 0.0,
    efficiency: float = 0.1,
    dark_count_prob: float = 1.8e-6,
    dead_time_s: float = 50e-6,
    mu: float = 0.5,
    p_decoy_alpha_alpha: float = 0.01,
    p_decoy_vacuum: float = 0.01,
    pulse_pair_rate: float = 5.0e8,
    rounds: int = 500_000_000,
    t_b: float = 0.90,
    phase_shift: float | None = None,
    security: SecurityParams | None = None,
) -> SystemParams:
    receiver_kwargs = {"t_b": t_b}
    if phase_shift is not None:
        receiver_kwargs["phase_shift"] = phase_shift
    return SystemParams(
        source=SourceParams(
            mu=mu,
            pulse_pair_rate=pulse_pair_rate,
            p_decoy_alpha_alpha=p_decoy_alpha_alpha,
            p_decoy_vacuum=p_decoy_vacuum,
        ),
        channel=ChannelParams(
            length_km=length_km,
            attenuation_db_per_km=attenuation_db_per_km,
            extra_loss_db=extra_loss_db,
        ),
        detectors=DetectorParams(
            efficiency=efficiency,
            dark_count_prob=dark_count_prob,
            dead_time_s=dead_time_s,
        ),
        receiver=ReceiverParams(**receiver_kwargs),
        security=security or SecurityParams(),
        rounds=rounds,
    )
