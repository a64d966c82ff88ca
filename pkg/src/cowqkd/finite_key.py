"""X-basis gain bounds, phase-error bounds, and the secure key length.

The phase error rate of the protocol equals the bit error rate of a virtual
X-basis protocol whose states are superpositions of the two bit states.  Its
monitoring-line gains cannot be observed directly; they are sandwiched
between combinations of the observable decoy gains.  The sandwich, a
statistical fluctuation step, and the entropic key-length bound are
implemented here, with every contested algebraic choice exposed as an
explicit mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .concentration import (
    DELTA_PROVIDERS,
    BoundedValue,
    CountRecord,
    bound_expected_count,
    bound_gain,
    delta_hoeffding,
)
from .gains import DegenerateGainsError, GainSet, analytic_gains, qber
from .params import SecurityParams, SystemParams, binary_entropy, channel_transmittance

__all__ = [
    "XBasisConstants",
    "KeyRateResult",
    "AnalysisConfig",
    "CROSS_TERM_MODES",
    "REMAINDER_MODES",
    "xbasis_gain_upper_m1",
    "xbasis_gain_lower_m0",
    "phase_error_expected_upper",
    "phase_error_observed_upper",
    "secure_key_length",
    "expected_sifted_clicks",
    "experiment_throughput",
    "evaluate_analytic_point",
    "evaluate_record",
]

# Cross term inside the constructive-port lower bound: geometric mean of the
# two upper-bounded gains, or twice the vacuum one alone.
CROSS_TERM_MODES = ("mixed", "vacuum")
# The non-quadratic remainder tails of the sandwich bounds can be kept or
# dropped; at mu near 0.5 they are so loose that keeping them voids the bound.
REMAINDER_MODES = ("include", "drop")


@dataclass(frozen=True)
class XBasisConstants:
    """Normalization constants of the virtual X-basis states."""

    n_plus: float
    n_minus: float

    @classmethod
    def from_mu(cls, mu: float) -> "XBasisConstants":
        e = math.exp(-mu)
        return cls(n_plus=2.0 * (1.0 + e), n_minus=2.0 * (1.0 - e))


@dataclass(frozen=True)
class KeyRateResult:
    """Full outcome of one finite-key evaluation.

    key_length_bits is the extractable key per block, floored at zero; the
    phase-error fields are clamped to [0, 0.5] since anything at or above 0.5
    aborts.  abort_reason is None exactly when aborted is False.
    """

    qber: float
    phase_error_expected_upper: float
    phase_error_observed_upper: float
    key_length_bits: float
    leak_ec_bits: float
    correctness_term_bits: float
    secrecy_term_bits: float
    aborted: bool
    abort_reason: str | None = None


@dataclass(frozen=True)
class AnalysisConfig:
    """Mode switches for the finite-key pipeline.

    delta_provider names the concentration inequality used for the six decoy
    bounds.  cross_term and remainder_terms select the algebraic variant of
    the X-basis sandwich; m1_model selects the destructive-port gain model.
    The defaults are the combination that reproduces the reference distance
    cutoffs; the alternatives are retained for comparison and documented in
    the README.
    """

    delta_provider: str = "observed"
    cross_term: str = "mixed"
    remainder_terms: str = "drop"
    m1_model: str = "optical_switch"

    def __post_init__(self) -> None:
        if self.delta_provider not in DELTA_PROVIDERS:
            raise ValueError(
                f"unknown delta_provider {self.delta_provider!r}, "
                f"expected one of {tuple(DELTA_PROVIDERS)}"
            )
        if self.cross_term not in CROSS_TERM_MODES:
            raise ValueError(
                f"unknown cross_term {self.cross_term!r}, expected one of {CROSS_TERM_MODES}"
            )
        if self.remainder_terms not in REMAINDER_MODES:
            raise ValueError(
                f"unknown remainder_terms {self.remainder_terms!r}, "
                f"expected one of {REMAINDER_MODES}"
            )


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _require_side(bound: BoundedValue, side: str, name: str) -> float:
    value = getattr(bound, side)
    if value is None:
        raise ValueError(f"{name} needs a populated {side} bound")
    return _clamp01(value)


def xbasis_gain_upper_m1(
    bounded_aa_m1: BoundedValue,
    bounded_vac_m1: BoundedValue,
    mu: float,
    *,
    include_remainder: bool = True,
) -> float:
    """Upper bound on the virtual X-state gain at the destructive port.

    Quadratic part: (e^(mu/2) sqrt(g_aa) + e^(-mu/2) sqrt(g_vac))^2 / n_plus,
    evaluated at the upper-bounded decoy gains.  The remainder tail
    (n_minus/n_plus)(e^mu n_minus/4 + e^mu sqrt(g_aa) + sqrt(g_vac)) accounts
    for the decoy states spanning the bit-state pair only approximately; it
    contains a gain-independent constant and can be dropped.  Clamped to
    [0, 1].
    """
    g_aa = _require_side(bounded_aa_m1, "upper", "bounded_aa_m1")
    g_vac = _require_side(bounded_vac_m1, "upper", "bounded_vac_m1")
    const = XBasisConstants.from_mu(mu)
    quad = (
        math.exp(mu / 2.0) * math.sqrt(g_aa) + math.exp(-mu / 2.0) * math.sqrt(g_vac)
    ) ** 2 / const.n_plus
    value = quad
    if include_remainder:
        value += (const.n_minus / const.n_plus) * (
            math.exp(mu) * const.n_minus / 4.0
            + math.exp(mu) * math.sqrt(g_aa)
            + math.sqrt(g_vac)
        )
    return _clamp01(value)


def xbasis_gain_lower_m0(
    bounded_aa_m0: BoundedValue,
    bounded_vac_m0: BoundedValue,
    mu: float,
    *,
    cross_term: str = "mixed",
    include_remainder: bool = True,
) -> float:
    """Lower bound on the virtual X-state gain at the constructive port.

    Quadratic part: (e^mu g_aa_low + e^(-mu) g_vac_low - cross) / n_plus with
    the cross term 2 sqrt(g_aa_up * g_vac_up) in mixed mode or 2 g_vac_up in
    vacuum mode.  The optional remainder tail subtracts
    (n_minus/n_plus)(e^mu sqrt(g_aa_up) + sqrt(g_vac_up)).  Negative values
    clamp to zero.
    """
    if cross_term not in CROSS_TERM_MODES:
        raise ValueError(f"unknown cross_term {cross_term!r}, expected one of {CROSS_TERM_MODES}")
    lo_aa = _require_side(bounded_aa_m0, "lower", "bounded_aa_m0")
    lo_vac = _require_side(bounded_vac_m0, "lower", "bounded_vac_m0")
    up_aa = _require_side(bounded_aa_m0, "upper", "bounded_aa_m0")
    up_vac = _require_side(bounded_vac_m0, "upper", "bounded_vac_m0")
    const = XBasisConstants.from_mu(mu)
    if cross_term == "mixed":
        cross = 2.0 * math.sqrt(up_aa * up_vac)
    else:
        cross = 2.0 * up_vac
    value = (math.exp(mu) * lo_aa + math.exp(-mu) * lo_vac - cross) / const.n_plus
    if include_remainder:
        value -= (const.n_minus / const.n_plus) * (
            math.exp(mu) * math.sqrt(up_aa) + math.sqrt(up_vac)
        )
    return _clamp01(value)


def phase_error_expected_upper(
    gains: GainSet,
    xg_upper: float,
    xg_lower: float,
    mu: float,
) -> float:
    """Upper bound on the expected phase error rate.

    Combines the X-basis sandwich with the bit-state monitoring gains:
    [n_plus (xg_upper - xg_lower) + 2 (g_0z_m0 + g_1z_m0)] over
    2 (g_0z_m0 + g_0z_m1 + g_1z_m0 + g_1z_m1), clamped to [0, 1].
    """
    const = XBasisConstants.from_mu(mu)
    denom = 2.0 * (
        gains.mon_0z_m0 + gains.mon_0z_m1 + gains.mon_1z_m0 + gains.mon_1z_m1
    )
    if denom == 0.0:
        raise DegenerateGainsError(
            "all bit-state monitoring gains are zero, phase error undefined"
        )
    numer = const.n_plus * (xg_upper - xg_lower) + 2.0 * (
        gains.mon_0z_m0 + gains.mon_1z_m0
    )
    return _clamp01(numer / denom)


def phase_error_observed_upper(
    ep_expected_upper: float,
    n_z: float,
    rounds: int,
    eps_2: float,
) -> float:
    """Upper bound on the observed phase error rate among sifted detections.

    The expected number of phase-error clicks scales with the sifted-click
    count the bound is applied to, and the statistical allowance is
    sqrt(n_z/2 ln(1/eps_2)); the result is their sum over n_z, capped at 1.
    rounds is only sanity-checked against n_z.
    """
    if n_z <= 0:
        raise ZeroDivisionError("n_z is zero: no sifted detections to bound")
    if n_z > rounds:
        raise ValueError(f"n_z = {n_z} exceeds rounds = {rounds}")
    n_p_upper = n_z * ep_expected_upper + delta_hoeffding(n_z, eps_2)
    return min(1.0, n_p_upper / n_z)


def secure_key_length(
    n_z: float,
    ep_observed_upper: float,
    qber_value: float,
    sec: SecurityParams,
    *,
    ep_expected_upper: float = float("nan"),
) -> KeyRateResult:
    """Extractable key length of one block, with per-term accounting.

    key = n_z [1 - h(ep)] - f n_z h(qber) - log2(2/eps_cor) - 2 log2(5/eps_sec),
    floored at zero.  Aborts when the QBER exceeds its threshold, when the
    phase-error bound reaches 0.5, or when no positive key remains.
    """
    correctness = math.log2(2.0 / sec.eps_cor)
    secrecy = 2.0 * math.log2(5.0 / sec.eps_sec)
    leak_ec = sec.f_ec * n_z * binary_entropy(qber_value)
    reason: str | None = None
    key_bits = 0.0
    if qber_value > sec.qber_abort_threshold:
        reason = (
            f"qber {qber_value:.6g} above abort threshold {sec.qber_abort_threshold:.6g}"
        )
    elif ep_observed_upper >= 0.5:
        reason = "phase error bound at or above 0.5"
    else:
        raw = n_z * (1.0 - binary_entropy(ep_observed_upper)) - leak_ec - correctness - secrecy
        if raw <= 0.0:
            reason = "no positive key length"
        else:
            key_bits = raw
    return KeyRateResult(
        qber=qber_value,
        phase_error_expected_upper=min(0.5, ep_expected_upper),
        phase_error_observed_upper=min(0.5, ep_observed_upper),
        key_length_bits=key_bits,
        leak_ec_bits=leak_ec,
        correctness_term_bits=correctness,
        secrecy_term_bits=secrecy,
        aborted=reason is not None,
        abort_reason=reason,
    )


def expected_sifted_clicks(params: SystemParams, duration_s: float = 1.0) -> float:
    """Model of the sifted data-line click count over a given duration.

    Raw rate: round rate times the bit-state probability times the chance of
    any data-line click in a bit round, 1 - (1-p_d)^2 exp(-a).  The detector
    is non-paralyzable, so the registered rate saturates as
    raw / (1 + raw * dead_time).
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    eta = channel_transmittance(params.channel, params.detectors)
    a = params.receiver.t_b * params.source.mu * eta
    p_d = params.detectors.dark_count_prob
    p_click = 1.0 - (1.0 - p_d) ** 2 * math.exp(-a)
    p_signal = params.source.p_z0 + params.source.p_z1
    raw_rate = params.source.pulse_pair_rate * p_signal * p_click
    saturated = raw_rate / (1.0 + raw_rate * params.detectors.dead_time_s)
    return saturated * duration_s


def experiment_throughput(
    key_length_bits: float,
    params: SystemParams,
    block_duration_s: float | None = None,
) -> float:
    """Engineering key-rate estimate in bits per second.

    Divides the block key length by the block duration and applies the
    sifting disclosure and post-processing compression factors.  These
    factors never enter the key-length bound itself.
    """
    duration = params.block_duration_s() if block_duration_s is None else block_duration_s
    r = params.receiver
    return key_length_bits / duration * (1.0 - r.disclose_rate) * r.compression_ratio


def _decoy_bounds(
    counts: dict[str, float],
    emissions: dict[str, float],
    eps_1: float,
    provider: str,
) -> dict[str, BoundedValue]:
    """The six gain bounds: both ports upper, constructive port also lower."""
    spec = {
        "aa_m0": ("aa", "both"),
        "aa_m1": ("aa", "upper"),
        "vac_m0": ("vac", "both"),
        "vac_m1": ("vac", "upper"),
    }
    out: dict[str, BoundedValue] = {}
    for key, (cls, direction) in spec.items():
        counted = bound_expected_count(
            counts[key], emissions[cls], eps_1, direction, provider=provider
        )
        out[key] = bound_gain(counted, emissions[cls])
    return out


def _finish_pipeline(
    gains: GainSet,
    bounds: dict[str, BoundedValue],
    qber_value: float,
    n_z: float,
    rounds: int,
    params: SystemParams,
    analysis: AnalysisConfig,
) -> KeyRateResult:
    mu = params.source.mu
    include = analysis.remainder_terms == "include"
    xg_up = xbasis_gain_upper_m1(bounds["aa_m1"], bounds["vac_m1"], mu, include_remainder=include)
    xg_lo = xbasis_gain_lower_m0(
        bounds["aa_m0"], bounds["vac_m0"], mu,
        cross_term=analysis.cross_term, include_remainder=include,
    )
    ep_star = phase_error_expected_upper(gains, xg_up, xg_lo, mu)
    if n_z <= 0:
        return KeyRateResult(
            qber=qber_value,
            phase_error_expected_upper=min(0.5, ep_star),
            phase_error_observed_upper=0.5,
            key_length_bits=0.0,
            leak_ec_bits=0.0,
            correctness_term_bits=math.log2(2.0 / params.security.eps_cor),
            secrecy_term_bits=2.0 * math.log2(5.0 / params.security.eps_sec),
            aborted=True,
            abort_reason="no sifted detections",
        )
    ep_obs = phase_error_observed_upper(ep_star, n_z, rounds, params.security.eps_2)
    return secure_key_length(
        n_z, ep_obs, qber_value, params.security, ep_expected_upper=ep_star
    )


def evaluate_analytic_point(
    params: SystemParams,
    analysis: AnalysisConfig | None = None,
) -> KeyRateResult:
    """Run the full pipeline on closed-form gains and modeled counts.

    Decoy counts are taken at their expected values (emissions times gains)
    and the sifted-click count from the dead-time-saturated model, so the
    result is a deterministic function of the parameters.
    """
    analysis = analysis or AnalysisConfig()
    gains = analytic_gains(params, m1_model=analysis.m1_model)
    qber_value = qber(gains)
    n_z = expected_sifted_clicks(params, params.block_duration_s())
    emissions = {
        "aa": params.rounds * params.source.p_decoy_alpha_alpha,
        "vac": params.rounds * params.source.p_decoy_vacuum,
    }
    counts = {
        "aa_m0": emissions["aa"] * gains.mon_alpha_alpha_m0,
        "aa_m1": emissions["aa"] * gains.mon_alpha_alpha_m1,
        "vac_m0": emissions["vac"] * gains.mon_vac_m0,
        "vac_m1": emissions["vac"] * gains.mon_vac_m1,
    }
    if emissions["aa"] <= 0 or emissions["vac"] <= 0:
        raise ValueError("both decoy probabilities must be positive for the analytic pipeline")
    bounds = _decoy_bounds(counts, emissions, params.security.eps_1, analysis.delta_provider)
    return _finish_pipeline(gains, bounds, qber_value, n_z, params.rounds, params, analysis)


def evaluate_record(
    record: CountRecord,
    params: SystemParams,
    analysis: AnalysisConfig | None = None,
) -> KeyRateResult:
    """Run the full pipeline on observed counts from a session record.

    Decoy bounds and the sifted-click count come from the record.  The QBER
    comes from the record too when its per-bin fields are present, otherwise
    from the closed-form gains; the bit-state monitoring gains in the
    phase-error denominator are always the closed-form ones, since count logs
    do not resolve them.
    """
    analysis = analysis or AnalysisConfig()
    gains = analytic_gains(params, m1_model=analysis.m1_model)
    per_bin = (record.n_0z_tau0, record.n_0z_tau1, record.n_1z_tau0, record.n_1z_tau1)
    if all(v is not None for v in per_bin) and sum(per_bin) > 0:
        wrong = record.n_0z_tau1 + record.n_1z_tau0
        qber_value = wrong / sum(per_bin)
    else:
        qber_value = qber(gains)
    if record.n_sent_alpha_alpha <= 0 or record.n_sent_vac <= 0:
        raise ValueError("record contains no decoy emissions, bounds undefined")
    emissions = {"aa": float(record.n_sent_alpha_alpha), "vac": float(record.n_sent_vac)}
    counts = {
        "aa_m0": float(record.n_aa_m0),
        "aa_m1": float(record.n_aa_m1),
        "vac_m0": float(record.n_vac_m0),
        "vac_m1": float(record.n_vac_m1),
    }
    bounds = _decoy_bounds(counts, emissions, params.security.eps_1, analysis.delta_provider)
    return _finish_pipeline(
        gains, bounds, qber_value, float(record.n_z), record.rounds, params, analysis
    )
