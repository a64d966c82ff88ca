"""Statistical-fluctuation machinery for observed click counts.

Observed counts are converted into bounds on their expected values with a
chosen concentration inequality, then rescaled into bounds on gains.  Six
bounds feed the phase-error estimate: upper bounds for both decoys at both
monitoring ports, plus lower bounds for both decoys at the constructive port,
each holding up to its own failure probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .params import ValidationError

__all__ = [
    "CountRecord",
    "BoundedValue",
    "DELTA_PROVIDERS",
    "delta_hoeffding",
    "delta_observed",
    "validate_record",
    "bound_expected_count",
    "bound_gain",
]

#: Required fields of every record, in canonical order.
CORE_COUNT_FIELDS = (
    "rounds",
    "n_z",
    "n_sent_alpha_alpha",
    "n_sent_vac",
    "n_aa_m0",
    "n_aa_m1",
    "n_vac_m0",
    "n_vac_m1",
)


@dataclass(frozen=True)
class CountRecord:
    """Integer click tallies from one protocol session.

    The first eight fields are required and round-trip through count-log
    files.  The optional per-class fields are filled by the simulator and
    allow empirical estimation of every gain; replayed logs leave them at
    None.
    """

    rounds: int
    n_z: int
    n_sent_alpha_alpha: int
    n_sent_vac: int
    n_aa_m0: int
    n_aa_m1: int
    n_vac_m0: int
    n_vac_m1: int
    n_sent_0z: int | None = None
    n_sent_1z: int | None = None
    n_0z_tau0: int | None = None
    n_0z_tau1: int | None = None
    n_1z_tau0: int | None = None
    n_1z_tau1: int | None = None
    n_0z_m0: int | None = None
    n_0z_m1: int | None = None
    n_1z_m0: int | None = None
    n_1z_m1: int | None = None


@dataclass(frozen=True)
class BoundedValue:
    """A quantity with optional lower/upper bounds and a failure probability."""

    observed: float
    lower: float | None
    upper: float | None
    failure_prob: float

    def __post_init__(self) -> None:
        if not (0.0 < self.failure_prob < 1.0):
            raise ValueError(
                f"failure_prob must lie in (0, 1), got {self.failure_prob}"
            )
        if self.lower is not None and self.lower > self.observed:
            raise ValueError(
                f"lower bound {self.lower} exceeds observed value {self.observed}"
            )
        if self.upper is not None and self.upper < self.observed:
            raise ValueError(
                f"upper bound {self.upper} is below observed value {self.observed}"
            )


def validate_record(record: CountRecord) -> CountRecord:
    """Check count invariants, collecting every violation before raising.

    Click counts must be non-negative integers not exceeding the emission
    count of their class, and emissions cannot exceed the round total.
    """
    out: list[str] = []

    def check_int(name: str, value: int | None) -> None:
        if value is None:
            return
        if not isinstance(value, int) or isinstance(value, bool):
            out.append(f"{name} must be an integer, got {value!r}")
        elif value < 0:
            out.append(f"{name} must be non-negative, got {value}")

    for name in CORE_COUNT_FIELDS:
        check_int(name, getattr(record, name))
    for name in (
        "n_sent_0z", "n_sent_1z", "n_0z_tau0", "n_0z_tau1", "n_1z_tau0",
        "n_1z_tau1", "n_0z_m0", "n_0z_m1", "n_1z_m0", "n_1z_m1",
    ):
        check_int(name, getattr(record, name))
    if out:
        raise ValidationError(out)

    def check_le(click_name: str, click: int | None, cap_name: str, cap: int | None) -> None:
        if click is not None and cap is not None and click > cap:
            out.append(f"{click_name} = {click} exceeds {cap_name} = {cap}")

    aa = record.n_sent_alpha_alpha
    check_le("n_aa_m0", record.n_aa_m0, "n_sent_alpha_alpha", aa)
    check_le("n_aa_m1", record.n_aa_m1, "n_sent_alpha_alpha", aa)
    check_le("n_vac_m0", record.n_vac_m0, "n_sent_vac", record.n_sent_vac)
    check_le("n_vac_m1", record.n_vac_m1, "n_sent_vac", record.n_sent_vac)
    if aa + record.n_sent_vac > record.rounds:
        out.append(
            f"decoy emissions {aa} + {record.n_sent_vac} "
            f"exceed rounds = {record.rounds}"
        )
    n_signal: int | None
    if record.n_sent_0z is not None and record.n_sent_1z is not None:
        n_signal = record.n_sent_0z + record.n_sent_1z
        total = n_signal + aa + record.n_sent_vac
        if total != record.rounds:
            out.append(f"per-class emissions sum to {total}, expected rounds = {record.rounds}")
    else:
        n_signal = record.rounds - aa - record.n_sent_vac
    check_le("n_z", record.n_z, "signal emissions", n_signal)
    for click_name, cap_name in (
        ("n_0z_tau0", "n_sent_0z"), ("n_0z_tau1", "n_sent_0z"),
        ("n_0z_m0", "n_sent_0z"), ("n_0z_m1", "n_sent_0z"),
        ("n_1z_tau0", "n_sent_1z"), ("n_1z_tau1", "n_sent_1z"),
        ("n_1z_m0", "n_sent_1z"), ("n_1z_m1", "n_sent_1z"),
    ):
        check_le(click_name, getattr(record, click_name), cap_name, getattr(record, cap_name))
    if out:
        raise ValidationError(out)
    return record


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < 1.0):
        raise ValueError(f"failure probability must lie in (0, 1), got {eps}")


def delta_hoeffding(n: float, eps: float) -> float:
    """Fluctuation allowance sqrt((n/2) ln(1/eps)) for n bounded trials.

    Worst-case over the unknown success probability; monotone increasing in n
    and decreasing in eps.
    """
    _check_eps(eps)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return math.sqrt(0.5 * n * math.log(1.0 / eps))


def delta_observed(observed: float, eps: float) -> float:
    """Fluctuation allowance sqrt(2 X ln(1/eps)) scaled by the observed count.

    Variance-adapted alternative to delta_hoeffding: for rare clicks the
    emission count wildly overstates the spread, while the observed count
    tracks it at Poisson scale.
    """
    _check_eps(eps)
    return math.sqrt(2.0 * max(observed, 0.0) * math.log(1.0 / eps))


#: A provider maps (observed count, emission count, eps) to a deviation delta.
DeltaProvider = Callable[[float, float, float], float]

DELTA_PROVIDERS: dict[str, DeltaProvider] = {
    "hoeffding": lambda observed, n_emitted, eps: delta_hoeffding(n_emitted, eps),
    "observed": lambda observed, n_emitted, eps: delta_observed(observed, eps),
}


def bound_expected_count(
    observed: float,
    n_emitted: float,
    eps: float,
    direction: str = "both",
    *,
    provider: str | DeltaProvider = "hoeffding",
) -> BoundedValue:
    """Bound the expected count behind an observed one.

    upper = observed + delta and lower = max(0, observed - delta), each
    holding with failure probability at most eps.  direction selects which
    sides to populate ("upper", "lower", or "both"); provider names an entry
    of DELTA_PROVIDERS or is a callable with the same signature.
    """
    if observed < 0:
        raise ValueError(f"observed count must be non-negative, got {observed}")
    if observed > n_emitted:
        raise ValueError(
            f"observed count {observed} exceeds emission count {n_emitted}"
        )
    if direction not in ("upper", "lower", "both"):
        raise ValueError(f"direction must be 'upper', 'lower', or 'both', got {direction!r}")
    if isinstance(provider, str):
        if provider not in DELTA_PROVIDERS:
            raise ValueError(
                f"unknown provider {provider!r}, expected one of {tuple(DELTA_PROVIDERS)}"
            )
        fn = DELTA_PROVIDERS[provider]
    else:
        fn = provider
    delta = fn(observed, n_emitted, eps)
    upper = observed + delta if direction in ("upper", "both") else None
    lower = max(0.0, observed - delta) if direction in ("lower", "both") else None
    return BoundedValue(observed=observed, lower=lower, upper=upper, failure_prob=eps)


def bound_gain(bounded_count: BoundedValue, n_emitted: float) -> BoundedValue:
    """Rescale count bounds into gain bounds, clamped to [0, 1]."""
    if n_emitted == 0:
        raise ZeroDivisionError(
            "n_emitted is zero: the decoy class was never sent, gains undefined"
        )

    def scale(value: float | None) -> float | None:
        if value is None:
            return None
        return min(1.0, max(0.0, value / n_emitted))

    return BoundedValue(
        observed=scale(bounded_count.observed),
        lower=scale(bounded_count.lower),
        upper=scale(bounded_count.upper),
        failure_prob=bounded_count.failure_prob,
    )
