"""Seeded casualty processes: wave generation and two-stage mortality.

Urgent patients draw two coupled death clocks from a single uniform draw.
The first clock is the lifetime without initial aid-station care; the second
is the additional lifetime granted once that care is received.  Rates are
calibrated so 20% of urgent patients exceed the evacuation standard before
dying, matching the golden-hour planning figure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .rng import RngStream
from .scenario import CasualtyStreamParams, Patient, PatientKind, Precedence

CALIBRATION = -math.log(0.8)  # P(death before the standard) = 0.2


@dataclass(frozen=True)
class MortalityParams:
    """Exponential rates for the two death clocks, one per care stage."""

    lambda1: float  # per minute, before Role 1 care
    lambda2: float  # per minute, after Role 1 care
    e_s1: float
    e_s2: float

    @staticmethod
    def from_standards(e_s1: float, e_s2: float) -> "MortalityParams":
        if e_s1 <= 0 or e_s2 <= 0:
            raise ValueError("evacuation standards must be > 0")
        return MortalityParams(
            lambda1=CALIBRATION / e_s1,
            lambda2=CALIBRATION / e_s2,
            e_s1=e_s1,
            e_s2=e_s2,
        )


@dataclass(frozen=True)
class DeathTimes:
    t_death1: float  # minutes of life without Role 1 care
    t_death2: float  # additional minutes of life granted by Role 1 care


def sample_death_times(params: MortalityParams, u: float) -> DeathTimes:
    """Turn one uniform draw into the coupled pair of death times.

    Both clocks share the draw, so t_death2 / t_death1 == e_s2 / e_s1 for
    every patient: a patient frail on the first clock is frail on the second.
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"uniform draw must lie in (0, 1), got {u}")
    x = -math.log(u)
    return DeathTimes(t_death1=x / params.lambda1, t_death2=x / params.lambda2)


class MortalityState(str, Enum):
    ALIVE = "alive"
    DIED_PRE_ROLE1 = "died_pre_role1"
    DIED_PRE_ROLE2 = "died_pre_role2"
    SURVIVED_TO_ROLE2 = "survived_to_role2"


@dataclass(frozen=True)
class MortalityCheck:
    state: MortalityState
    at: float | None = None  # in-game minute of death, when dead


def check_mortality(p: Patient, now: float) -> MortalityCheck:
    """Evaluate the two death clocks for an urgent patient at time `now`.

    Before the patient reaches Role 1 only the first clock runs; after Role 1
    arrival only the second.  Reaching Role 2 ends mortality risk for good.
    """
    if p.precedence != Precedence.URGENT:
        raise ValueError(f"mortality applies to urgent patients only, got {p.id} ({p.precedence.value})")
    if p.t_death1 is None or p.t_death2 is None:
        raise ValueError(f"patient {p.id} has no sampled death times")
    if p.t1 is None:
        if now - p.t0 > p.t_death1:
            return MortalityCheck(MortalityState.DIED_PRE_ROLE1, at=p.t0 + p.t_death1)
        return MortalityCheck(MortalityState.ALIVE)
    if p.t2 is None:
        if now - p.t0 > (p.t1 - p.t0) + p.t_death2:
            return MortalityCheck(MortalityState.DIED_PRE_ROLE2, at=p.t1 + p.t_death2)
        return MortalityCheck(MortalityState.ALIVE)
    return MortalityCheck(MortalityState.SURVIVED_TO_ROLE2)


def death_deadline(p: Patient) -> float | None:
    """The in-game minute after which the patient dies if nothing changes."""
    if p.precedence != Precedence.URGENT or p.t2 is not None:
        return None
    if p.t1 is None:
        return p.t0 + p.t_death1
    return p.t1 + p.t_death2


@dataclass(frozen=True)
class PatientDraft:
    """A sampled casualty, before the engine assigns an id and spawns it."""

    precedence: Precedence
    kind: PatientKind
    t0: float
    t_death1: float | None
    t_death2: float | None


def _draw_patient(stream: CasualtyStreamParams, mortality: MortalityParams, rng: RngStream, t0: float) -> PatientDraft:
    # Draw order is part of the determinism contract: precedence, kind, then
    # the mortality uniform for urgent patients.
    urgent = rng.bernoulli(stream.urgent_fraction)
    litter = rng.bernoulli(stream.litter_fraction)
    d1 = d2 = None
    if urgent:
        dt = sample_death_times(mortality, rng.uniform())
        d1, d2 = dt.t_death1, dt.t_death2
    return PatientDraft(
        precedence=Precedence.URGENT if urgent else Precedence.PRIORITY,
        kind=PatientKind.LITTER if litter else PatientKind.AMBULATORY,
        t0=t0,
        t_death1=d1,
        t_death2=d2,
    )


def next_wave(
    stream: CasualtyStreamParams,
    mortality: MortalityParams,
    rng: RngStream,
    now: float,
    active: bool | None = None,
) -> tuple[float, list[PatientDraft]] | None:
    """Draw the next casualty wave after `now`, or None while the CCP is off.

    The inter-wave gap is exponential with mean interval / rate_multiplier;
    wave size is Poisson with a floor of one (an empty wave is meaningless).
    """
    if active is None:
        active = stream.active_at(now)
    if not active:
        return None
    gap = rng.exponential(stream.mean_wave_interval_min / stream.rate_multiplier)
    wave_time = now + gap
    size = max(1, rng.poisson(stream.mean_wave_size))
    patients = [_draw_patient(stream, mortality, rng, wave_time) for _ in range(size)]
    return wave_time, patients


def mascal_burst(
    stream: CasualtyStreamParams,
    mortality: MortalityParams,
    n: int,
    rng: RngStream,
    now: float,
    active: bool = True,
) -> list[PatientDraft]:
    """Instantiate n casualties immediately, using the stream's mix fractions."""
    if n < 1:
        raise ValueError(f"mass casualty size must be >= 1, got {n}")
    if not active:
        raise ValueError(f"CCP {stream.ccp} is inactive")
    return [_draw_patient(stream, mortality, rng, now) for _ in range(n)]
