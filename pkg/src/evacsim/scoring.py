"""Patient scoring and the post-run score screen.

Two scoring readings are implemented and logged per run.  LinearDecay awards
p_max scaled down linearly as time-to-surgical-care approaches the standard;
AsPrinted keeps the alternative algebraic form p_max * (1 - E_s / (T2 - T0)),
which instead grows with evacuation time.  LinearDecay is the default; both
clamp delivered-patient scores at a configurable floor.  A death always
scores the flat penalty, replacing p_max.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .scenario import DEATH_PENALTY, Patient, Place, PrecedenceSpec


class ScoringMode(str, Enum):
    LINEAR_DECAY = "linear_decay"
    AS_PRINTED = "as_printed"


def patient_score(
    p: Patient,
    spec: PrecedenceSpec,
    mode: ScoringMode,
    clamp_floor: float = 0.0,
) -> float:
    """Score one terminal patient (dead, or arrived at surgical care)."""
    if p.place == Place.DEAD:
        return DEATH_PENALTY
    if p.t2 is None:
        raise ValueError(f"patient {p.id} is not scoreable: alive without surgical-care arrival")
    elapsed = p.t2 - p.t0
    if mode == ScoringMode.LINEAR_DECAY:
        raw = spec.p_max * (1.0 - elapsed / spec.standard_min)
    else:
        if elapsed <= 0:
            return spec.p_max
        raw = spec.p_max * (1.0 - spec.standard_min / elapsed)
    return max(clamp_floor, raw)


@dataclass
class ScoreBoard:
    score: float = 0.0
    saves: int = 0  # arrived at the highest facility tier
    deaths: int = 0
    alive: int = 0  # still transiting the evacuation network
    spawned: int = 0


def score_screen(events: list[dict]) -> ScoreBoard:
    """Compute the end-of-run score screen purely from an event log."""
    board = ScoreBoard()
    mode = ScoringMode.LINEAR_DECAY
    clamp = 0.0
    specs: dict[str, tuple[float, float]] = {}
    meta: dict[str, tuple[str, float]] = {}  # patient -> (precedence, t0)
    for ev in events:
        kind = ev["kind"]
        d = ev["data"]
        if kind == "run_started":
            mode = ScoringMode(d["scoring_mode"])
            clamp = d.get("clamp_floor", 0.0)
            specs = {k: (v["p_max"], v["standard_min"]) for k, v in d["precedence"].items()}
        elif kind == "patient_spawned":
            board.spawned += 1
            meta[d["patient"]] = (d["precedence"], d["t0"])
        elif kind == "died":
            board.deaths += 1
            board.score += DEATH_PENALTY
        elif kind == "unloaded" and d.get("stamped") == "t2":
            for pid in d["patients"]:
                prec, t0 = meta[pid]
                p_max, standard = specs[prec]
                elapsed = ev["time"] - t0
                if mode == ScoringMode.LINEAR_DECAY:
                    raw = p_max * (1.0 - elapsed / standard)
                else:
                    raw = p_max if elapsed <= 0 else p_max * (1.0 - standard / elapsed)
                board.score += max(clamp, raw)
        elif kind == "delivered_role3":
            board.saves += 1
    board.alive = board.spawned - board.deaths - board.saves
    return board
