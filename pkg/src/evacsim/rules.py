"""Doctrinal legality of player actions.

Every check is a pure function over an immutable world snapshot, returning
Allowed or Rejected(reason); only the engine's single writer applies effects.
Core constraints: progressive roles of care with no level skipping, litter /
ambulatory capacity with seat conversion for mixed loads, no patient left
unattended at an exchange point, and FIFO pad queues at single-pad sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .scenario import CARE_LEVEL, EXCHANGE_ROLES, FacilityRole, PatientKind, Place
from .worldmap import AIR_CLASSES


@dataclass(frozen=True)
class ActionRequest:
    actor: str
    platform: str  # platform id, or a mobile facility id for dispatch
    verb: str  # dispatch | load | unload | transfer_to | wait | request_casevac
    params: dict = field(default_factory=dict)
    issued_at: float = 0.0
    action_id: str | None = None  # caller correlation token

    def to_dict(self) -> dict:
        return {
            "actor": self.actor,
            "platform": self.platform,
            "verb": self.verb,
            "params": self.params,
            "issued_at": self.issued_at,
            "action_id": self.action_id,
        }

    @staticmethod
    def from_dict(d: dict) -> "ActionRequest":
        return ActionRequest(
            actor=d["actor"],
            platform=d["platform"],
            verb=d["verb"],
            params=d.get("params", {}),
            issued_at=d.get("issued_at", 0.0),
            action_id=d.get("action_id"),
        )


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.allowed


ALLOWED = Decision(True)


def rejected(reason: str) -> Decision:
    return Decision(False, reason)


# ---------------------------------------------------------------------------
# capacity arithmetic


def occupancy(spec, litters: int, ambulatory: int) -> tuple[float, float]:
    """(consumed seat-units, total seat-units) under the litter conversion rule."""
    total_units = max(spec.litter_capacity * spec.conversion, float(spec.ambulatory_capacity))
    used = litters * spec.conversion + ambulatory
    return used, total_units


def fits(spec, litters: int, ambulatory: int) -> Decision:
    if litters > spec.litter_capacity:
        return rejected(f"capacity: {litters} litter > {spec.litter_capacity} litter slots")
    if ambulatory > spec.ambulatory_capacity:
        return rejected(f"capacity: {ambulatory} ambulatory > {spec.ambulatory_capacity} seats")
    used, total = occupancy(spec, litters, ambulatory)
    if used > total:
        return rejected(f"capacity: converted occupancy {used:g} > {total:g} seat-units")
    return ALLOWED


def manifest_counts(world, platform) -> tuple[int, int]:
    litters = sum(1 for pid in platform.manifest if world.patients[pid].kind == PatientKind.LITTER)
    return litters, len(platform.manifest) - litters


# ---------------------------------------------------------------------------
# stationing helpers


def _on_site(world, platform) -> Decision:
    if platform.status == "enroute":
        return rejected("not on site")
    if platform.status == "busy":
        return rejected("busy")
    if platform.status == "queued":
        return rejected("waiting in pad queue")
    if platform.at_facility is None:
        return rejected("not at a facility")
    return ALLOWED


def _needs_pad(world, platform, facility) -> bool:
    return (
        platform.spec.platform_class in AIR_CLASSES
        and facility.cfg.pad_slots is not None
    )


def pad_has_room(world, facility) -> bool:
    return facility.cfg.pad_slots is None or len(facility.pad_occupied) < facility.cfg.pad_slots


def attending_platforms(world, point_id: str) -> list:
    return [p for p in world.platforms.values() if p.at_facility == point_id]


# ---------------------------------------------------------------------------
# verb checks


def check_dispatch(world, platform_id: str, now: float) -> Decision:
    """May this unit depart right now?  (Route feasibility is checked separately.)"""
    unit = world.platforms.get(platform_id)
    if unit is None:
        fac = world.facilities.get(platform_id)
        if fac is None or not fac.cfg.mobile:
            return rejected("unknown platform")
        if fac.route is not None:
            return rejected("already underway")
        return ALLOWED
    if unit.status == "busy":
        return rejected("busy")
    if unit.status == "enroute":
        return rejected("already en route")
    here = unit.at_facility
    if here is not None:
        fac = world.facilities[here]
        if fac.cfg.role in EXCHANGE_ROLES and fac.patients:
            others = [p for p in attending_platforms(world, here) if p.id != platform_id]
            if not others:
                return rejected("attended transfer: patients would be left unattended")
    return ALLOWED


def check_load(world, platform_id: str, patient_ids: list[str], now: float) -> Decision:
    platform = world.platforms.get(platform_id)
    if platform is None:
        return rejected("unknown platform")
    on_site = _on_site(world, platform)
    if not on_site:
        return on_site
    if not patient_ids:
        return rejected("empty load")
    site = world.facilities[platform.at_facility]
    if _needs_pad(world, platform, site) and platform_id not in site.pad_occupied:
        return rejected("no pad slot held")
    if site.cfg.role == FacilityRole.ROLE3:
        return rejected("patients at the highest role of care are not evacuated further")
    litters, ambs = manifest_counts(world, platform)
    for pid in patient_ids:
        p = world.patients.get(pid)
        if p is None:
            return rejected(f"unknown patient {pid}")
        if p.terminal:
            return rejected(f"patient {pid} is no longer evacuable")
        if p.place_ref != site.cfg.id or p.place not in (Place.AT_CCP, Place.AT_FACILITY, Place.AT_POINT):
            return rejected(f"patient {pid} is not at {site.cfg.id}")
        if pid in world.claims:
            return rejected(f"patient {pid} already being moved")
        if p.place == Place.AT_FACILITY and not p.treated:
            return rejected(f"patient {pid} still in treatment")
        if p.kind == PatientKind.LITTER:
            litters += 1
        else:
            ambs += 1
    return fits(platform.spec, litters, ambs)


def check_unload(world, platform_id: str, patient_ids: list[str], now: float) -> Decision:
    platform = world.platforms.get(platform_id)
    if platform is None:
        return rejected("unknown platform")
    on_site = _on_site(world, platform)
    if not on_site:
        return on_site
    if not patient_ids:
        return rejected("empty unload")
    site = world.facilities[platform.at_facility]
    if _needs_pad(world, platform, site) and platform_id not in site.pad_occupied:
        return rejected("no pad slot held")
    role = site.cfg.role
    if role == FacilityRole.CCP:
        return rejected("cannot unload at a collection point")
    for pid in patient_ids:
        if pid not in platform.manifest:
            return rejected(f"patient {pid} not aboard")
        p = world.patients[pid]
        if p.place == Place.DEAD:
            return rejected(f"patient {pid} is dead; remains are offloaded automatically")
        if role in CARE_LEVEL:
            if p.highest_role != CARE_LEVEL[role] - 1:
                return rejected(
                    f"continuity of care: patient {pid} at level {p.highest_role} "
                    f"cannot skip to {role.value}"
                )
    if role in CARE_LEVEL and site.cfg.bed_capacity is not None:
        incoming = len(patient_ids) + sum(
            len(op.patients) for op in world.ops.values() if op.kind == "unload" and op.site == site.cfg.id
        )
        if len(site.patients) + incoming > site.cfg.bed_capacity:
            return rejected(f"beds full at {site.cfg.id}")
    return ALLOWED


def check_transfer(world, from_id: str, to_id: str, patient_ids: list[str], now: float) -> Decision:
    src = world.platforms.get(from_id)
    dst = world.platforms.get(to_id)
    if src is None or dst is None:
        return rejected("unknown platform")
    if from_id == to_id:
        return rejected("transfer to self")
    if not patient_ids:
        return rejected("empty transfer")
    for plat in (src, dst):
        ok = _on_site(world, plat)
        if not ok:
            return Decision(False, f"{plat.id}: {ok.reason}")
    if src.at_facility != dst.at_facility:
        return rejected("platforms are not at the same exchange point")
    site = world.facilities[src.at_facility]
    if site.cfg.role not in EXCHANGE_ROLES:
        return rejected("transfers happen at exchange points")
    litters, ambs = manifest_counts(world, dst)
    for pid in patient_ids:
        if pid not in src.manifest:
            return rejected(f"patient {pid} not aboard {from_id}")
        p = world.patients[pid]
        if p.place == Place.DEAD:
            return rejected(f"patient {pid} is dead")
        if pid in world.claims:
            return rejected(f"patient {pid} already being moved")
        if p.kind == PatientKind.LITTER:
            litters += 1
        else:
            ambs += 1
    return fits(dst.spec, litters, ambs)


def load_duration_min(world, patient_ids: list[str]) -> float:
    dur = world.scenario.durations
    total = 0.0
    for pid in patient_ids:
        kind = world.patients[pid].kind
        total += dur.load_litter_min if kind == PatientKind.LITTER else dur.load_ambulatory_min
    return total


def transfer_duration_min(world, patient_ids: list[str]) -> float:
    return world.scenario.durations.transfer_per_patient_min * len(patient_ids)


def dwell_duration_min(world, role: FacilityRole, precedence=None) -> float | None:
    dur = world.scenario.durations
    if role == FacilityRole.ROLE1:
        if precedence is not None and precedence.value == "urgent" and dur.dwell_role1_urgent_min is not None:
            return dur.dwell_role1_urgent_min
        return dur.dwell_role1_min
    if role == FacilityRole.ROLE2:
        return dur.dwell_role2_min
    return None
