"""Role-filtered views of world state (fog of war).

A view is derived from a single world snapshot.  Everyone sees the map, all
exchange points, every friendly platform's position, and active threat rings.
Casualty details at a node appear only when a friendly platform or staffed
facility sits within the observation radius scaled by the day/night
visibility factor.  Hidden stream rates and unexpired death times never enter
any view, instructor included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import day_night_phase
from .scenario import EXCHANGE_ROLES, FacilityRole, Place
from .world import WorldState
from .worldmap import dist


@dataclass
class ObservationView:
    role: str
    time: float
    tick: int
    phase: str
    visibility_factor: float
    sees_all: bool
    blackout: bool
    own_platforms: list[dict] = field(default_factory=list)
    friendly_platforms: list[dict] = field(default_factory=list)
    facilities: list[dict] = field(default_factory=list)
    rings: list[dict] = field(default_factory=list)
    casevac_requests: list[dict] = field(default_factory=list)
    score: dict | None = None  # instructor only

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "time": self.time,
            "tick": self.tick,
            "phase": self.phase,
            "visibility_factor": self.visibility_factor,
            "sees_all": self.sees_all,
            "blackout": self.blackout,
            "own_platforms": self.own_platforms,
            "friendly_platforms": self.friendly_platforms,
            "facilities": self.facilities,
            "rings": self.rings,
            "casevac_requests": self.casevac_requests,
            "score": self.score,
        }


def _patient_brief(world: WorldState, pid: str) -> dict:
    p = world.patients[pid]
    return {
        "id": p.id,
        "precedence": p.precedence.value,
        "kind": p.kind.value,
        "treated": p.treated,
        "t0": p.t0,
        "next_role": p.highest_role + 1,
        "claimed": pid in world.claims,
    }


def _counts(world: WorldState, pids: list[str]) -> dict:
    out = {"total": 0, "urgent": 0, "priority": 0, "litter": 0, "ambulatory": 0}
    for pid in pids:
        p = world.patients[pid]
        out["total"] += 1
        out[p.precedence.value] += 1
        out[p.kind.value] += 1
    return out


def view_for(world: WorldState, tick: int, now: float, role: str) -> ObservationView:
    scenario = world.scenario
    if role not in scenario.roles:
        raise ValueError(f"unknown role '{role}'")
    perms = scenario.roles[role].permissions
    sees_all = perms.sees_all
    phase, factor = day_night_phase(now, scenario.day_night)
    radius = scenario.observation.radius_km * factor

    # sensor positions: every friendly platform and every staffed (non-CCP)
    # facility lights up its surroundings; collection points do not self-report
    sensors: list[tuple[float, float]] = []
    for p in world.platforms.values():
        sensors.append(world.platform_position(p, now))
    for f in world.facilities.values():
        if f.cfg.role != FacilityRole.CCP:
            sensors.append(f.position(now))

    def node_visible(pos: tuple[float, float]) -> bool:
        if sees_all:
            return True
        return any(dist(pos, s) <= radius for s in sensors)

    view = ObservationView(
        role=role,
        time=now,
        tick=tick,
        phase=phase.value,
        visibility_factor=factor,
        sees_all=sees_all,
        blackout=world.blackout_active(now),
    )

    for p in world.platforms.values():
        x, y = world.platform_position(p, now)
        base = {
            "id": p.id,
            "owner": p.owner,
            "class": p.spec.platform_class.value,
            "x": x,
            "y": y,
            "status": p.status,
            "at": p.at_facility,
            "node": p.spot.node if p.route is None else None,
        }
        if p.owner == role or sees_all:
            base.update(
                {
                    "callsign": p.callsign,
                    "dest": p.dest_ref,
                    "eta_min": p.arrival_min(),
                    "manifest": [_patient_brief(world, pid) for pid in p.manifest],
                    "litter_capacity": p.spec.litter_capacity,
                    "ambulatory_capacity": p.spec.ambulatory_capacity,
                    "conversion": p.spec.conversion,
                    "medevac": p.spec.medevac,
                    "casevac_expires": p.casevac_expires,
                    "busy_until": p.busy_until,
                }
            )
            view.own_platforms.append(base)
        else:
            view.friendly_platforms.append(base)

    for f in world.facilities.values():
        x, y = f.position(now)
        visible = node_visible((x, y))
        rec = {
            "id": f.cfg.id,
            "role": f.cfg.role.value,
            "node": f.spot.node,
            "x": x,
            "y": y,
            "active": f.ccp_active,
            "mobile": f.cfg.mobile,
            "owner": f.cfg.owner,
            "moving": f.route is not None,
            "pad_slots": f.cfg.pad_slots,
            "pad_occupied": list(f.pad_occupied),
            "pad_queue": list(f.pad_queue),
            "counts": _counts(world, f.patients) if visible else None,
            "patients": [_patient_brief(world, pid) for pid in f.patients] if visible else None,
        }
        view.facilities.append(rec)

    view.rings = [r.to_dict() for r in world.active_rings(now)]
    for req in world.casevac_requests.values():
        if sees_all or req.role == role:
            view.casevac_requests.append({"id": req.id, "role": req.role, "status": req.status, "details": req.details})
    if sees_all:
        t = world.totals
        view.score = {
            "score": t.score,
            "saves": t.saves,
            "deaths": t.deaths,
            "alive": t.spawned - t.deaths - t.saves,
            "spawned": t.spawned,
        }
    return view


# ---------------------------------------------------------------------------
# event stream filtering

_SENSITIVE_PATIENT_FIELDS = ("t_death1", "t_death2")

_ALWAYS_PUBLIC = frozenset(
    {
        "run_started",
        "run_ended",
        "day_phase",
        "ccp_active",
        "ring_spawned",
        "ring_expired",
        "blackout_set",
        "departed",
        "arrived",
        "halted",
        "pad_occupied",
        "pad_queued",
        "pad_freed",
        "platform_spawned",
        "platform_despawned",
        "dead_removed",
        "loaded",
        "unloaded",
        "transferred",
        "delivered_role3",
    }
)

_OWN_ONLY = frozenset({"action_accepted", "action_rejected"})
_INSTRUCTOR_ONLY = frozenset({"inject_applied", "inject_rejected"})
_CASEVAC_KINDS = frozenset({"casevac_requested", "casevac_granted", "casevac_denied"})


def scrub_event(ev_dict: dict) -> dict:
    """Strip fields no client may ever receive (sampled death times)."""
    data = ev_dict.get("data", {})
    if any(k in data for k in _SENSITIVE_PATIENT_FIELDS):
        data = {k: v for k, v in data.items() if k not in _SENSITIVE_PATIENT_FIELDS}
        ev_dict = {**ev_dict, "data": data}
    return ev_dict


def visible_events(world: WorldState, now: float, role: str, events: list[dict]) -> list[dict]:
    """The slice of an event batch a role's client may see, scrubbed."""
    perms = world.scenario.roles[role].permissions
    if perms.sees_all:
        return [scrub_event(ev) for ev in events]
    scenario = world.scenario
    phase, factor = day_night_phase(now, scenario.day_night)
    radius = scenario.observation.radius_km * factor
    sensors = [world.platform_position(p, now) for p in world.platforms.values()]
    sensors += [f.position(now) for f in world.facilities.values() if f.cfg.role != FacilityRole.CCP]

    def node_visible(fid: str | None) -> bool:
        if fid is None or fid not in world.facilities:
            return False
        return any(dist(world.facilities[fid].position(now), s) <= radius for s in sensors)

    out = []
    for ev in events:
        kind = ev["kind"]
        if kind in _INSTRUCTOR_ONLY:
            continue
        if kind in _OWN_ONLY:
            if ev.get("actor") == role:
                out.append(scrub_event(ev))
            continue
        if kind in _CASEVAC_KINDS:
            if ev["data"].get("role") == role or any(
                r.id == ev["data"].get("request") and r.role == role for r in world.casevac_requests.values()
            ):
                out.append(scrub_event(ev))
            continue
        if kind in ("patient_spawned", "died", "patient_treated"):
            site = ev["data"].get("ccp") or ev["data"].get("facility") or ev["data"].get("ref")
            where = ev["data"].get("where")
            if where == "onboard":
                out.append(scrub_event(ev))
            elif node_visible(site):
                out.append(scrub_event(ev))
            continue
        if kind in _ALWAYS_PUBLIC:
            out.append(scrub_event(ev))
    return out
