"""Mutable runtime world state and the event-fold that reconstructs it.

Every state change in a run is carried by exactly one event, and the engine
mutates the world only through `apply_event`.  Folding an event log over a
fresh world therefore reproduces the live world exactly; the engine's
fold-check mode exploits that to catch any out-of-band mutation.

Continuous quantities (positions of moving platforms and ships) are derived
from route + clock, never stored per tick, which keeps the log compact and
tick-rate independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .scenario import (
    DEATH_PENALTY,
    EXCHANGE_ROLES,
    Facility,
    FacilityRole,
    Patient,
    PatientKind,
    Place,
    PlatformSpec,
    Precedence,
    Scenario,
)
from .scoring import ScoringMode, patient_score
from .worldmap import PlatformClass, Route, Spot, ThreatRing


@dataclass
class PlatformState:
    id: str
    spec: PlatformSpec
    owner: str
    callsign: str
    spot: Spot
    at_facility: str | None = None
    status: str = "idle"  # idle | enroute | busy | queued | halted
    route: Route | None = None
    depart_min: float | None = None
    dest_ref: str | None = None  # facility or node id being travelled to
    manifest: list[str] = field(default_factory=list)
    busy_op: str | None = None
    busy_until: float | None = None
    casevac_expires: float | None = None

    def progress_km(self, now: float) -> float:
        if self.route is None or self.depart_min is None:
            return 0.0
        return max(0.0, (now - self.depart_min) / 60.0 * self.route.speed_kmh)

    def arrival_min(self) -> float | None:
        if self.route is None or self.depart_min is None:
            return None
        return self.depart_min + self.route.eta_min


@dataclass
class FacilityState:
    cfg: Facility
    spot: Spot
    ccp_active: bool = True
    patients: list[str] = field(default_factory=list)
    pad_occupied: list[str] = field(default_factory=list)
    pad_queue: list[str] = field(default_factory=list)
    route: Route | None = None  # mobile facilities underway
    depart_min: float | None = None
    dest_ref: str | None = None

    def progress_km(self, now: float) -> float:
        if self.route is None or self.depart_min is None:
            return 0.0
        return max(0.0, (now - self.depart_min) / 60.0 * self.route.speed_kmh)

    def arrival_min(self) -> float | None:
        if self.route is None or self.depart_min is None:
            return None
        return self.depart_min + self.route.eta_min

    def position(self, now: float) -> tuple[float, float]:
        if self.route is not None and self.depart_min is not None:
            return self.route.position_at(self.progress_km(now))
        return (self.spot.x, self.spot.y)


@dataclass
class PendingOp:
    id: str
    kind: str  # load | unload | transfer | dwell
    completes_min: float
    platform: str | None = None
    to_platform: str | None = None
    site: str | None = None
    patients: list[str] = field(default_factory=list)


@dataclass
class Totals:
    spawned: int = 0
    deaths: int = 0
    saves: int = 0
    score: float = 0.0


@dataclass
class CasevacRequest:
    id: str
    role: str
    details: str
    status: str = "pending"  # pending | granted | denied


@dataclass
class WorldState:
    scenario: Scenario
    scoring_mode: ScoringMode
    patients: dict[str, Patient] = field(default_factory=dict)
    platforms: dict[str, PlatformState] = field(default_factory=dict)
    facilities: dict[str, FacilityState] = field(default_factory=dict)
    rings: dict[str, ThreatRing] = field(default_factory=dict)
    ops: dict[str, PendingOp] = field(default_factory=dict)
    claims: dict[str, str] = field(default_factory=dict)  # patient -> op id
    blackouts: list[tuple[float, float]] = field(default_factory=list)
    casevac_requests: dict[str, CasevacRequest] = field(default_factory=dict)
    totals: Totals = field(default_factory=Totals)
    finished: bool = False

    def platform_position(self, p: PlatformState, now: float) -> tuple[float, float]:
        if p.route is not None and p.depart_min is not None:
            return p.route.position_at(p.progress_km(now))
        if p.at_facility is not None:
            return self.facilities[p.at_facility].position(now)
        return (p.spot.x, p.spot.y)

    def active_rings(self, now: float) -> list[ThreatRing]:
        return [r for r in self.rings.values() if r.active_at(now)]

    def blackout_active(self, now: float) -> bool:
        return any(a <= now < b for a, b in self.blackouts)

    def patients_at(self, facility_id: str) -> list[Patient]:
        return [self.patients[pid] for pid in self.facilities[facility_id].patients]

    def platforms_at(self, facility_id: str) -> list[PlatformState]:
        return [p for p in self.platforms.values() if p.at_facility == facility_id]


def build_world(scenario: Scenario, scoring_mode: ScoringMode) -> WorldState:
    world = WorldState(scenario=scenario, scoring_mode=scoring_mode)
    for f in scenario.facilities.values():
        world.facilities[f.id] = FacilityState(
            cfg=f,
            spot=Spot.at_node(scenario.world, f.node),
            ccp_active=f.active if f.role != FacilityRole.CCP else _initial_ccp_active(scenario, f),
        )
    for inst in scenario.platforms:
        spec = scenario.platform_specs[inst.spec_name]
        fac = next((f for f in scenario.facilities.values() if f.node == inst.start_node), None)
        world.platforms[inst.id] = PlatformState(
            id=inst.id,
            spec=spec,
            owner=inst.owner,
            callsign=f"{spec.callsign_prefix}-{inst.id}",
            spot=Spot.at_node(scenario.world, inst.start_node),
            at_facility=fac.id if fac else None,
        )
    return world


def _initial_ccp_active(scenario: Scenario, f: Facility) -> bool:
    stream = scenario.ccp_streams.get(f.id)
    if stream is None:
        return f.active
    return f.active and stream.active_at(0.0)


# ---------------------------------------------------------------------------
# event application


def apply_event(world: WorldState, kind: str, time: float, data: dict) -> None:
    handler = _HANDLERS.get(kind)
    if handler is not None:
        handler(world, time, data)


def _on_patient_spawned(world: WorldState, time: float, d: dict) -> None:
    p = Patient(
        id=d["patient"],
        precedence=Precedence(d["precedence"]),
        kind=PatientKind(d["kind"]),
        origin_ccp=d["ccp"],
        t0=d["t0"],
        t_death1=d.get("t_death1"),
        t_death2=d.get("t_death2"),
        place=Place.AT_CCP,
        place_ref=d["ccp"],
    )
    world.patients[p.id] = p
    world.facilities[d["ccp"]].patients.append(p.id)
    world.totals.spawned += 1


def _on_ccp_active(world: WorldState, time: float, d: dict) -> None:
    world.facilities[d["facility"]].ccp_active = d["active"]


def _on_ring_spawned(world: WorldState, time: float, d: dict) -> None:
    ring = ThreatRing.from_dict(d["ring"])
    world.rings[ring.id] = ring


def _on_ring_expired(world: WorldState, time: float, d: dict) -> None:
    world.rings.pop(d["ring"], None)


def _on_blackout_set(world: WorldState, time: float, d: dict) -> None:
    world.blackouts.append((d["start_min"], d["end_min"]))


def _on_casevac_requested(world: WorldState, time: float, d: dict) -> None:
    world.casevac_requests[d["request"]] = CasevacRequest(id=d["request"], role=d["role"], details=d.get("details", ""))


def _on_casevac_granted(world: WorldState, time: float, d: dict) -> None:
    req = world.casevac_requests.get(d["request"])
    if req:
        req.status = "granted"


def _on_casevac_denied(world: WorldState, time: float, d: dict) -> None:
    req = world.casevac_requests.get(d["request"])
    if req:
        req.status = "denied"


def _on_platform_spawned(world: WorldState, time: float, d: dict) -> None:
    spec = world.scenario.platform_specs[d["spec"]]
    fac = next((f for f in world.scenario.facilities.values() if f.node == d["node"]), None)
    world.platforms[d["platform"]] = PlatformState(
        id=d["platform"],
        spec=spec,
        owner=d["owner"],
        callsign=f"{spec.callsign_prefix}-{d['platform']}",
        spot=Spot.at_node(world.scenario.world, d["node"]),
        at_facility=fac.id if fac else None,
        casevac_expires=d.get("expires_min"),
    )


def _on_platform_despawned(world: WorldState, time: float, d: dict) -> None:
    p = world.platforms.pop(d["platform"], None)
    if p is not None and p.at_facility is not None:
        fac = world.facilities[p.at_facility]
        if p.id in fac.pad_occupied:
            fac.pad_occupied.remove(p.id)
        if p.id in fac.pad_queue:
            fac.pad_queue.remove(p.id)


def _unit(world: WorldState, ref: str):
    return world.platforms.get(ref) or world.facilities[ref]


def _on_departed(world: WorldState, time: float, d: dict) -> None:
    u = _unit(world, d["unit"])
    u.route = Route.from_dict(d["route"])
    u.depart_min = time
    u.dest_ref = d["dest"]
    if isinstance(u, PlatformState):
        u.at_facility = None
        u.status = "enroute"


def _on_arrived(world: WorldState, time: float, d: dict) -> None:
    u = _unit(world, d["unit"])
    u.route = None
    u.depart_min = None
    u.dest_ref = None
    u.spot = Spot.from_dict(d["spot"])
    if isinstance(u, PlatformState):
        u.at_facility = d.get("facility")
        u.status = "idle"


def _on_halted(world: WorldState, time: float, d: dict) -> None:
    u = _unit(world, d["unit"])
    u.route = None
    u.depart_min = None
    u.dest_ref = None
    u.spot = Spot.from_dict(d["spot"])
    if isinstance(u, PlatformState):
        u.status = "halted"


def _on_pad_occupied(world: WorldState, time: float, d: dict) -> None:
    fac = world.facilities[d["facility"]]
    if d["platform"] in fac.pad_queue:
        fac.pad_queue.remove(d["platform"])
    fac.pad_occupied.append(d["platform"])
    world.platforms[d["platform"]].status = "idle"


def _on_pad_queued(world: WorldState, time: float, d: dict) -> None:
    fac = world.facilities[d["facility"]]
    fac.pad_queue.append(d["platform"])
    world.platforms[d["platform"]].status = "queued"


def _on_pad_freed(world: WorldState, time: float, d: dict) -> None:
    fac = world.facilities[d["facility"]]
    if d["platform"] in fac.pad_occupied:
        fac.pad_occupied.remove(d["platform"])
    if d["platform"] in fac.pad_queue:
        fac.pad_queue.remove(d["platform"])


def _start_op(world: WorldState, d: dict, kind: str) -> None:
    op = PendingOp(
        id=d["op"],
        kind=kind,
        completes_min=d["completes_min"],
        platform=d.get("platform"),
        to_platform=d.get("to_platform"),
        site=d.get("site"),
        patients=list(d.get("patients", [])),
    )
    world.ops[op.id] = op
    for pid in op.patients:
        world.claims[pid] = op.id
    for ref in (op.platform, op.to_platform):
        if ref is not None:
            plat = world.platforms[ref]
            plat.status = "busy"
            plat.busy_op = op.id
            plat.busy_until = op.completes_min


def _finish_op(world: WorldState, op_id: str) -> PendingOp | None:
    op = world.ops.pop(op_id, None)
    if op is None:
        return None
    for pid in op.patients:
        if world.claims.get(pid) == op_id:
            del world.claims[pid]
    for ref in (op.platform, op.to_platform):
        if ref is not None and ref in world.platforms:
            plat = world.platforms[ref]
            if plat.busy_op == op_id:
                plat.status = "idle"
                plat.busy_op = None
                plat.busy_until = None
    return op


def _on_load_started(world: WorldState, time: float, d: dict) -> None:
    _start_op(world, d, "load")


def _on_loaded(world: WorldState, time: float, d: dict) -> None:
    _finish_op(world, d["op"])
    fac = world.facilities[d["site"]]
    plat = world.platforms[d["platform"]]
    for pid in d["patients"]:
        if pid in fac.patients:
            fac.patients.remove(pid)
        p = world.patients[pid]
        p.place = Place.ONBOARD
        p.place_ref = plat.id
        p.treated = False
        plat.manifest.append(pid)


def _on_unload_started(world: WorldState, time: float, d: dict) -> None:
    _start_op(world, d, "unload")


def _on_unloaded(world: WorldState, time: float, d: dict) -> None:
    _finish_op(world, d["op"])
    fac = world.facilities[d["site"]]
    plat = world.platforms[d["platform"]]
    stamped = d.get("stamped")
    for pid in d["patients"]:
        if pid in plat.manifest:
            plat.manifest.remove(pid)
        p = world.patients[pid]
        if stamped == "t1":
            p.t1 = time
        elif stamped == "t2":
            p.t2 = time
            world.totals.score += patient_score(
                p, world.scenario.precedence_specs[p.precedence], world.scoring_mode,
                clamp_floor=world.scenario.scoring.clamp_floor,
            )
        elif stamped == "t3":
            p.t3 = time
        if fac.cfg.role == FacilityRole.ROLE3:
            p.place = Place.DELIVERED
            p.place_ref = fac.cfg.id
        elif fac.cfg.role in EXCHANGE_ROLES:
            p.place = Place.AT_POINT
            p.place_ref = fac.cfg.id
            fac.patients.append(pid)
        else:
            p.place = Place.AT_FACILITY
            p.place_ref = fac.cfg.id
            p.treated = False
            fac.patients.append(pid)
    # dwell ops scheduled explicitly by dwell_started events


def _on_dwell_started(world: WorldState, time: float, d: dict) -> None:
    op = PendingOp(
        id=d["op"],
        kind="dwell",
        completes_min=d["completes_min"],
        site=d["site"],
        patients=list(d["patients"]),
    )
    world.ops[op.id] = op


def _on_patient_treated(world: WorldState, time: float, d: dict) -> None:
    world.ops.pop(d.get("op", ""), None)
    p = world.patients[d["patient"]]
    if not p.terminal:
        p.treated = True


def _on_transfer_started(world: WorldState, time: float, d: dict) -> None:
    _start_op(world, d, "transfer")


def _on_transferred(world: WorldState, time: float, d: dict) -> None:
    _finish_op(world, d["op"])
    src = world.platforms[d["from_platform"]]
    dst = world.platforms[d["to_platform"]]
    for pid in d["patients"]:
        if pid in src.manifest:
            src.manifest.remove(pid)
            dst.manifest.append(pid)
            p = world.patients[pid]
            p.place = Place.ONBOARD
            p.place_ref = dst.id


def _on_died(world: WorldState, time: float, d: dict) -> None:
    p = world.patients[d["patient"]]
    if p.place in (Place.AT_CCP, Place.AT_FACILITY, Place.AT_POINT) and p.place_ref:
        fac = world.facilities[p.place_ref]
        if p.id in fac.patients:
            fac.patients.remove(p.id)
    # onboard: stays in the manifest until the next facility stop
    world.claims.pop(p.id, None)
    p.place = Place.DEAD
    world.totals.deaths += 1
    world.totals.score += DEATH_PENALTY


def _on_dead_removed(world: WorldState, time: float, d: dict) -> None:
    plat = world.platforms[d["platform"]]
    for pid in d["patients"]:
        if pid in plat.manifest:
            plat.manifest.remove(pid)


def _on_delivered_role3(world: WorldState, time: float, d: dict) -> None:
    world.totals.saves += 1


def _on_run_ended(world: WorldState, time: float, d: dict) -> None:
    world.finished = True


_HANDLERS = {
    "patient_spawned": _on_patient_spawned,
    "ccp_active": _on_ccp_active,
    "ring_spawned": _on_ring_spawned,
    "ring_expired": _on_ring_expired,
    "blackout_set": _on_blackout_set,
    "casevac_requested": _on_casevac_requested,
    "casevac_granted": _on_casevac_granted,
    "casevac_denied": _on_casevac_denied,
    "platform_spawned": _on_platform_spawned,
    "platform_despawned": _on_platform_despawned,
    "departed": _on_departed,
    "arrived": _on_arrived,
    "halted": _on_halted,
    "pad_occupied": _on_pad_occupied,
    "pad_queued": _on_pad_queued,
    "pad_freed": _on_pad_freed,
    "load_started": _on_load_started,
    "loaded": _on_loaded,
    "unload_started": _on_unload_started,
    "unloaded": _on_unloaded,
    "dwell_started": _on_dwell_started,
    "patient_treated": _on_patient_treated,
    "transfer_started": _on_transfer_started,
    "transferred": _on_transferred,
    "died": _on_died,
    "dead_removed": _on_dead_removed,
    "delivered_role3": _on_delivered_role3,
    "run_ended": _on_run_ended,
}


# ---------------------------------------------------------------------------
# canonical digest (fold-vs-live comparison)


def world_digest(world: WorldState, now: float) -> dict:
    """Canonical, JSON-stable view of all domain state at time `now`."""
    return {
        "patients": {
            pid: {
                "precedence": p.precedence.value,
                "kind": p.kind.value,
                "origin": p.origin_ccp,
                "t0": p.t0,
                "t1": p.t1,
                "t2": p.t2,
                "t3": p.t3,
                "td1": p.t_death1,
                "td2": p.t_death2,
                "place": p.place.value,
                "ref": p.place_ref,
                "treated": p.treated,
            }
            for pid, p in sorted(world.patients.items())
        },
        "platforms": {
            pid: {
                "owner": p.owner,
                "spot": p.spot.to_dict(),
                "pos": list(world.platform_position(p, now)),
                "at": p.at_facility,
                "status": p.status,
                "route": p.route.to_dict() if p.route else None,
                "depart": p.depart_min,
                "dest": p.dest_ref,
                "manifest": sorted(p.manifest),
                "busy_op": p.busy_op,
                "busy_until": p.busy_until,
                "casevac_expires": p.casevac_expires,
            }
            for pid, p in sorted(world.platforms.items())
        },
        "facilities": {
            fid: {
                "active": f.ccp_active,
                "patients": sorted(f.patients),
                "pad_occupied": list(f.pad_occupied),
                "pad_queue": list(f.pad_queue),
                "pos": list(f.position(now)),
                "route": f.route.to_dict() if f.route else None,
                "depart": f.depart_min,
            }
            for fid, f in sorted(world.facilities.items())
        },
        "rings": {rid: r.to_dict() for rid, r in sorted(world.rings.items())},
        "ops": {
            oid: {
                "kind": op.kind,
                "completes": op.completes_min,
                "platform": op.platform,
                "to": op.to_platform,
                "site": op.site,
                "patients": sorted(op.patients),
            }
            for oid, op in sorted(world.ops.items())
        },
        "claims": dict(sorted(world.claims.items())),
        "blackouts": sorted(world.blackouts),
        "casevac": {
            rid: {"role": r.role, "status": r.status} for rid, r in sorted(world.casevac_requests.items())
        },
        "totals": {
            "spawned": world.totals.spawned,
            "deaths": world.totals.deaths,
            "saves": world.totals.saves,
            "score": world.totals.score,
        },
        "finished": world.finished,
    }


def digest_json(world: WorldState, now: float) -> str:
    return json.dumps(world_digest(world, now), sort_keys=True)
