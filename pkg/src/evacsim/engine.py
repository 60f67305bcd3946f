"""The authoritative clock: fixed-step loop, ordered intake, events, replay.

One Engine owns one world.  All external input (player actions, instructor
injects) enters an ordered queue and is applied at the next step boundary;
everything the engine decides is emitted as events with analytic timestamps
(a death is logged at its exact death time, an arrival at distance/speed,
never at the detecting tick), which makes logs tick-rate independent and
byte-identical under replay.

Per-tick sub-phase order is fixed: injects, actions, adversary rings,
casualty waves, movement, resolution of arrivals/completions, mortality.
"""

from __future__ import annotations

import heapq
import json
import math
import pickle
from dataclasses import dataclass, field
from enum import Enum

from . import casualty, rules
from .casualty import MortalityParams, check_mortality, death_deadline
from .rng import RngRegistry
from .rules import ActionRequest
from .scenario import (
    CARE_LEVEL,
    EXCHANGE_ROLES,
    CasualtyStreamParams,
    FacilityRole,
    Place,
    Precedence,
    Scenario,
)
from .scoring import ScoringMode
from .world import (
    FacilityState,
    PlatformState,
    WorldState,
    apply_event,
    build_world,
    digest_json,
)
from .worldmap import (
    AIR_CLASSES,
    AdversaryState,
    PlatformClass,
    Spot,
    ThreatRing,
    adversary_due_rings,
    dist,
    plan_route,
    plan_route_to_pos,
    route_tail_blocked,
)

ENGINE_VERSION = "1.0.0"

CLOCK_EVENT_KINDS = frozenset({"run_started", "run_ended", "day_phase"})

EPS = 1e-9

CHASE_TOLERANCE_KM = 0.05  # close enough to land on a moving ship


class InvariantBreach(RuntimeError):
    """A doctrine invariant failed while the checker was armed."""


@dataclass
class SimEvent:
    seq: int
    time: float
    kind: str
    data: dict
    actor: str | None = None

    def to_json_line(self) -> str:
        return json.dumps(
            {"seq": self.seq, "time": self.time, "kind": self.kind, "actor": self.actor, "data": self.data},
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json_line(line: str) -> "SimEvent":
        d = json.loads(line)
        return SimEvent(seq=d["seq"], time=d["time"], kind=d["kind"], data=d["data"], actor=d.get("actor"))


@dataclass
class SimClock:
    tick_len_s: int
    tick: int = 0
    paused: bool = False

    @property
    def now(self) -> float:
        """In-game minutes; always tick * tick length, never accumulated."""
        return self.tick * self.tick_len_s / 60.0


class DayPhase(str, Enum):
    DAY = "day"
    DUSK = "dusk"
    NIGHT = "night"
    DAWN = "dawn"


def _in_circular(t: float, a: float, b: float, cycle: float) -> bool:
    a %= cycle
    b %= cycle
    if a <= b:
        return a <= t < b
    return t >= a or t < b


def day_night_phase(time_min: float, cfg) -> tuple[DayPhase, float]:
    """Periodic day/night phase plus the visibility factor it imposes."""
    t = time_min % cfg.cycle_min
    if _in_circular(t, cfg.dawn_min, cfg.dawn_min + cfg.band_min, cfg.cycle_min):
        return DayPhase.DAWN, cfg.twilight_factor
    if _in_circular(t, cfg.dusk_min, cfg.dusk_min + cfg.band_min, cfg.cycle_min):
        return DayPhase.DUSK, cfg.twilight_factor
    if _in_circular(t, cfg.dawn_min + cfg.band_min, cfg.dusk_min, cfg.cycle_min):
        return DayPhase.DAY, 1.0
    return DayPhase.NIGHT, cfg.night_factor


@dataclass(frozen=True)
class Inject:
    kind: str  # ccp_set_active | mascal | comm_blackout | grant_casevac | deny_casevac | spawn_ring | despawn_ring
    params: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    @staticmethod
    def from_dict(d: dict) -> "Inject":
        return Inject(kind=d["kind"], params=d.get("params", {}))


@dataclass
class InputRecord:
    """One externally supplied action or inject, replayable at its tick."""

    seq: int
    apply_tick: int
    kind: str  # action | inject
    actor: str
    payload: dict
    precheck_reject: str | None = None

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "apply_tick": self.apply_tick,
                "kind": self.kind,
                "actor": self.actor,
                "payload": self.payload,
                "precheck_reject": self.precheck_reject,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json_line(line: str) -> "InputRecord":
        d = json.loads(line)
        return InputRecord(
            seq=d["seq"],
            apply_tick=d["apply_tick"],
            kind=d["kind"],
            actor=d["actor"],
            payload=d["payload"],
            precheck_reject=d.get("precheck_reject"),
        )


@dataclass
class _PendingWave:
    time: float
    drafts: list


class Engine:
    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        tick_len_s: int = 1,
        duration_min: float | None = None,
        scoring_mode: ScoringMode | None = None,
        checker: bool = False,
        fold_check_every: int = 0,
    ):
        self.scenario = scenario
        self.seed = scenario.rng_seed if seed is None else seed
        self.clock = SimClock(tick_len_s=tick_len_s)
        self.duration_min = scenario.duration_min if duration_min is None else duration_min
        self.total_ticks = int(math.ceil(self.duration_min * 60.0 / tick_len_s - EPS))
        self.scoring_mode = scoring_mode or ScoringMode(scenario.scoring.mode)
        self.checker = checker
        self.fold_check_every = fold_check_every
        self.mortality = MortalityParams.from_standards(scenario.mortality.e_s1_min, scenario.mortality.e_s2_min)

        self.world = build_world(scenario, self.scoring_mode)
        self.rngs = RngRegistry(self.seed)
        self.log: list[SimEvent] = []
        self.inputs: list[InputRecord] = []
        self._queue: list[InputRecord] = []
        self._event_seq = 0
        self._input_seq = 0
        self._patient_seq = 0
        self._op_seq = 0
        self._ring_seq = 0
        self._cvreq_seq = 0
        self._casevac_seq = 0
        self._tick_events: list[SimEvent] = []
        self._death_heap: list[tuple[float, str]] = []
        self._pending_waves: dict[str, _PendingWave | None] = {}
        self._ccp_override: dict[str, bool | None] = {}
        self._adversary = AdversaryState(next_spawn_min=math.inf)
        if scenario.adversary.enabled and scenario.adversary.corridors:
            self._adversary.next_spawn_min = self.rngs.stream("adversary").exponential(scenario.adversary.mean_gap_min)
        self._last_phase: DayPhase | None = None

        self._emit(
            "run_started",
            0.0,
            {
                "engine_version": ENGINE_VERSION,
                "scenario": scenario.name,
                "scenario_sha": scenario.sha256(),
                "seed": self.seed,
                "tick_len_s": tick_len_s,
                "duration_min": self.duration_min,
                "scoring_mode": self.scoring_mode.value,
                "clamp_floor": scenario.scoring.clamp_floor,
                "precedence": {
                    p.value: {"p_max": s.p_max, "standard_min": s.standard_min}
                    for p, s in sorted(scenario.precedence_specs.items(), key=lambda kv: kv[0].value)
                },
            },
        )
        self._phase_event(0.0)
        for cid, stream in scenario.ccp_streams.items():
            self._ccp_override[cid] = None
            if self.world.facilities[cid].ccp_active:
                self._schedule_wave(cid, 0.0)
            else:
                self._pending_waves[cid] = None

    # ------------------------------------------------------------------
    # plumbing

    @property
    def now(self) -> float:
        return self.clock.now

    @property
    def finished(self) -> bool:
        return self.world.finished

    def _emit(self, kind: str, time: float, data: dict, actor: str | None = None) -> SimEvent:
        ev = SimEvent(seq=self._event_seq, time=time, kind=kind, data=data, actor=actor)
        self._event_seq += 1
        apply_event(self.world, kind, time, data)
        self.log.append(ev)
        self._tick_events.append(ev)
        return ev

    def _next_op_id(self) -> str:
        self._op_seq += 1
        return f"op{self._op_seq:06d}"

    def events_since(self, seq: int) -> list[SimEvent]:
        return [ev for ev in self.log if ev.seq >= seq]

    # ------------------------------------------------------------------
    # intake

    def enqueue_action(self, action: ActionRequest) -> tuple[bool, str | None, int]:
        """Pre-check against the current snapshot and queue for the next step."""
        reason = self._precheck_action(action)
        rec = InputRecord(
            seq=self._input_seq,
            apply_tick=self.clock.tick + 1,
            kind="action",
            actor=action.actor,
            payload=action.to_dict(),
            precheck_reject=reason,
        )
        self._input_seq += 1
        self.inputs.append(rec)
        self._queue.append(rec)
        return reason is None, reason, rec.seq

    def enqueue_inject(self, actor: str, inject: Inject) -> tuple[bool, str | None, int]:
        role = self.scenario.roles.get(actor)
        reason = None
        if role is None or not role.permissions.can_inject:
            reason = "permission: role may not inject"
        rec = InputRecord(
            seq=self._input_seq,
            apply_tick=self.clock.tick + 1,
            kind="inject",
            actor=actor,
            payload=inject.to_dict(),
            precheck_reject=reason,
        )
        self._input_seq += 1
        self.inputs.append(rec)
        self._queue.append(rec)
        return reason is None, reason, rec.seq

    def feed_inputs(self, records: list[InputRecord]) -> None:
        """Load a recorded input log for replay, preserving ticks and order."""
        for rec in records:
            self.inputs.append(rec)
            self._queue.append(rec)
            self._input_seq = max(self._input_seq, rec.seq + 1)

    def _precheck_action(self, action: ActionRequest) -> str | None:
        world = self.world
        unit = world.platforms.get(action.platform)
        if action.verb == "request_casevac":
            return None
        if unit is None:
            fac = world.facilities.get(action.platform)
            if fac is None or not fac.cfg.mobile:
                return "ownership: unknown platform"
            if fac.cfg.owner != action.actor:
                return "ownership: platform belongs to another role"
            if action.verb != "dispatch":
                return "mobile facilities only move"
            return None
        if unit.owner != action.actor:
            return "ownership: platform belongs to another role"
        dec = self._check_action(action)
        return None if dec.allowed else dec.reason

    def _check_action(self, action: ActionRequest) -> rules.Decision:
        world, now = self.world, self.now
        verb = action.verb
        if verb == "dispatch":
            dec = rules.check_dispatch(world, action.platform, now)
            if not dec:
                return dec
            if "to" not in action.params:
                return rules.rejected("dispatch requires a destination")
            return rules.ALLOWED
        if verb == "load":
            return rules.check_load(world, action.platform, list(action.params.get("patients", [])), now)
        if verb == "unload":
            return rules.check_unload(world, action.platform, list(action.params.get("patients", [])), now)
        if verb == "transfer_to":
            return rules.check_transfer(
                world, action.platform, action.params.get("to_platform", ""), list(action.params.get("patients", [])), now
            )
        if verb == "wait":
            return rules.ALLOWED
        if verb == "request_casevac":
            return rules.ALLOWED
        return rules.rejected(f"unknown verb '{verb}'")

    # ------------------------------------------------------------------
    # stepping

    def step(self, n_ticks: int = 1) -> list[SimEvent]:
        """Advance up to n ticks; returns the events emitted."""
        out: list[SimEvent] = []
        for _ in range(n_ticks):
            if self.world.finished or self.clock.paused:
                break
            self._tick_events = []
            prev_now = self.now
            self.clock.tick += 1
            now = self.now
            self._phase_event(now)
            self._apply_inputs(now)
            self._adversary_phase(now)
            self._ccp_transitions(prev_now, now)
            self._spawn_waves(now)
            self._resolve(now)
            self._mortality(now)
            self._casevac_expiry(now)
            if self.checker:
                self._check_invariants(now)
            if self.fold_check_every and self.clock.tick % self.fold_check_every == 0:
                self._fold_check(now)
            if self.clock.tick >= self.total_ticks:
                self._finish(now)
            out.extend(self._tick_events)
        return out

    def run_to_end(self) -> None:
        while not self.world.finished:
            self.step()

    def _finish(self, now: float) -> None:
        t = self.world.totals
        self._emit(
            "run_ended",
            now,
            {
                "ticks": self.clock.tick,
                "score": t.score,
                "saves": t.saves,
                "deaths": t.deaths,
                "alive": t.spawned - t.deaths - t.saves,
                "spawned": t.spawned,
            },
        )

    def _phase_event(self, now: float) -> None:
        phase, factor = day_night_phase(now, self.scenario.day_night)
        if phase != self._last_phase:
            self._last_phase = phase
            self._emit("day_phase", now, {"phase": phase.value, "visibility_factor": factor})

    # ------------------------------------------------------------------
    # phase 1: inputs

    def _apply_inputs(self, now: float) -> None:
        due = [rec for rec in self._queue if rec.apply_tick <= self.clock.tick]
        if not due:
            return
        self._queue = [rec for rec in self._queue if rec.apply_tick > self.clock.tick]
        for rec in due:
            if rec.kind == "inject":
                self._apply_inject(rec, now)
        for rec in due:
            if rec.kind == "action":
                self._apply_action(rec, now)

    def _apply_action(self, rec: InputRecord, now: float) -> None:
        action = ActionRequest.from_dict(rec.payload)
        if rec.precheck_reject is not None:
            self._emit(
                "action_rejected", now, {**rec.payload, "reason": rec.precheck_reject, "input_seq": rec.seq}, actor=rec.actor
            )
            return
        dec = self._check_action(action)
        if not dec:
            self._emit("action_rejected", now, {**rec.payload, "reason": dec.reason, "input_seq": rec.seq}, actor=rec.actor)
            return
        handler = getattr(self, f"_do_{action.verb}")
        err = handler(action, rec, now)
        if err is not None:
            self._emit("action_rejected", now, {**rec.payload, "reason": err, "input_seq": rec.seq}, actor=rec.actor)
        else:
            self._emit("action_accepted", now, {**rec.payload, "input_seq": rec.seq}, actor=rec.actor)

    # --- verbs -----------------------------------------------------

    def _unit_state(self, ref: str) -> PlatformState | FacilityState | None:
        return self.world.platforms.get(ref) or self.world.facilities.get(ref)

    def _unit_spot(self, unit, now: float) -> Spot:
        if isinstance(unit, PlatformState):
            if unit.at_facility is not None:
                fac = self.world.facilities[unit.at_facility]
                x, y = fac.position(now)
                return Spot(x=x, y=y, node=fac.spot.node)
            return unit.spot
        return unit.spot

    def _do_dispatch(self, action: ActionRequest, rec: InputRecord, now: float) -> str | None:
        world = self.world
        unit = self._unit_state(action.platform)
        dest_ref = action.params["to"]
        if isinstance(unit, FacilityState):
            klass, speed = PlatformClass.SHIP, unit.cfg.cruise_kmh
        else:
            klass, speed = unit.spec.platform_class, unit.spec.cruise_kmh
        origin = self._unit_spot(unit, now)
        rings = list(world.rings.values())

        dest_fac = world.facilities.get(dest_ref)
        chase_pos = None
        if dest_fac is not None:
            if dest_fac.route is not None or (dest_fac.cfg.mobile and klass in AIR_CLASSES):
                if klass not in AIR_CLASSES:
                    return "destination facility is underway"
                chase_pos = dest_fac.position(now)
            dest_node = dest_fac.spot.node
        elif dest_ref in world.scenario.world.nodes:
            dest_node = dest_ref
        else:
            return f"unknown destination '{dest_ref}'"

        if chase_pos is not None:
            route = plan_route_to_pos(klass, speed, origin, chase_pos, rings, now)
        else:
            if origin.node is not None and origin.node == dest_node:
                self._depart_cleanup(unit, now)
                self._arrive_in_place(unit, dest_ref, now)
                return None
            route = plan_route(world.scenario.world, klass, speed, origin, dest_node, rings, now)
        if route is None:
            return "unreachable: no passable route"
        self._depart_cleanup(unit, now)
        self._emit(
            "departed",
            now,
            {
                "unit": action.platform,
                "dest": dest_ref,
                "route": route.to_dict(),
                "eta_min": route.eta_min,
                "km": route.total_km,
            },
            actor=action.actor,
        )
        return None

    def _depart_cleanup(self, unit, now: float) -> None:
        """Free any pad the departing platform holds, promoting the queue."""
        if not isinstance(unit, PlatformState) or unit.at_facility is None:
            return
        fac = self.world.facilities[unit.at_facility]
        if unit.id in fac.pad_occupied or unit.id in fac.pad_queue:
            was_occupying = unit.id in fac.pad_occupied
            self._emit("pad_freed", now, {"facility": fac.cfg.id, "platform": unit.id})
            if was_occupying:
                self._promote_pad(fac, now)

    def _promote_pad(self, fac: FacilityState, now: float) -> None:
        if fac.pad_queue and rules.pad_has_room(self.world, fac):
            nxt = fac.pad_queue[0]
            self._emit("pad_occupied", now, {"facility": fac.cfg.id, "platform": nxt})

    def _arrive_in_place(self, unit, dest_ref: str, now: float) -> None:
        """Dispatch to a facility on the unit's own node: arrival without travel."""
        spot = self._unit_spot(unit, now)
        self._finish_arrival(unit, dest_ref, spot, now)

    def _do_load(self, action: ActionRequest, rec: InputRecord, now: float) -> str | None:
        plat = self.world.platforms[action.platform]
        patients = list(action.params["patients"])
        dur = rules.load_duration_min(self.world, patients)
        self._emit(
            "load_started",
            now,
            {
                "op": self._next_op_id(),
                "platform": plat.id,
                "site": plat.at_facility,
                "patients": patients,
                "completes_min": now + dur,
            },
            actor=action.actor,
        )
        return None

    def _do_unload(self, action: ActionRequest, rec: InputRecord, now: float) -> str | None:
        plat = self.world.platforms[action.platform]
        patients = list(action.params["patients"])
        dur = rules.load_duration_min(self.world, patients)
        self._emit(
            "unload_started",
            now,
            {
                "op": self._next_op_id(),
                "platform": plat.id,
                "site": plat.at_facility,
                "patients": patients,
                "completes_min": now + dur,
            },
            actor=action.actor,
        )
        return None

    def _do_transfer_to(self, action: ActionRequest, rec: InputRecord, now: float) -> str | None:
        src = self.world.platforms[action.platform]
        patients = list(action.params["patients"])
        dur = rules.transfer_duration_min(self.world, patients)
        self._emit(
            "transfer_started",
            now,
            {
                "op": self._next_op_id(),
                "platform": src.id,
                "to_platform": action.params["to_platform"],
                "site": src.at_facility,
                "patients": patients,
                "completes_min": now + dur,
            },
            actor=action.actor,
        )
        return None

    def _do_wait(self, action: ActionRequest, rec: InputRecord, now: float) -> str | None:
        return None

    def _do_request_casevac(self, action: ActionRequest, rec: InputRecord, now: float) -> str | None:
        self._cvreq_seq += 1
        self._emit(
            "casevac_requested",
            now,
            {"request": f"cvreq{self._cvreq_seq:03d}", "role": action.actor, "details": str(action.params.get("details", ""))},
            actor=action.actor,
        )
        return None

    # --- injects ----------------------------------------------------

    def _apply_inject(self, rec: InputRecord, now: float) -> None:
        inject = Inject.from_dict(rec.payload)
        if rec.precheck_reject is not None:
            self._emit(
                "inject_rejected", now, {**inject.to_dict(), "reason": rec.precheck_reject, "input_seq": rec.seq}, actor=rec.actor
            )
            return
        err = self._inject_effect(inject, rec, now)
        if err is not None:
            self._emit("inject_rejected", now, {**inject.to_dict(), "reason": err, "input_seq": rec.seq}, actor=rec.actor)
        else:
            self._emit("inject_applied", now, {**inject.to_dict(), "input_seq": rec.seq}, actor=rec.actor)

    def _inject_effect(self, inject: Inject, rec: InputRecord, now: float) -> str | None:
        world = self.world
        p = inject.params
        if inject.kind == "ccp_set_active":
            ccp = p.get("ccp")
            fac = world.facilities.get(ccp)
            if fac is None or fac.cfg.role != FacilityRole.CCP:
                return f"unknown CCP '{ccp}'"
            desired = bool(p.get("active", True))
            self._ccp_override[ccp] = desired
            if fac.ccp_active != desired:
                self._emit("ccp_active", now, {"facility": ccp, "active": desired, "source": "inject"})
                self._handle_ccp_flip(ccp, desired, now)
            return None
        if inject.kind == "mascal":
            ccp = p.get("ccp")
            fac = world.facilities.get(ccp)
            if fac is None or fac.cfg.role != FacilityRole.CCP:
                return f"unknown CCP '{ccp}'"
            if not fac.ccp_active:
                return f"CCP '{ccp}' is inactive"
            n = int(p.get("n", 0))
            stream = self.scenario.ccp_streams.get(ccp) or CasualtyStreamParams(
                ccp=ccp, mean_wave_interval_min=30.0, mean_wave_size=4.0
            )
            try:
                drafts = casualty.mascal_burst(
                    stream, self.mortality, n, self.rngs.stream("mascal", ccp, rec.seq), now
                )
            except ValueError as e:
                return str(e)
            for draft in drafts:
                self._spawn_patient(ccp, draft, mascal=True)
            return None
        if inject.kind == "comm_blackout":
            start = float(p.get("start_min", now))
            end = float(p.get("end_min", 0.0))
            if end <= start:
                return "blackout window must be well-ordered"
            self._emit("blackout_set", now, {"start_min": start, "end_min": end})
            return None
        if inject.kind == "grant_casevac":
            req = world.casevac_requests.get(p.get("request", ""))
            if req is None or req.status != "pending":
                return "no such pending request"
            spec_name = p.get("spec")
            node = p.get("node")
            if spec_name not in self.scenario.platform_specs:
                return f"unknown platform type '{spec_name}'"
            if node not in self.scenario.world.nodes:
                return f"unknown node '{node}'"
            window = float(p.get("window_min", 180.0))
            self._casevac_seq += 1
            pid = f"casevac{self._casevac_seq:02d}"
            self._emit("casevac_granted", now, {"request": req.id, "platform": pid})
            self._emit(
                "platform_spawned",
                now,
                {"platform": pid, "spec": spec_name, "node": node, "owner": req.role, "expires_min": now + window},
            )
            return None
        if inject.kind == "deny_casevac":
            req = world.casevac_requests.get(p.get("request", ""))
            if req is None or req.status != "pending":
                return "no such pending request"
            self._emit("casevac_denied", now, {"request": req.id})
            return None
        if inject.kind == "spawn_ring":
            self._ring_seq += 1
            ring = ThreatRing(
                id=f"iring{self._ring_seq:03d}",
                cx=float(p["cx"]),
                cy=float(p["cy"]),
                radius_km=float(p["radius_km"]),
                affects=frozenset(PlatformClass(c) for c in p.get("affects", [c.value for c in self.scenario.adversary.affects])),
                start_min=now,
                end_min=now + float(p.get("duration_min", 60.0)),
            )
            self._emit("ring_spawned", now, {"ring": ring.to_dict()})
            self._halt_blocked_units(now)
            return None
        if inject.kind == "despawn_ring":
            rid = p.get("ring")
            if rid not in world.rings:
                return f"unknown ring '{rid}'"
            self._emit("ring_expired", now, {"ring": rid, "source": "inject"})
            return None
        return f"unknown inject kind '{inject.kind}'"

    # ------------------------------------------------------------------
    # phase 2: adversary rings

    def _adversary_phase(self, now: float) -> None:
        for rid, ring in list(self.world.rings.items()):
            if now >= ring.end_min:
                self._emit("ring_expired", ring.end_min, {"ring": rid, "source": "timer"})
        new_rings = adversary_due_rings(
            self.scenario.adversary, self._adversary, self.rngs.stream("adversary"), now, self.scenario.world
        )
        for ring in new_rings:
            self._emit("ring_spawned", ring.start_min, {"ring": ring.to_dict()})
        if new_rings:
            self._halt_blocked_units(now)

    def _halt_blocked_units(self, now: float) -> None:
        rings = list(self.world.rings.values())
        units: list = [p for p in self.world.platforms.values() if p.route is not None]
        units += [f for f in self.world.facilities.values() if f.route is not None]
        for u in units:
            klass = u.spec.platform_class if isinstance(u, PlatformState) else PlatformClass.SHIP
            progress = u.progress_km(now)
            if progress >= u.route.total_km - EPS:
                continue
            if route_tail_blocked(u.route, progress, klass, rings, now):
                spot = self._halt_spot(u, progress, now)
                uid = u.id if isinstance(u, PlatformState) else u.cfg.id
                self._emit(
                    "halted",
                    now,
                    {"unit": uid, "spot": spot.to_dict(), "reason": "threat_ring", "replan_requested": True},
                )

    def _halt_spot(self, unit, progress: float, now: float) -> Spot:
        """Air halts in place; graph movers fall back to the last node passed."""
        klass = unit.spec.platform_class if isinstance(unit, PlatformState) else PlatformClass.SHIP
        route = unit.route
        if klass in AIR_CLASSES:
            x, y = route.position_at(progress)
            return Spot(x=x, y=y)
        run = 0.0
        best: str | None = None
        for i, (a, b) in enumerate(zip(route.waypoints, route.waypoints[1:])):
            if route.node_ids[i] is not None and run <= progress + EPS:
                best = route.node_ids[i]
            run += dist(a, b)
        if best is None:
            best = route.node_ids[0]
        if best is None:
            x, y = route.waypoints[0]
            return Spot(x=x, y=y)
        return Spot.at_node(self.scenario.world, best)

    # ------------------------------------------------------------------
    # phase 3: casualty waves

    def _ccp_effective_active(self, ccp: str, now: float) -> bool:
        override = self._ccp_override.get(ccp)
        if override is not None:
            return override
        stream = self.scenario.ccp_streams.get(ccp)
        fac_cfg = self.scenario.facilities[ccp]
        if stream is None:
            return fac_cfg.active
        return fac_cfg.active and stream.active_at(now)

    def _ccp_transitions(self, prev_now: float, now: float) -> None:
        for cid in self.scenario.ccp_streams:
            fac = self.world.facilities[cid]
            effective = self._ccp_effective_active(cid, now)
            if effective == fac.ccp_active:
                continue
            boundary = self._window_boundary(cid, prev_now, now)
            self._emit("ccp_active", boundary, {"facility": cid, "active": effective, "source": "window"})
            self._handle_ccp_flip(cid, effective, boundary)

    def _window_boundary(self, ccp: str, prev_now: float, now: float) -> float:
        stream = self.scenario.ccp_streams.get(ccp)
        if stream is None:
            return now
        candidates = [
            t
            for a, b in stream.activation_windows
            for t in (a, b)
            if prev_now < t <= now and not math.isinf(t)
        ]
        return min(candidates) if candidates else now

    def _handle_ccp_flip(self, ccp: str, active: bool, at: float) -> None:
        if active:
            self._schedule_wave(ccp, at)
        else:
            self._pending_waves[ccp] = None

    def _schedule_wave(self, ccp: str, anchor: float) -> None:
        stream = self.scenario.ccp_streams.get(ccp)
        if stream is None:
            self._pending_waves[ccp] = None
            return
        drawn = casualty.next_wave(stream, self.mortality, self.rngs.stream("ccp", ccp), anchor, active=True)
        self._pending_waves[ccp] = _PendingWave(time=drawn[0], drafts=drawn[1])

    def _spawn_waves(self, now: float) -> None:
        for cid in self.scenario.ccp_streams:
            fac = self.world.facilities[cid]
            while True:
                pending = self._pending_waves.get(cid)
                if pending is None or pending.time > now or not fac.ccp_active:
                    break
                for draft in pending.drafts:
                    self._spawn_patient(cid, draft, mascal=False)
                self._schedule_wave(cid, pending.time)

    def _spawn_patient(self, ccp: str, draft, mascal: bool) -> None:
        self._patient_seq += 1
        pid = f"p{self._patient_seq:05d}"
        data = {
            "patient": pid,
            "ccp": ccp,
            "precedence": draft.precedence.value,
            "kind": draft.kind.value,
            "t0": draft.t0,
            "mascal": mascal,
        }
        if draft.t_death1 is not None:
            data["t_death1"] = draft.t_death1
            data["t_death2"] = draft.t_death2
        self._emit("patient_spawned", draft.t0, data)
        if draft.t_death1 is not None:
            heapq.heappush(self._death_heap, (draft.t0 + draft.t_death1, pid))

    # ------------------------------------------------------------------
    # phases 4+5: movement and resolution

    def _resolve(self, now: float) -> None:
        occurrences: list[tuple[float, int, str, object]] = []
        for p in self.world.platforms.values():
            t_arr = p.arrival_min()
            if t_arr is not None and t_arr <= now + EPS:
                occurrences.append((t_arr, 0, p.id, p))
        for f in self.world.facilities.values():
            t_arr = f.arrival_min()
            if t_arr is not None and t_arr <= now + EPS:
                occurrences.append((t_arr, 0, f.cfg.id, f))
        for op in self.world.ops.values():
            if op.completes_min <= now + EPS:
                occurrences.append((op.completes_min, 1, op.id, op))
        occurrences.sort(key=lambda o: (o[0], o[1], o[2]))
        for t, _, _, obj in occurrences:
            if isinstance(obj, (PlatformState, FacilityState)):
                if obj.route is not None:  # not already halted this tick
                    self._process_arrival(obj, t)
            else:
                if obj.id in self.world.ops:
                    self._process_op(obj, t)

    def _process_arrival(self, unit, t_arr: float) -> None:
        world = self.world
        dest_ref = unit.dest_ref
        dest_fac = world.facilities.get(dest_ref)
        end = unit.route.waypoints[-1]
        end_node = unit.route.node_ids[-1]

        if dest_fac is not None and isinstance(unit, PlatformState):
            fac_pos = dest_fac.position(t_arr)
            if dist(end, fac_pos) > CHASE_TOLERANCE_KM:
                # ship moved while we were inbound: chase its new position
                route = plan_route_to_pos(
                    unit.spec.platform_class, unit.spec.cruise_kmh, Spot(x=end[0], y=end[1]), fac_pos,
                    list(world.rings.values()), t_arr,
                )
                if route is not None:
                    self._emit(
                        "departed",
                        t_arr,
                        {"unit": unit.id, "dest": dest_ref, "route": route.to_dict(), "eta_min": route.eta_min, "km": route.total_km},
                    )
                    return
        spot = Spot(x=end[0], y=end[1], node=end_node)
        self._finish_arrival(unit, dest_ref, spot, t_arr)

    def _finish_arrival(self, unit, dest_ref: str | None, spot: Spot, t_arr: float) -> None:
        world = self.world
        uid = unit.id if isinstance(unit, PlatformState) else unit.cfg.id
        facility_id = None
        if isinstance(unit, PlatformState):
            dest_fac = world.facilities.get(dest_ref) if dest_ref else None
            if dest_fac is None and spot.node is not None:
                dest_fac = next(
                    (f for f in world.facilities.values() if f.route is None and f.spot.node == spot.node), None
                )
            if dest_fac is not None:
                facility_id = dest_fac.cfg.id
        self._emit("arrived", t_arr, {"unit": uid, "dest": dest_ref, "spot": spot.to_dict(), "facility": facility_id})
        if not isinstance(unit, PlatformState):
            return
        dead = [pid for pid in unit.manifest if world.patients[pid].place == Place.DEAD]
        if facility_id is not None and dead:
            self._emit("dead_removed", t_arr, {"platform": uid, "patients": dead, "at": facility_id})
        if facility_id is not None:
            fac = world.facilities[facility_id]
            if rules._needs_pad(world, unit, fac):
                if rules.pad_has_room(world, fac):
                    self._emit("pad_occupied", t_arr, {"facility": facility_id, "platform": uid})
                else:
                    self._emit(
                        "pad_queued", t_arr,
                        {"facility": facility_id, "platform": uid, "position": len(fac.pad_queue) + 1},
                    )
        self._try_despawn_casevac(unit, t_arr)

    def _process_op(self, op, t: float) -> None:
        world = self.world
        if op.kind == "load":
            plat = world.platforms[op.platform]
            site = world.facilities[op.site]
            good = [
                pid
                for pid in op.patients
                if world.patients[pid].place in (Place.AT_CCP, Place.AT_FACILITY, Place.AT_POINT)
                and world.patients[pid].place_ref == op.site
            ]
            self._emit("loaded", t, {"op": op.id, "platform": plat.id, "site": op.site, "patients": good})
        elif op.kind == "unload":
            plat = world.platforms[op.platform]
            site = world.facilities[op.site]
            good = [pid for pid in op.patients if pid in plat.manifest and world.patients[pid].place != Place.DEAD]
            role = site.cfg.role
            stamped = None
            if role in CARE_LEVEL:
                stamped = f"t{CARE_LEVEL[role]}"
            self._emit(
                "unloaded",
                t,
                {"op": op.id, "platform": plat.id, "site": op.site, "patients": good, "stamped": stamped},
            )
            if stamped == "t1":
                for pid in good:
                    p = world.patients[pid]
                    if p.precedence == Precedence.URGENT:
                        deadline = death_deadline(p)
                        if deadline is not None:
                            heapq.heappush(self._death_heap, (deadline, pid))
            if stamped == "t3":
                for pid in good:
                    self._emit("delivered_role3", t, {"patient": pid, "facility": op.site})
            if role in (FacilityRole.ROLE1, FacilityRole.ROLE2) and good:
                by_dwell: dict[float, list[str]] = {}
                for pid in good:
                    dwell = rules.dwell_duration_min(world, role, world.patients[pid].precedence)
                    by_dwell.setdefault(dwell, []).append(pid)
                for dwell, pids in sorted(by_dwell.items()):
                    self._emit(
                        "dwell_started",
                        t,
                        {"op": self._next_op_id(), "site": op.site, "patients": pids, "completes_min": t + dwell},
                    )
            self._try_despawn_casevac(plat, t)
        elif op.kind == "transfer":
            src = world.platforms[op.platform]
            good = [pid for pid in op.patients if pid in src.manifest and world.patients[pid].place != Place.DEAD]
            self._emit(
                "transferred",
                t,
                {"op": op.id, "from_platform": op.platform, "to_platform": op.to_platform, "site": op.site, "patients": good},
            )
        elif op.kind == "dwell":
            for pid in op.patients:
                p = world.patients[pid]
                if not p.terminal and p.place == Place.AT_FACILITY and p.place_ref == op.site:
                    self._emit("patient_treated", t, {"patient": pid, "facility": op.site, "op": op.id})
            world.ops.pop(op.id, None)

    def _try_despawn_casevac(self, plat: PlatformState, now: float) -> None:
        if plat.casevac_expires is None or now < plat.casevac_expires:
            return
        if plat.manifest or plat.status in ("enroute", "busy"):
            return  # deferred while loaded or mid-operation
        if plat.at_facility is not None:
            fac = self.world.facilities[plat.at_facility]
            if plat.id in fac.pad_occupied or plat.id in fac.pad_queue:
                was_occupying = plat.id in fac.pad_occupied
                self._emit("pad_freed", now, {"facility": fac.cfg.id, "platform": plat.id})
                if was_occupying:
                    self._promote_pad(fac, now)
        self._emit("platform_despawned", now, {"platform": plat.id, "reason": "casevac_window_expired"})

    def _casevac_expiry(self, now: float) -> None:
        for plat in list(self.world.platforms.values()):
            if plat.casevac_expires is not None and now >= plat.casevac_expires:
                self._try_despawn_casevac(plat, now)

    # ------------------------------------------------------------------
    # phase 6: mortality

    def _mortality(self, now: float) -> None:
        heap = self._death_heap
        while heap and heap[0][0] < now - EPS:
            deadline, pid = heapq.heappop(heap)
            p = self.world.patients[pid]
            if p.terminal:
                continue
            res = check_mortality(p, now)
            if res.state in ("died_pre_role1", "died_pre_role2"):
                self._emit(
                    "died",
                    res.at,
                    {
                        "patient": pid,
                        "phase": res.state.value,
                        "where": p.place.value,
                        "ref": p.place_ref,
                    },
                )
            elif res.state == "alive":
                actual = death_deadline(p)
                if actual is not None and actual > deadline + EPS:
                    heapq.heappush(heap, (actual, pid))

    # ------------------------------------------------------------------
    # checker + fold

    def _check_invariants(self, now: float) -> None:
        world = self.world
        placed: dict[str, str] = {}
        for fid, fac in world.facilities.items():
            for pid in fac.patients:
                if pid in placed:
                    raise InvariantBreach(f"tick {self.clock.tick}: patient {pid} in two containers")
                placed[pid] = fid
        for plat in world.platforms.values():
            litters, ambs = rules.manifest_counts(world, plat)
            if litters > plat.spec.litter_capacity:
                raise InvariantBreach(f"tick {self.clock.tick}: {plat.id} litter overload")
            if ambs > plat.spec.ambulatory_capacity:
                raise InvariantBreach(f"tick {self.clock.tick}: {plat.id} ambulatory overload")
            used, total = rules.occupancy(plat.spec, litters, ambs)
            if used > total + EPS:
                raise InvariantBreach(f"tick {self.clock.tick}: {plat.id} converted occupancy {used} > {total}")
            for pid in plat.manifest:
                p = world.patients[pid]
                if p.place == Place.DEAD:
                    continue
                if pid in placed:
                    raise InvariantBreach(f"tick {self.clock.tick}: patient {pid} aboard and at {placed[pid]}")
                placed[pid] = plat.id
        for p in world.patients.values():
            stamps = [t for t in (p.t0, p.t1, p.t2, p.t3) if t is not None]
            if any(b < a - EPS for a, b in zip(stamps, stamps[1:])):
                raise InvariantBreach(f"tick {self.clock.tick}: patient {p.id} timestamps out of order")
            if p.t2 is not None and p.t1 is None:
                raise InvariantBreach(f"tick {self.clock.tick}: patient {p.id} skipped a care level (t2 without t1)")
            if p.t3 is not None and p.t2 is None:
                raise InvariantBreach(f"tick {self.clock.tick}: patient {p.id} skipped a care level (t3 without t2)")
        for fid, fac in world.facilities.items():
            if fac.cfg.pad_slots is not None and len(fac.pad_occupied) > fac.cfg.pad_slots:
                raise InvariantBreach(f"tick {self.clock.tick}: pad overflow at {fid}")
            if set(fac.pad_occupied) & set(fac.pad_queue):
                raise InvariantBreach(f"tick {self.clock.tick}: platform both on pad and in queue at {fid}")
            if fac.cfg.role in EXCHANGE_ROLES and fac.patients:
                if not rules.attending_platforms(world, fid):
                    raise InvariantBreach(f"tick {self.clock.tick}: unattended patients at exchange point {fid}")

    def _fold_check(self, now: float) -> None:
        folded = fold_events(self.scenario, self.log, self.scoring_mode)
        live = digest_json(self.world, now)
        again = digest_json(folded, now)
        if live != again:
            raise InvariantBreach(f"tick {self.clock.tick}: event fold diverges from live state")

    # ------------------------------------------------------------------
    # checkpoints

    def save_checkpoint(self, path: str) -> None:
        with open(path, "wb") as fh:
            pickle.dump(self, fh)

    @staticmethod
    def load_checkpoint(path: str) -> "Engine":
        with open(path, "rb") as fh:
            eng = pickle.load(fh)
        if not isinstance(eng, Engine):
            raise ValueError("not an engine checkpoint")
        return eng


# ---------------------------------------------------------------------------
# fold + replay


def fold_events(scenario: Scenario, events: list[SimEvent], scoring_mode: ScoringMode) -> WorldState:
    """Reconstruct world state purely from the event log."""
    world = build_world(scenario, scoring_mode)
    for ev in events:
        apply_event(world, ev.kind, ev.time, ev.data)
    return world


class ReplayMismatch(RuntimeError):
    def __init__(self, seq: int, expected: str | None, got: str | None):
        super().__init__(f"replay diverges at seq {seq}")
        self.seq = seq
        self.expected = expected
        self.got = got


def replay(
    scenario: Scenario,
    seed: int,
    tick_len_s: int,
    duration_min: float,
    scoring_mode: ScoringMode,
    inputs: list[InputRecord],
    until_tick: int | None = None,
) -> Engine:
    """Re-run a recorded session; the caller compares logs for byte identity."""
    eng = Engine(
        scenario,
        seed=seed,
        tick_len_s=tick_len_s,
        duration_min=duration_min,
        scoring_mode=scoring_mode,
    )
    eng.feed_inputs(inputs)
    last = until_tick if until_tick is not None else eng.total_ticks
    while eng.clock.tick < last and not eng.finished:
        eng.step()
    return eng
