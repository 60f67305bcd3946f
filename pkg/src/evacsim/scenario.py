"""Domain types, the versioned scenario file format, and validation.

A scenario document is human-editable YAML (instructors author these) with a
`format` version field.  `load_scenario` parses, resolves every cross
reference, and raises on the first hard error; `validate_scenario` re-checks
all type invariants on an already-built Scenario and returns violations as
data.  Scenarios are immutable after load and safe to share between threads.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import yaml

from .worldmap import Edge, MapNode, NodeKind, PlatformClass, WorldMap

FORMAT_VERSION = 1

DEATH_PENALTY = -10.0  # replaces p_max when a patient dies


class ScenarioError(ValueError):
    """Parse error, dangling reference, or invariant violation at load time."""


class Precedence(str, Enum):
    URGENT = "urgent"
    PRIORITY = "priority"


class PatientKind(str, Enum):
    LITTER = "litter"
    AMBULATORY = "ambulatory"


class FacilityRole(str, Enum):
    CCP = "ccp"
    ROLE1 = "role1"
    ROLE2 = "role2"
    ROLE3 = "role3"
    AXP = "axp"
    HLZ = "hlz"


CARE_LEVEL = {FacilityRole.ROLE1: 1, FacilityRole.ROLE2: 2, FacilityRole.ROLE3: 3}
EXCHANGE_ROLES = frozenset({FacilityRole.AXP, FacilityRole.HLZ})


class Place(str, Enum):
    AT_CCP = "at_ccp"
    ONBOARD = "onboard"
    AT_FACILITY = "at_facility"
    AT_POINT = "at_point"
    DEAD = "dead"
    DELIVERED = "delivered"


TERMINAL_PLACES = frozenset({Place.DEAD, Place.DELIVERED})


@dataclass(frozen=True)
class PrecedenceSpec:
    """Score ceiling and evacuation standard for one precedence class."""

    p_max: float
    standard_min: float  # doctrinal max time from initialization to Role 2


DEFAULT_PRECEDENCE_SPECS = {
    Precedence.URGENT: PrecedenceSpec(p_max=10.0, standard_min=60.0),
    Precedence.PRIORITY: PrecedenceSpec(p_max=8.0, standard_min=240.0),
}


@dataclass
class Patient:
    id: str
    precedence: Precedence
    kind: PatientKind
    origin_ccp: str
    t0: float
    t1: float | None = None
    t2: float | None = None
    t3: float | None = None
    t_death1: float | None = None  # minutes of life without Role 1 care (urgent only)
    t_death2: float | None = None  # additional minutes granted by Role 1 care (urgent only)
    place: Place = Place.AT_CCP
    place_ref: str | None = None
    treated: bool = False  # treatment dwell at current facility complete

    @property
    def highest_role(self) -> int:
        if self.t3 is not None:
            return 3
        if self.t2 is not None:
            return 2
        if self.t1 is not None:
            return 1
        return 0

    @property
    def terminal(self) -> bool:
        return self.place in TERMINAL_PLACES


@dataclass(frozen=True)
class Facility:
    id: str
    role: FacilityRole
    node: str
    bed_capacity: int | None = None  # None = unbounded
    pad_slots: int | None = None  # simultaneous helicopters; None = unbounded
    mobile: bool = False
    cruise_kmh: float = 40.0  # mobile facilities only
    active: bool = True
    owner: str | None = None  # role that may move a mobile facility


@dataclass(frozen=True)
class PlatformSpec:
    name: str
    platform_class: PlatformClass
    cruise_kmh: float
    litter_capacity: int
    ambulatory_capacity: int
    conversion: float = 2.0  # ambulatory seats one litter consumes in a mixed load
    medevac: bool = True  # False for lent casevac assets (no en-route care)
    callsign_prefix: str = "EVAC"


@dataclass(frozen=True)
class PlatformInstance:
    id: str
    spec_name: str
    start_node: str
    owner: str


@dataclass(frozen=True)
class CasualtyStreamParams:
    ccp: str
    mean_wave_interval_min: float
    mean_wave_size: float
    rate_multiplier: float = 1.0  # hidden per-CCP factor; never shown to players
    urgent_fraction: float = 0.3
    litter_fraction: float = 0.5
    activation_windows: tuple[tuple[float, float], ...] = ((0.0, math.inf),)

    def active_at(self, now: float) -> bool:
        return any(a <= now < b for a, b in self.activation_windows)


@dataclass(frozen=True)
class Permissions:
    can_inject: bool = False
    sees_all: bool = False
    can_place_sites: bool = True


@dataclass(frozen=True)
class RoleAssignment:
    role_name: str
    owned_platform_ids: tuple[str, ...]
    permissions: Permissions


@dataclass(frozen=True)
class DayNightConfig:
    dawn_min: float = 360.0
    dusk_min: float = 1110.0
    cycle_min: float = 1440.0
    band_min: float = 60.0  # dawn/dusk transition width
    night_factor: float = 0.4
    twilight_factor: float = 0.7
    night_speed_penalty: float | None = None  # optional; None = information-only night


@dataclass(frozen=True)
class Corridor:
    node: str
    jitter_km: float


@dataclass(frozen=True)
class AdversaryParams:
    enabled: bool = False
    mean_gap_min: float = 90.0
    radius_km_range: tuple[float, float] = (3.0, 8.0)
    duration_min_range: tuple[float, float] = (20.0, 60.0)
    affects: tuple[PlatformClass, ...] = (
        PlatformClass.GROUND_VEHICLE,
        PlatformClass.ROTARY_WING,
        PlatformClass.TILT_ROTOR,
    )
    corridors: tuple[Corridor, ...] = ()


@dataclass(frozen=True)
class Durations:
    load_litter_min: float = 1.0
    load_ambulatory_min: float = 0.5
    transfer_per_patient_min: float = 1.0
    dwell_role1_min: float = 15.0
    dwell_role1_urgent_min: float | None = None  # None: same as dwell_role1_min
    dwell_role2_min: float = 30.0


@dataclass(frozen=True)
class ObservationConfig:
    radius_km: float = 30.0


@dataclass(frozen=True)
class MortalityConfig:
    e_s1_min: float = 60.0
    e_s2_min: float = 240.0


@dataclass(frozen=True)
class ScoringConfig:
    mode: str = "linear_decay"  # or "as_printed"
    clamp_floor: float = 0.0


@dataclass
class Scenario:
    name: str
    world: WorldMap
    facilities: dict[str, Facility]
    ccp_streams: dict[str, CasualtyStreamParams]
    platform_specs: dict[str, PlatformSpec]
    platforms: list[PlatformInstance]
    roles: dict[str, RoleAssignment]
    precedence_specs: dict[Precedence, PrecedenceSpec]
    time_compression: float = 0.1  # in-game minutes per real second (6x wall speed)
    duration_min: float = 480.0
    rng_seed: int = 1
    day_night: DayNightConfig = field(default_factory=DayNightConfig)
    adversary: AdversaryParams = field(default_factory=AdversaryParams)
    durations: Durations = field(default_factory=Durations)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    mortality: MortalityConfig = field(default_factory=MortalityConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)

    def facility_at_node(self, node_id: str) -> Facility | None:
        for f in self.facilities.values():
            if f.node == node_id:
                return f
        return None

    def spec_for(self, platform_id: str) -> PlatformSpec:
        inst = next(p for p in self.platforms if p.id == platform_id)
        return self.platform_specs[inst.spec_name]

    def sha256(self) -> str:
        return hashlib.sha256(dumps_scenario(self).encode()).hexdigest()


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


# ---------------------------------------------------------------------------
# parsing helpers


def _req(d: dict, key: str, ctx: str):
    if key not in d:
        raise ScenarioError(f"{ctx}: missing required field '{key}'")
    return d[key]


def _enum(cls, value, ctx: str):
    try:
        return cls(value)
    except ValueError:
        raise ScenarioError(f"{ctx}: invalid value '{value}' (expected one of {[m.value for m in cls]})")


def _windows(raw, ctx: str) -> tuple[tuple[float, float], ...]:
    out = []
    for w in raw:
        if not isinstance(w, (list, tuple)) or len(w) != 2:
            raise ScenarioError(f"{ctx}: activation window must be [start, end]")
        a, b = float(w[0]), float(w[1]) if w[1] is not None else math.inf
        out.append((a, b))
    return tuple(out)


def load_scenario(text: str) -> Scenario:
    """Parse and fully validate one scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(f"parse error: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioError("parse error: document is not a mapping")
    if doc.get("format") != FORMAT_VERSION:
        raise ScenarioError(f"format: expected version {FORMAT_VERSION}, got {doc.get('format')!r}")

    name = _req(doc, "name", "scenario")

    map_doc = _req(doc, "map", "scenario")
    nodes: dict[str, MapNode] = {}
    for nd in _req(map_doc, "nodes", "map"):
        nid = _req(nd, "id", "map.nodes")
        if nid in nodes:
            raise ScenarioError(f"map.nodes.{nid}: duplicate node id")
        nodes[nid] = MapNode(
            id=nid,
            x=float(_req(nd, "x", f"map.nodes.{nid}")),
            y=float(_req(nd, "y", f"map.nodes.{nid}")),
            kind=_enum(NodeKind, _req(nd, "kind", f"map.nodes.{nid}"), f"map.nodes.{nid}.kind"),
            island=nd.get("island"),
        )

    def _edges(key: str) -> list[Edge]:
        out = []
        for ed in map_doc.get(key, []):
            a, b = _req(ed, "a", f"map.{key}"), _req(ed, "b", f"map.{key}")
            for n in (a, b):
                if n not in nodes:
                    raise ScenarioError(f"map.{key}: dangling reference to node '{n}'")
            out.append(Edge(a=a, b=b, km=float(_req(ed, "km", f"map.{key}.{a}-{b}"))))
        return out

    world = WorldMap(nodes=nodes, road_edges=_edges("roads"), sea_lanes=_edges("sea_lanes"))

    facilities: dict[str, Facility] = {}
    for fd in doc.get("facilities", []):
        fid = _req(fd, "id", "facilities")
        if fid in facilities:
            raise ScenarioError(f"facilities.{fid}: duplicate facility id")
        node = _req(fd, "node", f"facilities.{fid}")
        if node not in nodes:
            raise ScenarioError(f"facilities.{fid}: dangling reference to node '{node}'")
        facilities[fid] = Facility(
            id=fid,
            role=_enum(FacilityRole, _req(fd, "role", f"facilities.{fid}"), f"facilities.{fid}.role"),
            node=node,
            bed_capacity=fd.get("bed_capacity"),
            pad_slots=fd.get("pad_slots"),
            mobile=bool(fd.get("mobile", False)),
            cruise_kmh=float(fd.get("cruise_kmh", 40.0)),
            active=bool(fd.get("active", True)),
            owner=fd.get("owner"),
        )

    platform_specs: dict[str, PlatformSpec] = {}
    for sname, sd in (doc.get("platform_types") or {}).items():
        platform_specs[sname] = PlatformSpec(
            name=sname,
            platform_class=_enum(PlatformClass, _req(sd, "class", f"platform_types.{sname}"), f"platform_types.{sname}.class"),
            cruise_kmh=float(_req(sd, "cruise_kmh", f"platform_types.{sname}")),
            litter_capacity=int(_req(sd, "litter", f"platform_types.{sname}")),
            ambulatory_capacity=int(_req(sd, "ambulatory", f"platform_types.{sname}")),
            conversion=float(sd.get("conversion", 2.0)),
            medevac=bool(sd.get("medevac", True)),
            callsign_prefix=str(sd.get("callsign", "EVAC")),
        )

    platforms: list[PlatformInstance] = []
    seen_pids: set[str] = set()
    for pd in doc.get("platforms", []):
        pid = _req(pd, "id", "platforms")
        if pid in seen_pids:
            raise ScenarioError(f"platforms.{pid}: duplicate platform id")
        seen_pids.add(pid)
        spec_name = _req(pd, "type", f"platforms.{pid}")
        if spec_name not in platform_specs:
            raise ScenarioError(f"platforms.{pid}: dangling reference to platform type '{spec_name}'")
        start = _req(pd, "start", f"platforms.{pid}")
        if start not in nodes:
            raise ScenarioError(f"platforms.{pid}: dangling reference to node '{start}'")
        platforms.append(
            PlatformInstance(id=pid, spec_name=spec_name, start_node=start, owner=_req(pd, "owner", f"platforms.{pid}"))
        )

    roles: dict[str, RoleAssignment] = {}
    for rd in doc.get("roles", []):
        rname = _req(rd, "name", "roles")
        if rname in roles:
            raise ScenarioError(f"roles.{rname}: duplicate role name")
        roles[rname] = RoleAssignment(
            role_name=rname,
            owned_platform_ids=(),  # filled below from platform/facility owner fields
            permissions=Permissions(
                can_inject=bool(rd.get("inject", False)),
                sees_all=bool(rd.get("sees_all", False)),
                can_place_sites=bool(rd.get("place_sites", True)),
            ),
        )
    for p in platforms:
        if p.owner not in roles:
            raise ScenarioError(f"platforms.{p.id}: dangling reference to role '{p.owner}'")
    for f in facilities.values():
        if f.owner is not None and f.owner not in roles:
            raise ScenarioError(f"facilities.{f.id}: dangling reference to role '{f.owner}'")
    owned: dict[str, list[str]] = {r: [] for r in roles}
    for p in platforms:
        owned[p.owner].append(p.id)
    for f in facilities.values():
        if f.mobile and f.owner:
            owned[f.owner].append(f.id)
    roles = {
        rname: replace(r, owned_platform_ids=tuple(owned[rname])) for rname, r in roles.items()
    }

    ccp_streams: dict[str, CasualtyStreamParams] = {}
    for cid, cd in (doc.get("casualty_streams") or {}).items():
        if cid not in facilities:
            raise ScenarioError(f"casualty_streams.{cid}: dangling reference to facility '{cid}'")
        if facilities[cid].role != FacilityRole.CCP:
            raise ScenarioError(f"casualty_streams.{cid}: facility is not a CCP")
        ccp_streams[cid] = CasualtyStreamParams(
            ccp=cid,
            mean_wave_interval_min=float(_req(cd, "mean_wave_interval_min", f"casualty_streams.{cid}")),
            mean_wave_size=float(_req(cd, "mean_wave_size", f"casualty_streams.{cid}")),
            rate_multiplier=float(cd.get("rate_multiplier", 1.0)),
            urgent_fraction=float(cd.get("urgent_fraction", 0.3)),
            litter_fraction=float(cd.get("litter_fraction", 0.5)),
            activation_windows=_windows(cd.get("windows", [[0, None]]), f"casualty_streams.{cid}.windows"),
        )

    prec = dict(DEFAULT_PRECEDENCE_SPECS)
    for key, pd in (doc.get("precedence") or {}).items():
        p = _enum(Precedence, key, "precedence")
        prec[p] = PrecedenceSpec(
            p_max=float(_req(pd, "p_max", f"precedence.{key}")),
            standard_min=float(_req(pd, "standard_min", f"precedence.{key}")),
        )

    dn = doc.get("day_night") or {}
    day_night = DayNightConfig(
        dawn_min=float(dn.get("dawn_min", 360.0)),
        dusk_min=float(dn.get("dusk_min", 1110.0)),
        cycle_min=float(dn.get("cycle_min", 1440.0)),
        band_min=float(dn.get("band_min", 60.0)),
        night_factor=float(dn.get("night_factor", 0.4)),
        twilight_factor=float(dn.get("twilight_factor", 0.7)),
        night_speed_penalty=dn.get("night_speed_penalty"),
    )

    ad = doc.get("adversary") or {}
    corridors = []
    for cd in ad.get("corridors", []):
        cnode = _req(cd, "node", "adversary.corridors")
        if cnode not in nodes:
            raise ScenarioError(f"adversary.corridors: dangling reference to node '{cnode}'")
        corridors.append(Corridor(node=cnode, jitter_km=float(cd.get("jitter_km", 3.0))))
    adversary = AdversaryParams(
        enabled=bool(ad.get("enabled", False)),
        mean_gap_min=float(ad.get("mean_gap_min", 90.0)),
        radius_km_range=tuple(float(v) for v in ad.get("radius_km", [3.0, 8.0])),
        duration_min_range=tuple(float(v) for v in ad.get("duration_min", [20.0, 60.0])),
        affects=tuple(_enum(PlatformClass, c, "adversary.affects") for c in ad.get("affects", ["ground_vehicle", "rotary_wing", "tilt_rotor"])),
        corridors=tuple(corridors),
    )

    dur = doc.get("durations") or {}
    dw_urgent = dur.get("dwell_role1_urgent_min")
    durations = Durations(
        load_litter_min=float(dur.get("load_litter_min", 1.0)),
        load_ambulatory_min=float(dur.get("load_ambulatory_min", 0.5)),
        transfer_per_patient_min=float(dur.get("transfer_per_patient_min", 1.0)),
        dwell_role1_min=float(dur.get("dwell_role1_min", 15.0)),
        dwell_role1_urgent_min=float(dw_urgent) if dw_urgent is not None else None,
        dwell_role2_min=float(dur.get("dwell_role2_min", 30.0)),
    )

    obs = doc.get("observation") or {}
    mort = doc.get("mortality") or {}
    sc = doc.get("scoring") or {}
    scoring = ScoringConfig(
        mode=str(sc.get("mode", "linear_decay")),
        clamp_floor=float(sc.get("clamp_floor", 0.0)),
    )
    if scoring.mode not in ("linear_decay", "as_printed"):
        raise ScenarioError(f"scoring.mode: invalid value '{scoring.mode}'")

    scenario = Scenario(
        name=name,
        world=world,
        facilities=facilities,
        ccp_streams=ccp_streams,
        platform_specs=platform_specs,
        platforms=platforms,
        roles=roles,
        precedence_specs=prec,
        time_compression=float(doc.get("time_compression", 0.1)),
        duration_min=float(doc.get("duration_min", 480.0)),
        rng_seed=int(doc.get("rng_seed", 1)),
        day_night=day_night,
        adversary=adversary,
        durations=durations,
        observation=ObservationConfig(radius_km=float(obs.get("radius_km", 30.0))),
        mortality=MortalityConfig(
            e_s1_min=float(mort.get("e_s1_min", 60.0)),
            e_s2_min=float(mort.get("e_s2_min", 240.0)),
        ),
        scoring=scoring,
    )
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioError("; ".join(str(v) for v in violations))
    return scenario


def validate_scenario(s: Scenario) -> list[Violation]:
    """Check every type invariant; an empty list means the scenario is sound."""
    out: list[Violation] = []

    def bad(fieldname: str, msg: str):
        out.append(Violation(field=fieldname, message=msg))

    roles_present = {f.role for f in s.facilities.values()}
    for needed in (FacilityRole.CCP, FacilityRole.ROLE1, FacilityRole.ROLE2, FacilityRole.ROLE3):
        if needed not in roles_present:
            bad("facilities", f"no {needed.value} facility: the care chain is incomplete")

    for e in s.world.road_edges:
        ka, kb = s.world.nodes[e.a].kind, s.world.nodes[e.b].kind
        if ka == NodeKind.WATER or kb == NodeKind.WATER:
            bad(f"map.roads.{e.a}-{e.b}", "road edges must connect land/port nodes")
        if e.km <= 0:
            bad(f"map.roads.{e.a}-{e.b}.km", "length must be > 0")
        elif e.km < _euclid(s.world, e) - 1e-9:
            bad(f"map.roads.{e.a}-{e.b}.km", "length is shorter than the euclidean distance")
    for e in s.world.sea_lanes:
        ka, kb = s.world.nodes[e.a].kind, s.world.nodes[e.b].kind
        if ka == NodeKind.LAND or kb == NodeKind.LAND:
            bad(f"map.sea_lanes.{e.a}-{e.b}", "sea lanes must connect port/water nodes")
        if e.km <= 0:
            bad(f"map.sea_lanes.{e.a}-{e.b}.km", "length must be > 0")
        elif e.km < _euclid(s.world, e) - 1e-9:
            bad(f"map.sea_lanes.{e.a}-{e.b}.km", "length is shorter than the euclidean distance")

    for f in s.facilities.values():
        if f.pad_slots is not None and f.pad_slots < 0:
            bad(f"facilities.{f.id}.pad_slots", "must be >= 0")
        if f.bed_capacity is not None and f.bed_capacity < 0:
            bad(f"facilities.{f.id}.bed_capacity", "must be >= 0")
        if f.mobile and s.world.nodes[f.node].kind == NodeKind.LAND:
            bad(f"facilities.{f.id}", "mobile facilities must start on port/water nodes")

    for spec in s.platform_specs.values():
        if spec.cruise_kmh <= 0:
            bad(f"platform_types.{spec.name}.cruise_kmh", "speed must be > 0")
        if spec.litter_capacity < 0 or spec.ambulatory_capacity < 0:
            bad(f"platform_types.{spec.name}", "capacities must be >= 0")
        if spec.conversion < 0:
            bad(f"platform_types.{spec.name}.conversion", "must be >= 0")

    owners: dict[str, str] = {}
    for p in s.platforms:
        if p.id in owners:
            bad(f"platforms.{p.id}", f"owned by both '{owners[p.id]}' and '{p.owner}'")
        owners[p.id] = p.owner
    for rname, r in s.roles.items():
        for pid in r.owned_platform_ids:
            if pid in owners and owners[pid] != rname:
                bad(f"roles.{rname}", f"platform '{pid}' is owned by two roles")

    for cid, st in s.ccp_streams.items():
        if st.mean_wave_interval_min <= 0:
            bad(f"casualty_streams.{cid}.mean_wave_interval_min", "must be > 0")
        if st.mean_wave_size <= 0:
            bad(f"casualty_streams.{cid}.mean_wave_size", "must be > 0")
        if st.rate_multiplier <= 0:
            bad(f"casualty_streams.{cid}.rate_multiplier", "must be > 0")
        if not 0.0 <= st.urgent_fraction <= 1.0:
            bad(f"casualty_streams.{cid}.urgent_fraction", "must be in [0, 1]")
        if not 0.0 <= st.litter_fraction <= 1.0:
            bad(f"casualty_streams.{cid}.litter_fraction", "must be in [0, 1]")
        for a, b in st.activation_windows:
            if b <= a:
                bad(f"casualty_streams.{cid}.windows", f"window ({a}, {b}) is not well-ordered")

    for p, spec in s.precedence_specs.items():
        if spec.p_max <= 0:
            bad(f"precedence.{p.value}.p_max", "must be > 0")
        if spec.standard_min <= 0:
            bad(f"precedence.{p.value}.standard_min", "must be > 0")

    if s.time_compression <= 0:
        bad("time_compression", "must be > 0")
    if s.duration_min <= 0:
        bad("duration_min", "must be > 0")
    if s.mortality.e_s1_min <= 0 or s.mortality.e_s2_min <= 0:
        bad("mortality", "evacuation standards must be > 0")
    if not 0 < s.day_night.night_factor <= 1:
        bad("day_night.night_factor", "must be in (0, 1]")
    lo, hi = s.adversary.radius_km_range
    if s.adversary.enabled and (lo <= 0 or hi < lo):
        bad("adversary.radius_km", "range must be ordered and positive")
    lo, hi = s.adversary.duration_min_range
    if s.adversary.enabled and (lo <= 0 or hi < lo):
        bad("adversary.duration_min", "range must be ordered and positive")
    return out


def _euclid(world: WorldMap, e: Edge) -> float:
    (ax, ay), (bx, by) = world.node_pos(e.a), world.node_pos(e.b)
    return math.hypot(ax - bx, ay - by)


# ---------------------------------------------------------------------------
# serialization (round-trips through load_scenario)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "format": FORMAT_VERSION,
        "name": s.name,
        "rng_seed": s.rng_seed,
        "time_compression": s.time_compression,
        "duration_min": s.duration_min,
        "scoring": {"mode": s.scoring.mode, "clamp_floor": s.scoring.clamp_floor},
        "precedence": {
            p.value: {"p_max": spec.p_max, "standard_min": spec.standard_min}
            for p, spec in sorted(s.precedence_specs.items(), key=lambda kv: kv[0].value)
        },
        "mortality": {"e_s1_min": s.mortality.e_s1_min, "e_s2_min": s.mortality.e_s2_min},
        "day_night": {
            "dawn_min": s.day_night.dawn_min,
            "dusk_min": s.day_night.dusk_min,
            "cycle_min": s.day_night.cycle_min,
            "band_min": s.day_night.band_min,
            "night_factor": s.day_night.night_factor,
            "twilight_factor": s.day_night.twilight_factor,
            "night_speed_penalty": s.day_night.night_speed_penalty,
        },
        "observation": {"radius_km": s.observation.radius_km},
        "durations": {
            "load_litter_min": s.durations.load_litter_min,
            "load_ambulatory_min": s.durations.load_ambulatory_min,
            "transfer_per_patient_min": s.durations.transfer_per_patient_min,
            "dwell_role1_min": s.durations.dwell_role1_min,
            "dwell_role1_urgent_min": s.durations.dwell_role1_urgent_min,
            "dwell_role2_min": s.durations.dwell_role2_min,
        },
        "map": {
            "nodes": [
                {"id": n.id, "x": n.x, "y": n.y, "kind": n.kind.value, **({"island": n.island} if n.island else {})}
                for n in s.world.nodes.values()
            ],
            "roads": [{"a": e.a, "b": e.b, "km": e.km} for e in s.world.road_edges],
            "sea_lanes": [{"a": e.a, "b": e.b, "km": e.km} for e in s.world.sea_lanes],
        },
        "facilities": [
            {
                "id": f.id,
                "role": f.role.value,
                "node": f.node,
                **({"bed_capacity": f.bed_capacity} if f.bed_capacity is not None else {}),
                **({"pad_slots": f.pad_slots} if f.pad_slots is not None else {}),
                **({"mobile": True, "cruise_kmh": f.cruise_kmh} if f.mobile else {}),
                **({"active": False} if not f.active else {}),
                **({"owner": f.owner} if f.owner else {}),
            }
            for f in s.facilities.values()
        ],
        "platform_types": {
            spec.name: {
                "class": spec.platform_class.value,
                "cruise_kmh": spec.cruise_kmh,
                "litter": spec.litter_capacity,
                "ambulatory": spec.ambulatory_capacity,
                "conversion": spec.conversion,
                "medevac": spec.medevac,
                "callsign": spec.callsign_prefix,
            }
            for spec in s.platform_specs.values()
        },
        "platforms": [
            {"id": p.id, "type": p.spec_name, "start": p.start_node, "owner": p.owner} for p in s.platforms
        ],
        "casualty_streams": {
            cid: {
                "mean_wave_interval_min": st.mean_wave_interval_min,
                "mean_wave_size": st.mean_wave_size,
                "rate_multiplier": st.rate_multiplier,
                "urgent_fraction": st.urgent_fraction,
                "litter_fraction": st.litter_fraction,
                "windows": [[a, None if math.isinf(b) else b] for a, b in st.activation_windows],
            }
            for cid, st in s.ccp_streams.items()
        },
        "roles": [
            {
                "name": r.role_name,
                **({"inject": True} if r.permissions.can_inject else {}),
                **({"sees_all": True} if r.permissions.sees_all else {}),
                **({} if r.permissions.can_place_sites else {"place_sites": False}),
            }
            for r in s.roles.values()
        ],
        "adversary": {
            "enabled": s.adversary.enabled,
            "mean_gap_min": s.adversary.mean_gap_min,
            "radius_km": list(s.adversary.radius_km_range),
            "duration_min": list(s.adversary.duration_min_range),
            "affects": [c.value for c in s.adversary.affects],
            "corridors": [{"node": c.node, "jitter_km": c.jitter_km} for c in s.adversary.corridors],
        },
    }


def dumps_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=True)


def load_fixture(name: str) -> Scenario:
    """Load one of the bundled scenario fixtures by bare name."""
    return load_scenario(fixture_text(name))


def fixture_text(name: str) -> str:
    ref = importlib.resources.files("evacsim") / "fixtures" / f"{name}.yaml"
    return ref.read_text()
