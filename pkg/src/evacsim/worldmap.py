"""Spatial model: road/sea graph, free-flight air routing, threat-ring denial.

Ground and sea platforms move over a discrete passable graph; air platforms fly
straight lines and detour around active threat rings, which are hard no-fly
disks.  Route planning is pure and side-effect free, so UI previews and
policies can call it concurrently with the engine.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum


class PlatformClass(str, Enum):
    ROTARY_WING = "rotary_wing"
    TILT_ROTOR = "tilt_rotor"
    GROUND_VEHICLE = "ground_vehicle"
    SHIP = "ship"


AIR_CLASSES = frozenset({PlatformClass.ROTARY_WING, PlatformClass.TILT_ROTOR})


class NodeKind(str, Enum):
    LAND = "land"
    PORT = "port"
    WATER = "water"


@dataclass(frozen=True)
class MapNode:
    id: str
    x: float
    y: float
    kind: NodeKind
    island: str | None = None


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    km: float


@dataclass
class WorldMap:
    nodes: dict[str, MapNode]
    road_edges: list[Edge]
    sea_lanes: list[Edge]
    _road_adj: dict[str, list[tuple[str, float]]] = field(default_factory=dict, repr=False)
    _sea_adj: dict[str, list[tuple[str, float]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._road_adj = _adjacency(self.road_edges)
        self._sea_adj = _adjacency(self.sea_lanes)

    def node_pos(self, node_id: str) -> tuple[float, float]:
        n = self.nodes[node_id]
        return (n.x, n.y)

    def adjacency(self, mode: str) -> dict[str, list[tuple[str, float]]]:
        return self._road_adj if mode == "road" else self._sea_adj

    def edges(self, mode: str) -> list[Edge]:
        return self.road_edges if mode == "road" else self.sea_lanes


def _adjacency(edges: list[Edge]) -> dict[str, list[tuple[str, float]]]:
    adj: dict[str, list[tuple[str, float]]] = {}
    for e in edges:
        adj.setdefault(e.a, []).append((e.b, e.km))
        adj.setdefault(e.b, []).append((e.a, e.km))
    return adj


@dataclass(frozen=True)
class ThreatRing:
    id: str
    cx: float
    cy: float
    radius_km: float
    affects: frozenset[PlatformClass]
    start_min: float
    end_min: float

    def active_at(self, now: float) -> bool:
        return self.start_min <= now < self.end_min

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.cx, y - self.cy) < self.radius_km

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "cx": self.cx,
            "cy": self.cy,
            "radius_km": self.radius_km,
            "affects": sorted(c.value for c in self.affects),
            "start_min": self.start_min,
            "end_min": self.end_min,
        }

    @staticmethod
    def from_dict(d: dict) -> "ThreatRing":
        return ThreatRing(
            id=d["id"],
            cx=d["cx"],
            cy=d["cy"],
            radius_km=d["radius_km"],
            affects=frozenset(PlatformClass(c) for c in d["affects"]),
            start_min=d["start_min"],
            end_min=d["end_min"],
        )


@dataclass(frozen=True)
class Route:
    """A planned movement: waypoint polyline with total distance and eta."""

    waypoints: tuple[tuple[float, float], ...]
    node_ids: tuple[str | None, ...]  # parallel to waypoints; None for free points
    total_km: float
    speed_kmh: float
    mode: str  # road | sea | air

    @property
    def eta_min(self) -> float:
        return self.total_km / self.speed_kmh * 60.0

    def position_at(self, dist_km: float) -> tuple[float, float]:
        """Point dist_km along the polyline (clamped to the ends)."""
        if dist_km <= 0:
            return self.waypoints[0]
        remaining = dist_km
        for (ax, ay), (bx, by) in zip(self.waypoints, self.waypoints[1:]):
            seg = math.hypot(bx - ax, by - ay)
            if remaining <= seg and seg > 0:
                f = remaining / seg
                return (ax + f * (bx - ax), ay + f * (by - ay))
            remaining -= seg
        return self.waypoints[-1]

    def tail_from(self, dist_km: float) -> list[tuple[float, float]]:
        """Remaining polyline from dist_km onward (first point interpolated)."""
        pts = [self.position_at(dist_km)]
        run = 0.0
        for (ax, ay), (bx, by) in zip(self.waypoints, self.waypoints[1:]):
            seg = math.hypot(bx - ax, by - ay)
            if run + seg > dist_km + 1e-9:
                pts.append((bx, by))
            run += seg
        return pts

    def to_dict(self) -> dict:
        return {
            "waypoints": [list(p) for p in self.waypoints],
            "node_ids": list(self.node_ids),
            "total_km": self.total_km,
            "speed_kmh": self.speed_kmh,
            "mode": self.mode,
        }

    @staticmethod
    def from_dict(d: dict) -> "Route":
        return Route(
            waypoints=tuple((p[0], p[1]) for p in d["waypoints"]),
            node_ids=tuple(d["node_ids"]),
            total_km=d["total_km"],
            speed_kmh=d["speed_kmh"],
            mode=d["mode"],
        )


# ---------------------------------------------------------------------------
# geometry


def dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def point_segment_distance(p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def segment_hits_ring(a: tuple[float, float], b: tuple[float, float], ring: ThreatRing, slack: float = 1e-9) -> bool:
    return point_segment_distance((ring.cx, ring.cy), a, b) < ring.radius_km * (1.0 - slack)


def _relevant_rings(rings: list[ThreatRing], platform_class: PlatformClass, now: float) -> list[ThreatRing]:
    return [r for r in rings if r.active_at(now) and platform_class in r.affects]


# ---------------------------------------------------------------------------
# origins

# An origin/destination is a node id, or a free position (for air and for
# platforms halted mid-route):  ("pos", x, y) possibly carrying the graph edge
# the position lies on, ("edge", a, b, offset_km, x, y), so ground platforms
# can resume from mid-edge.


@dataclass(frozen=True)
class Spot:
    """Where a platform is: a graph node, a point on an edge, or a free point."""

    x: float
    y: float
    node: str | None = None
    edge: tuple[str, str, float] | None = None  # (a, b, km offset from a)

    @staticmethod
    def at_node(world: WorldMap, node_id: str) -> "Spot":
        x, y = world.node_pos(node_id)
        return Spot(x=x, y=y, node=node_id)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "node": self.node, "edge": list(self.edge) if self.edge else None}

    @staticmethod
    def from_dict(d: dict) -> "Spot":
        e = d.get("edge")
        return Spot(x=d["x"], y=d["y"], node=d.get("node"), edge=tuple(e) if e else None)


# ---------------------------------------------------------------------------
# routing


def _dijkstra(
    adj: dict[str, list[tuple[str, float]]],
    start: str,
    goal: str,
    blocked: set[tuple[str, str]],
    extra: dict[str, list[tuple[str, float]]] | None = None,
) -> tuple[list[str], float] | None:
    """Shortest path by km; `blocked` holds undirected node pairs to skip."""
    seen: set[str] = set()
    best: dict[str, float] = {start: 0.0}
    prev: dict[str, str] = {}
    pq: list[tuple[float, str]] = [(0.0, start)]
    while pq:
        d, u = heapq.heappop(pq)
        if u in seen:
            continue
        if u == goal:
            path = [u]
            while u in prev:
                u = prev[u]
                path.append(u)
            return path[::-1], d
        seen.add(u)
        neighbors = list(adj.get(u, ()))
        if extra and u in extra:
            neighbors += extra[u]
        for v, w in neighbors:
            if (u, v) in blocked or (v, u) in blocked:
                continue
            nd = d + w
            if v not in best or nd < best[v] - 1e-12:
                best[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    return None


def _blocked_pairs(world: WorldMap, mode: str, rings: list[ThreatRing]) -> set[tuple[str, str]]:
    out: set[tuple[str, str]] = set()
    if not rings:
        return out
    for e in world.edges(mode):
        pa, pb = world.node_pos(e.a), world.node_pos(e.b)
        if any(segment_hits_ring(pa, pb, r) for r in rings):
            out.add((e.a, e.b))
    return out


def _graph_route(
    world: WorldMap,
    mode: str,
    origin: Spot,
    dest_node: str,
    speed_kmh: float,
    rings: list[ThreatRing],
) -> Route | None:
    if dest_node not in world.nodes:
        raise ValueError(f"unknown node: {dest_node}")
    blocked = _blocked_pairs(world, mode, rings)
    dest_pos = world.node_pos(dest_node)
    # Destination engulfed by a ring: denied for this class.
    if any(r.contains(*dest_pos) for r in rings):
        return None

    extra: dict[str, list[tuple[str, float]]] = {}
    start_key: str
    prefix: list[tuple[float, float]] = []
    if origin.node is not None:
        start_key = origin.node
        if start_key not in world.nodes:
            raise ValueError(f"unknown node: {start_key}")
    elif origin.edge is not None:
        a, b, off = origin.edge
        edge = next((e for e in world.edges(mode) if {e.a, e.b} == {a, b}), None)
        if edge is None:
            raise ValueError(f"unknown edge: {a}-{b}")
        km_from_a = off if edge.a == a else edge.km - off
        start_key = "__origin__"
        legs = []
        pa, pb = world.node_pos(edge.a), world.node_pos(edge.b)
        here = (origin.x, origin.y)
        if not any(segment_hits_ring(here, pa, r) for r in rings):
            legs.append((edge.a, km_from_a))
        if not any(segment_hits_ring(here, pb, r) for r in rings):
            legs.append((edge.b, edge.km - km_from_a))
        extra[start_key] = legs
    else:
        raise ValueError("ground/sea origin must be a node or an edge position")

    found = _dijkstra(world.adjacency(mode), start_key, dest_node, blocked, extra)
    if found is None:
        return None
    path, km = found
    if path and path[0] == "__origin__":
        prefix = [(origin.x, origin.y)]
        path = path[1:]
    waypoints = tuple(prefix + [world.node_pos(n) for n in path])
    node_ids = tuple([None] * len(prefix) + list(path))
    if len(waypoints) < 2:  # already at destination
        waypoints = (waypoints[0], waypoints[0])
        node_ids = (node_ids[0], node_ids[0])
    return Route(waypoints=waypoints, node_ids=node_ids, total_km=km, speed_kmh=speed_kmh, mode=mode)


def _ring_polygon(ring: ThreatRing, sides: int = 48) -> list[tuple[float, float]]:
    # Circumscribe the disk so polygon chords stay tangent-or-outside, then pad
    # slightly so the chord test clears strict inequality.
    r = ring.radius_km / math.cos(math.pi / sides) * (1.0 + 1e-6)
    return [
        (ring.cx + r * math.cos(2 * math.pi * k / sides), ring.cy + r * math.sin(2 * math.pi * k / sides))
        for k in range(sides)
    ]


def _air_route(
    origin: Spot,
    dest_pos: tuple[float, float],
    dest_node: str | None,
    speed_kmh: float,
    rings: list[ThreatRing],
) -> Route | None:
    start = (origin.x, origin.y)
    # Rings sitting on the origin cannot trap the platform: ignore them.
    rings = [r for r in rings if not r.contains(*start)]
    if any(r.contains(*dest_pos) for r in rings):
        return None
    if not any(segment_hits_ring(start, dest_pos, r) for r in rings):
        km = dist(start, dest_pos)
        return Route(
            waypoints=(start, dest_pos),
            node_ids=(origin.node, dest_node),
            total_km=km,
            speed_kmh=speed_kmh,
            mode="air",
        )

    # Visibility graph over inflated ring-boundary polygons.
    points: list[tuple[float, float]] = [start, dest_pos]
    for ring in rings:
        points.extend(_ring_polygon(ring))
    n = len(points)
    adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if any(segment_hits_ring(points[i], points[j], r) for r in rings):
                continue
            w = dist(points[i], points[j])
            adj[i].append((j, w))
            adj[j].append((i, w))

    seen: set[int] = set()
    best: dict[int, float] = {0: 0.0}
    prev: dict[int, int] = {}
    pq: list[tuple[float, int]] = [(0.0, 0)]
    while pq:
        d, u = heapq.heappop(pq)
        if u in seen:
            continue
        if u == 1:
            idx = [u]
            while u in prev:
                u = prev[u]
                idx.append(u)
            idx.reverse()
            waypoints = tuple(points[i] for i in idx)
            node_ids: tuple[str | None, ...] = tuple(
                [origin.node] + [None] * (len(idx) - 2) + [dest_node]
            )
            return Route(waypoints=waypoints, node_ids=node_ids, total_km=d, speed_kmh=speed_kmh, mode="air")
        seen.add(u)
        for v, w in adj[u]:
            nd = d + w
            if v not in best or nd < best[v] - 1e-12:
                best[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    return None


def plan_route(
    world: WorldMap,
    platform_class: PlatformClass,
    speed_kmh: float,
    origin: Spot,
    dest_node: str,
    rings: list[ThreatRing],
    now: float,
) -> Route | None:
    """Plan a legal route, or None when no passable path exists (Unreachable).

    Ground/sea: shortest path over edges not cut by an active ring affecting
    this class.  Air: straight line, else shortest polygonal detour treating
    active rings as hard no-fly disks.
    """
    if dest_node not in world.nodes:
        raise ValueError(f"unknown node: {dest_node}")
    if origin.node is not None and origin.node == dest_node:
        raise ValueError("origin and destination are the same node")
    active = _relevant_rings(rings, platform_class, now)
    if platform_class in AIR_CLASSES:
        return _air_route(origin, world.node_pos(dest_node), dest_node, speed_kmh, active)
    mode = "road" if platform_class == PlatformClass.GROUND_VEHICLE else "sea"
    return _graph_route(world, mode, origin, dest_node, speed_kmh, active)


def plan_route_to_pos(
    platform_class: PlatformClass,
    speed_kmh: float,
    origin: Spot,
    dest_pos: tuple[float, float],
    rings: list[ThreatRing],
    now: float,
) -> Route | None:
    """Air-only: route to an arbitrary position (used to chase mobile facilities)."""
    if platform_class not in AIR_CLASSES:
        raise ValueError("position destinations are only flyable")
    active = _relevant_rings(rings, platform_class, now)
    return _air_route(origin, dest_pos, None, speed_kmh, active)


def route_tail_blocked(
    route: Route,
    progress_km: float,
    platform_class: PlatformClass,
    rings: list[ThreatRing],
    now: float,
) -> bool:
    """True when an active ring cuts the not-yet-flown/driven remainder."""
    active = _relevant_rings(rings, platform_class, now)
    if not active:
        return False
    tail = route.tail_from(progress_km)
    active = [r for r in active if not r.contains(*tail[0])]
    for a, b in zip(tail, tail[1:]):
        if any(segment_hits_ring(a, b, r) for r in active):
            return True
    return False


# ---------------------------------------------------------------------------
# scripted adversary


@dataclass
class AdversaryState:
    next_spawn_min: float
    counter: int = 0


def adversary_due_rings(
    params,  # scenario.AdversaryParams
    state: AdversaryState,
    rng,
    now: float,
    world: WorldMap,
) -> list[ThreatRing]:
    """Spawn every ring whose (seeded, exponential-gap) time has arrived.

    Centers are drawn inside configured corridors: a uniform jitter disk
    around named map nodes, which keeps rings near roads and routes.
    """
    if not params.enabled or not params.corridors:
        return []
    out: list[ThreatRing] = []
    while state.next_spawn_min <= now:
        spawn_t = state.next_spawn_min
        corridor = params.corridors[rng.randrange(len(params.corridors))]
        cx0, cy0 = world.node_pos(corridor.node)
        # uniform in disk
        ang = rng.uniform_range(0.0, 2 * math.pi)
        rad = corridor.jitter_km * math.sqrt(rng.uniform())
        radius = rng.uniform_range(*params.radius_km_range)
        duration = rng.uniform_range(*params.duration_min_range)
        state.counter += 1
        out.append(
            ThreatRing(
                id=f"ring{state.counter:04d}",
                cx=cx0 + rad * math.cos(ang),
                cy=cy0 + rad * math.sin(ang),
                radius_km=radius,
                affects=frozenset(params.affects),
                start_min=spawn_t,
                end_min=spawn_t + duration,
            )
        )
        state.next_spawn_min = spawn_t + rng.exponential(params.mean_gap_min)
    return out


def spawn_threat_rings(params, rng, now: float, world: WorldMap, state: AdversaryState | None = None) -> list[ThreatRing]:
    """Single-shot form of the adversary step (state defaults to 'due now')."""
    if state is None:
        state = AdversaryState(next_spawn_min=now)
    return adversary_due_rings(params, state, rng, now, world)
