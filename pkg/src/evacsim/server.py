"""Network authority: sessions, role binding, fog-filtered streams, injects.

Wire protocol: JSON text messages over a WebSocket (one message per frame),
versioned at the hello handshake; the full message catalogue lives in
docs/protocol.md.  The engine remains the single writer; connections feed an
ordered intake queue and receive per-role deltas at tick cadence with
ack-based resume.  Two-team sessions run two isolated worlds from the same
scenario and seed.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import tempfile
from collections import deque
from dataclasses import dataclass, field, replace

from .analytics import events_to_dicts, export_debrief
from .engine import ENGINE_VERSION, Engine, Inject
from .rules import ActionRequest
from .scenario import Facility, FacilityRole, NodeKind, Scenario, validate_scenario
from .views import view_for, visible_events
from .world import WorldState

log = logging.getLogger("evacsim.server")

PROTOCOL_VERSION = 1
DELTA_BUFFER = 512  # per-role ring of past deltas for reconnect resume
CLIENT_QUEUE_MAX = 64  # beyond this a lagging client is coalesced to a snapshot


@dataclass(eq=False)  # identity semantics: connections live in sets
class ClientConn:
    ws: object
    role: str | None = None
    team: int = 0
    observer: bool = False
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(maxsize=CLIENT_QUEUE_MAX))
    needs_snapshot: bool = False
    last_acked: int = -1


@dataclass
class TeamWorld:
    index: int
    engine: Engine
    delta_seq: int = 0
    buffers: dict[str, deque] = field(default_factory=dict)  # role -> deque[(seq, message)]


class Session:
    """One classroom game: planning, execution with 1-2 team worlds, debrief."""

    def __init__(self, scenario: Scenario, seed: int, teams: int = 1, tick_len_s: int = 6, pace: str = "real", archive_dir: str | None = None):
        if teams not in (1, 2):
            raise ValueError("sessions run one or two competing teams")
        self.scenario = scenario
        self.seed = seed
        self.n_teams = teams
        self.tick_len_s = tick_len_s
        self.pace = pace
        self.phase = "planning"
        self.placements: list[dict] = []
        self.teams: list[TeamWorld] = []
        self.clients: set[ClientConn] = set()
        self.archive_dir = archive_dir or tempfile.mkdtemp(prefix="evacsim_session_")
        self._commanders: dict[tuple[int, str], ClientConn] = {}
        self._loop_task: asyncio.Task | None = None
        self._stop = asyncio.Event()

    # --- roster -----------------------------------------------------

    def bind(self, conn: ClientConn, role: str, team: int, observer: bool) -> tuple[bool, str | None]:
        if role not in self.scenario.roles:
            return False, f"unknown role '{role}'"
        if not 0 <= team < self.n_teams:
            return False, f"unknown team {team}"
        key = (team, role)
        if not observer:
            holder = self._commanders.get(key)
            if holder is not None and holder in self.clients:
                return False, f"role '{role}' already bound on team {team}"
            self._commanders[key] = conn
        conn.role = role
        conn.team = team
        conn.observer = observer
        return True, None

    def drop(self, conn: ClientConn) -> None:
        self.clients.discard(conn)
        for key, holder in list(self._commanders.items()):
            if holder is conn:
                del self._commanders[key]

    # --- planning ---------------------------------------------------

    def add_placements(self, role: str, placements: list[dict]) -> tuple[bool, str | None]:
        if self.phase != "planning":
            return False, "phase: placements are only accepted during planning"
        if not self.scenario.roles[role].permissions.can_place_sites:
            return False, "role may not place sites"
        for p in placements:
            err = self._placement_error(p)
            if err:
                return False, err
        for p in placements:
            self.placements.append({**p, "role": role})
        return True, None

    def _placement_error(self, p: dict) -> str | None:
        kind = p.get("kind")
        node_id = p.get("node")
        node = self.scenario.world.nodes.get(node_id)
        if node is None:
            return f"unknown node '{node_id}'"
        if kind in ("axp", "hlz"):
            if node.kind == NodeKind.WATER:
                return f"{kind} cannot sit on open water"
            return None
        if kind == "facility_start":
            fac = self.scenario.facilities.get(p.get("facility"))
            if fac is None:
                return f"unknown facility '{p.get('facility')}'"
            if fac.mobile and node.kind == NodeKind.LAND:
                return "mobile facility start must be a port/water node"
            if not fac.mobile and node.kind == NodeKind.WATER and fac.role not in (FacilityRole.ROLE2, FacilityRole.ROLE3):
                return "land facility start cannot be open water"
            return None
        return f"unknown placement kind '{kind}'"

    def commit_planning(self) -> tuple[bool, str | None]:
        if self.phase != "planning":
            return False, "phase: planning already committed"
        scenario = self._materialize(self.placements)
        violations = validate_scenario(scenario)
        if violations:
            return False, "; ".join(str(v) for v in violations)
        for i in range(self.n_teams):
            eng = Engine(scenario, seed=self.seed, tick_len_s=self.tick_len_s)
            self.teams.append(TeamWorld(index=i, engine=eng))
        self.phase = "execution"
        return True, None

    def _materialize(self, placements: list[dict]) -> Scenario:
        scenario = self.scenario
        facilities = dict(scenario.facilities)
        counter = 0
        for p in placements:
            if p["kind"] in ("axp", "hlz"):
                counter += 1
                fid = p.get("id") or f"{p['kind']}_p{counter}"
                facilities[fid] = Facility(id=fid, role=FacilityRole(p["kind"]), node=p["node"])
            elif p["kind"] == "facility_start":
                old = facilities[p["facility"]]
                facilities[p["facility"]] = replace(old, node=p["node"])
        out = replace(scenario, facilities=facilities)
        return out

    # --- execution --------------------------------------------------

    def world_for(self, team: int) -> WorldState:
        return self.teams[team].engine.world

    def step_once(self) -> None:
        """Advance every team world one tick and broadcast the deltas."""
        for tw in self.teams:
            if tw.engine.finished:
                continue
            events = tw.engine.step(1)
            tw.delta_seq += 1
            eng = tw.engine
            batch = events_to_dicts(events)
            for role in self.scenario.roles:
                view = view_for(eng.world, eng.clock.tick, eng.now, role)
                msg = {
                    "type": "delta",
                    "seq": tw.delta_seq,
                    "tick": eng.clock.tick,
                    "time": eng.now,
                    "events": visible_events(eng.world, eng.now, role, batch),
                    "view": view.to_dict(),
                }
                buf = tw.buffers.setdefault(role, deque(maxlen=DELTA_BUFFER))
                buf.append((tw.delta_seq, msg))
        for conn in list(self.clients):
            if conn.role is None:
                continue
            tw = self.teams[conn.team]
            buf = tw.buffers.get(conn.role)
            if not buf:
                continue
            seq, msg = buf[-1]
            self._offer(conn, msg)
        if all(tw.engine.finished for tw in self.teams):
            self._enter_debrief()

    def _offer(self, conn: ClientConn, msg: dict) -> None:
        try:
            conn.queue.put_nowait(msg)
        except asyncio.QueueFull:
            # lagging client: drop backlog, resume from a fresh snapshot
            while not conn.queue.empty():
                try:
                    conn.queue.get_nowait()
                except asyncio.QueueEmpty:
                    break
            conn.needs_snapshot = True
            try:
                conn.queue.put_nowait(self.snapshot_message(conn))
            except asyncio.QueueFull:
                pass

    def snapshot_message(self, conn: ClientConn) -> dict:
        tw = self.teams[conn.team] if self.teams else None
        if tw is None:
            return {"type": "snapshot", "seq": 0, "phase": self.phase, "view": None}
        eng = tw.engine
        view = view_for(eng.world, eng.clock.tick, eng.now, conn.role)
        return {
            "type": "snapshot",
            "seq": tw.delta_seq,
            "tick": eng.clock.tick,
            "time": eng.now,
            "phase": self.phase,
            "view": view.to_dict(),
        }

    def resume_messages(self, conn: ClientConn, from_seq: int) -> list[dict]:
        """Deltas after from_seq if still buffered, else one fresh snapshot."""
        tw = self.teams[conn.team] if self.teams else None
        if tw is None:
            return [self.snapshot_message(conn)]
        buf = tw.buffers.get(conn.role, deque())
        missing = [msg for seq, msg in buf if seq > from_seq]
        if missing and missing[0]["seq"] == from_seq + 1:
            return missing
        return [self.snapshot_message(conn)]

    def _enter_debrief(self) -> None:
        if self.phase == "debrief":
            return
        self.phase = "debrief"
        for tw in self.teams:
            out = os.path.join(self.archive_dir, f"team{tw.index}")
            from .cli import write_archive

            write_archive(tw.engine, out)
        log.info("session archived to %s", self.archive_dir)

    def debrief_summary(self, team: int) -> dict:
        tw = self.teams[team]
        path = os.path.join(self.archive_dir, f"team{tw.index}", "debrief", "summary.json")
        if os.path.exists(path):
            with open(path) as fh:
                return json.load(fh)
        return export_debrief(events_to_dicts(tw.engine.log), os.path.join(self.archive_dir, f"tmp_team{tw.index}"))

    # --- chat ---------------------------------------------------------

    def chat_targets(self, sender: ClientConn) -> list[ClientConn]:
        return [
            c
            for c in self.clients
            if c is not sender and c.team == sender.team and c.role is not None
        ]


class SessionServer:
    def __init__(self, session: Session):
        self.session = session

    async def run_loop(self) -> None:
        """Pace the shared clock; 'fast' mode runs flat out for tests."""
        s = self.session
        tick_real_s = s.tick_len_s / (s.scenario.time_compression * 60.0)
        while not s._stop.is_set():
            if s.phase == "execution":
                s.step_once()
                if s.phase == "debrief":
                    await self._broadcast_phase()
            if s.pace == "fast":
                await asyncio.sleep(0)
            else:
                await asyncio.sleep(tick_real_s)

    async def _broadcast_phase(self) -> None:
        for conn in list(self.session.clients):
            self.session._offer(conn, {"type": "phase", "phase": self.session.phase})

    async def handler(self, ws) -> None:
        conn = ClientConn(ws=ws)
        self.session.clients.add(conn)
        sender = asyncio.create_task(self._sender(conn))
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await self._send(conn, {"type": "error", "reason": "malformed message"})
                    continue
                await self._dispatch(conn, msg)
        finally:
            sender.cancel()
            self.session.drop(conn)

    async def _sender(self, conn: ClientConn) -> None:
        while True:
            msg = await conn.queue.get()
            try:
                await conn.ws.send(json.dumps(msg))
            except Exception:
                return

    async def _send(self, conn: ClientConn, msg: dict) -> None:
        self.session._offer(conn, msg)

    async def _dispatch(self, conn: ClientConn, msg: dict) -> None:
        s = self.session
        mtype = msg.get("type")

        if mtype == "hello":
            if msg.get("protocol") != PROTOCOL_VERSION:
                await self._send(conn, {"type": "error", "reason": f"protocol version mismatch (server {PROTOCOL_VERSION})"})
                return
            await self._send(
                conn,
                {
                    "type": "hello_ack",
                    "protocol": PROTOCOL_VERSION,
                    "engine_version": ENGINE_VERSION,
                    "scenario": s.scenario.name,
                    "teams": s.n_teams,
                    "phase": s.phase,
                    "roles": sorted(s.scenario.roles),
                },
            )
            return

        if mtype == "join":
            ok, reason = s.bind(conn, msg.get("role", ""), int(msg.get("team", 0)), bool(msg.get("observe", False)))
            if not ok:
                await self._send(conn, {"type": "join_refused", "reason": reason})
                return
            perms = s.scenario.roles[conn.role].permissions
            await self._send(
                conn,
                {
                    "type": "welcome",
                    "role": conn.role,
                    "team": conn.team,
                    "observer": conn.observer,
                    "phase": s.phase,
                    "can_inject": perms.can_inject,
                    "sees_all": perms.sees_all,
                    "map": _map_summary(s.scenario),
                },
            )
            if s.phase != "planning":
                last = int(msg.get("resume_from", -1))
                for m in s.resume_messages(conn, last) if last >= 0 else [s.snapshot_message(conn)]:
                    await self._send(conn, m)
            return

        if conn.role is None:
            await self._send(conn, {"type": "error", "reason": "join first"})
            return

        if mtype == "ack":
            conn.last_acked = int(msg.get("seq", -1))
            return

        if mtype == "place":
            ok, reason = s.add_placements(conn.role, msg.get("placements", []))
            await self._send(conn, {"type": "place_result", "accepted": ok, "reason": reason})
            return

        if mtype == "commit_planning":
            if not s.scenario.roles[conn.role].permissions.can_inject:
                await self._send(conn, {"type": "commit_result", "accepted": False, "reason": "instructor confirms the commit"})
                return
            ok, reason = s.commit_planning()
            await self._send(conn, {"type": "commit_result", "accepted": ok, "reason": reason})
            if ok:
                for c in list(s.clients):
                    s._offer(c, {"type": "phase", "phase": s.phase})
            return

        if mtype == "action":
            if s.phase != "execution":
                await self._send(conn, {"type": "action_result", "action_id": msg.get("action_id"), "accepted": False, "reason": "phase"})
                return
            if conn.observer:
                await self._send(conn, {"type": "action_result", "action_id": msg.get("action_id"), "accepted": False, "reason": "observer connections cannot command"})
                return
            action = ActionRequest(
                actor=conn.role,
                platform=msg.get("platform", ""),
                verb=msg.get("verb", ""),
                params=msg.get("params", {}),
                issued_at=s.teams[conn.team].engine.now,
                action_id=msg.get("action_id"),
            )
            ok, reason, seq = s.teams[conn.team].engine.enqueue_action(action)
            await self._send(
                conn,
                {"type": "action_result", "action_id": msg.get("action_id"), "accepted": ok, "reason": reason, "input_seq": seq},
            )
            return

        if mtype == "inject":
            if s.phase != "execution":
                await self._send(conn, {"type": "inject_result", "accepted": False, "reason": "phase"})
                return
            inject = Inject(kind=msg.get("kind", ""), params=msg.get("params", {}))
            team_sel = msg.get("team")
            targets = [s.teams[int(team_sel)]] if team_sel is not None else s.teams
            results = []
            for tw in targets:
                ok, reason, seq = tw.engine.enqueue_inject(conn.role, inject)
                results.append({"team": tw.index, "accepted": ok, "reason": reason, "input_seq": seq})
            await self._send(conn, {"type": "inject_result", "accepted": all(r["accepted"] for r in results), "results": results})
            return

        if mtype == "chat":
            if s.phase == "execution" and s.teams[conn.team].engine.world.blackout_active(s.teams[conn.team].engine.now):
                await self._send(conn, {"type": "chat_blocked", "reason": "communication blackout in effect"})
                return
            for peer in s.chat_targets(conn):
                s._offer(peer, {"type": "chat", "from": conn.role, "text": str(msg.get("text", ""))[:2000]})
            return

        if mtype == "score_query":
            if not s.scenario.roles[conn.role].permissions.sees_all:
                await self._send(conn, {"type": "error", "reason": "live scoring is instructor-only"})
                return
            boards = []
            for tw in s.teams:
                t = tw.engine.world.totals
                boards.append(
                    {"team": tw.index, "score": t.score, "saves": t.saves, "deaths": t.deaths,
                     "alive": t.spawned - t.deaths - t.saves, "spawned": t.spawned}
                )
            await self._send(conn, {"type": "score", "teams": boards})
            return

        if mtype == "get_debrief":
            if s.phase != "debrief":
                await self._send(conn, {"type": "error", "reason": "debrief not ready"})
                return
            await self._send(conn, {"type": "debrief", "team": conn.team, "summary": s.debrief_summary(conn.team)})
            return

        if mtype == "pause" or mtype == "resume":
            if not s.scenario.roles[conn.role].permissions.can_inject:
                await self._send(conn, {"type": "error", "reason": "instructor-only"})
                return
            for tw in s.teams:
                tw.engine.clock.paused = mtype == "pause"
            await self._send(conn, {"type": "clock", "paused": mtype == "pause"})
            return

        await self._send(conn, {"type": "error", "reason": f"unknown message type '{mtype}'"})


def _map_summary(scenario: Scenario) -> dict:
    return {
        "nodes": [
            {"id": n.id, "x": n.x, "y": n.y, "kind": n.kind.value, "island": n.island}
            for n in scenario.world.nodes.values()
        ],
        "roads": [{"a": e.a, "b": e.b, "km": e.km} for e in scenario.world.road_edges],
        "sea_lanes": [{"a": e.a, "b": e.b, "km": e.km} for e in scenario.world.sea_lanes],
        "observation_radius_km": scenario.observation.radius_km,
    }


async def serve_session(
    scenario: Scenario,
    seed: int,
    host: str = "127.0.0.1",
    port: int = 8765,
    teams: int = 1,
    pace: str = "real",
    tick_len_s: int = 6,
    archive_dir: str | None = None,
    ready: asyncio.Event | None = None,
) -> None:
    from websockets.asyncio.server import serve

    session = Session(scenario, seed=seed, teams=teams, tick_len_s=tick_len_s, pace=pace, archive_dir=archive_dir)
    server = SessionServer(session)
    loop_task = asyncio.create_task(server.run_loop())
    async with serve(server.handler, host, port):
        log.info("session server on ws://%s:%d (%s)", host, port, scenario.name)
        if ready is not None:
            ready.set()
        try:
            await session._stop.wait()
        finally:
            loop_task.cancel()
