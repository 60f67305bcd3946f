"""Debrief statistics: pure functions of the event log.

Everything here is recomputable from a replayed log; nothing reads live
engine state.  Delay is the time a patient waits at a node for pickup: for a
collection point, from initialization to first pickup; for a treatment
facility, from treatment completion to pickup.  Patients never picked up are
reported as censored rather than silently dropped.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

from .scoring import ScoreBoard, score_screen

Z95 = 1.96


@dataclass(frozen=True)
class DelayRecord:
    patient: str
    node: str
    precedence: str
    delay_min: float
    censored: bool = False


@dataclass(frozen=True)
class StatRow:
    group: tuple
    n: int
    mean: float | None
    ci_lo: float | None
    ci_hi: float | None
    n_censored: int = 0


def _mean_ci(values: list[float]) -> tuple[float | None, float | None, float | None]:
    n = len(values)
    if n == 0:
        return None, None, None
    mean = sum(values) / n
    if n < 2:
        return mean, None, None  # CI undefined below two observations
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    half = Z95 * math.sqrt(var) / math.sqrt(n)
    return mean, mean - half, mean + half


def extract_delays(events: list[dict]) -> list[DelayRecord]:
    """One record per completed (or censored) wait for pickup."""
    waiting: dict[str, tuple[str, float]] = {}  # patient -> (node, since)
    precedence: dict[str, str] = {}
    records: list[DelayRecord] = []
    end_time = 0.0
    for ev in events:
        kind, t, d = ev["kind"], ev["time"], ev["data"]
        end_time = max(end_time, t)
        if kind == "patient_spawned":
            precedence[d["patient"]] = d["precedence"]
            waiting[d["patient"]] = (d["ccp"], d["t0"])
        elif kind == "loaded":
            for pid in d["patients"]:
                if pid in waiting and waiting[pid][0] == d["site"]:
                    node, since = waiting.pop(pid)
                    records.append(DelayRecord(pid, node, precedence[pid], t - since))
        elif kind == "patient_treated":
            waiting[d["patient"]] = (d["facility"], t)
        elif kind == "died":
            pid = d["patient"]
            if pid in waiting:
                node, since = waiting.pop(pid)
                records.append(DelayRecord(pid, node, precedence[pid], t - since, censored=True))
        elif kind == "run_ended":
            end_time = t
    for pid, (node, since) in waiting.items():
        records.append(DelayRecord(pid, node, precedence[pid], end_time - since, censored=True))
    return records


def delay_stats(events: list[dict]) -> list[StatRow]:
    """Mean wait and 95% CI per (node, precedence); censored waits counted apart."""
    records = extract_delays(events)
    groups: dict[tuple, list[float]] = {}
    censored: dict[tuple, int] = {}
    for r in records:
        key = (r.node, r.precedence)
        if r.censored:
            censored[key] = censored.get(key, 0) + 1
            groups.setdefault(key, groups.get(key, []))
        else:
            groups.setdefault(key, []).append(r.delay_min)
    rows = []
    for key in sorted(set(groups) | set(censored)):
        vals = groups.get(key, [])
        mean, lo, hi = _mean_ci(vals)
        rows.append(StatRow(group=key, n=len(vals), mean=mean, ci_lo=lo, ci_hi=hi, n_censored=censored.get(key, 0)))
    return rows


@dataclass(frozen=True)
class EvacRow:
    precedence: str
    island: str | None
    n: int
    mean: float | None
    ci_lo: float | None
    ci_hi: float | None
    standard_min: float
    compliant_fraction: float | None  # share with t2 - t0 <= standard
    mean_meets_standard: bool | None


def evac_time_stats(events: list[dict], island_of_ccp: dict[str, str] | None = None) -> list[EvacRow]:
    """Time to surgical care per precedence (and per island when mapped)."""
    t0: dict[str, float] = {}
    prec: dict[str, str] = {}
    ccp: dict[str, str] = {}
    t2: dict[str, float] = {}
    standards: dict[str, float] = {}
    for ev in events:
        kind, d = ev["kind"], ev["data"]
        if kind == "run_started":
            standards = {k: v["standard_min"] for k, v in d["precedence"].items()}
        elif kind == "patient_spawned":
            t0[d["patient"]] = d["t0"]
            prec[d["patient"]] = d["precedence"]
            ccp[d["patient"]] = d["ccp"]
        elif kind == "unloaded" and d.get("stamped") == "t2":
            for pid in d["patients"]:
                t2[pid] = ev["time"]

    def rows_for(group_pids: list[str], precedence: str, island: str | None) -> EvacRow:
        times = [t2[p] - t0[p] for p in group_pids]
        mean, lo, hi = _mean_ci(times)
        standard = standards.get(precedence, 0.0)
        compliant = sum(1 for v in times if v <= standard) / len(times) if times else None
        return EvacRow(
            precedence=precedence,
            island=island,
            n=len(times),
            mean=mean,
            ci_lo=lo,
            ci_hi=hi,
            standard_min=standard,
            compliant_fraction=compliant,
            mean_meets_standard=(mean <= standard) if mean is not None else None,
        )

    out: list[EvacRow] = []
    for precedence in sorted(standards):
        pids = [p for p in t2 if prec[p] == precedence]
        out.append(rows_for(pids, precedence, None))
        if island_of_ccp:
            for island in sorted(set(island_of_ccp.values())):
                sub = [p for p in pids if island_of_ccp.get(ccp[p]) == island]
                out.append(rows_for(sub, precedence, island))
    return out


@dataclass
class CountSeries:
    node: str
    points: list[tuple[float, int]] = field(default_factory=list)  # step function

    def bump(self, time: float, delta: int) -> None:
        last = self.points[-1][1] if self.points else 0
        self.points.append((time, last + delta))


@dataclass
class Timeseries:
    ccp_counts: dict[str, CountSeries]
    role1_counts: dict[str, CountSeries]
    traces: dict[str, list[tuple[float, float, float]]]  # unit -> (time, x, y)


def timeseries(events: list[dict], trace_cadence_min: float = 5.0) -> Timeseries:
    """Patient counts per collection point / aid station, and movement traces."""
    ccp_counts: dict[str, CountSeries] = {}
    role1_counts: dict[str, CountSeries] = {}
    where: dict[str, str | None] = {}  # patient -> counted node
    role1_sites: set[str] = set()
    traces: dict[str, list[tuple[float, float, float]]] = {}

    def series(table: dict[str, CountSeries], node: str) -> CountSeries:
        if node not in table:
            table[node] = CountSeries(node=node)
        return table[node]

    for ev in events:
        kind, t, d = ev["kind"], ev["time"], ev["data"]
        if kind == "patient_spawned":
            series(ccp_counts, d["ccp"]).bump(t, +1)
            where[d["patient"]] = d["ccp"]
        elif kind == "loaded":
            for pid in d["patients"]:
                node = where.get(pid)
                if node == d["site"]:
                    table = role1_counts if node in role1_sites else ccp_counts
                    series(table, node).bump(t, -1)
                    where[pid] = None
        elif kind == "unloaded" and d.get("stamped") == "t1":
            role1_sites.add(d["site"])
            for pid in d["patients"]:
                series(role1_counts, d["site"]).bump(t, +1)
                where[pid] = d["site"]
        elif kind == "died":
            pid = d["patient"]
            node = where.get(pid)
            if node is not None:
                table = role1_counts if node in role1_sites else ccp_counts
                series(table, node).bump(t, -1)
                where[pid] = None
        elif kind == "departed":
            route = d["route"]
            unit = d["unit"]
            pts = traces.setdefault(unit, [])
            waypoints = route["waypoints"]
            speed = route["speed_kmh"]
            total = route["total_km"]
            t_cursor = t
            end = t + total / speed * 60.0
            while t_cursor < end:
                km = (t_cursor - t) / 60.0 * speed
                x, y = _position_at(waypoints, km)
                pts.append((t_cursor, x, y))
                t_cursor += trace_cadence_min
            pts.append((end, waypoints[-1][0], waypoints[-1][1]))
    return Timeseries(ccp_counts=ccp_counts, role1_counts=role1_counts, traces=traces)


def _position_at(waypoints: list, km: float) -> tuple[float, float]:
    remaining = km
    for (ax, ay), (bx, by) in zip(waypoints, waypoints[1:]):
        seg = math.hypot(bx - ax, by - ay)
        if remaining <= seg and seg > 0:
            f = remaining / seg
            return (ax + f * (bx - ax), ay + f * (by - ay))
        remaining -= seg
    return tuple(waypoints[-1])


# ---------------------------------------------------------------------------
# exports


def export_debrief(events: list[dict], out_dir: str, island_of_ccp: dict[str, str] | None = None) -> dict:
    """Write one table per statistic plus a machine-readable summary."""
    os.makedirs(out_dir, exist_ok=True)
    board = score_screen(events)
    delays = delay_stats(events)
    evac = evac_time_stats(events, island_of_ccp)
    series = timeseries(events)

    with open(os.path.join(out_dir, "delays.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "precedence", "n", "mean_min", "ci_lo", "ci_hi", "n_censored"])
        for r in delays:
            w.writerow([r.group[0], r.group[1], r.n, _fmt(r.mean), _fmt(r.ci_lo), _fmt(r.ci_hi), r.n_censored])

    with open(os.path.join(out_dir, "evac_times.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["precedence", "island", "n", "mean_min", "ci_lo", "ci_hi", "standard_min", "compliant_fraction"])
        for r in evac:
            w.writerow([r.precedence, r.island or "", r.n, _fmt(r.mean), _fmt(r.ci_lo), _fmt(r.ci_hi), r.standard_min, _fmt(r.compliant_fraction)])

    for name, table in (("ccp_counts.csv", series.ccp_counts), ("role1_counts.csv", series.role1_counts)):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "time_min", "count"])
            for node in sorted(table):
                for t, c in table[node].points:
                    w.writerow([node, t, c])

    with open(os.path.join(out_dir, "platform_traces.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit", "time_min", "x_km", "y_km"])
        for unit in sorted(series.traces):
            for t, x, y in series.traces[unit]:
                w.writerow([unit, t, x, y])

    summary = {
        "score": board.score,
        "saves": board.saves,
        "deaths": board.deaths,
        "alive": board.alive,
        "spawned": board.spawned,
        "delays": [
            {"node": r.group[0], "precedence": r.group[1], "n": r.n, "mean": r.mean, "ci_lo": r.ci_lo, "ci_hi": r.ci_hi, "censored": r.n_censored}
            for r in delays
        ],
        "evac_times": [
            {"precedence": r.precedence, "island": r.island, "n": r.n, "mean": r.mean, "ci_lo": r.ci_lo, "ci_hi": r.ci_hi, "standard_min": r.standard_min, "compliant_fraction": r.compliant_fraction}
            for r in evac
        ],
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def events_to_dicts(events) -> list[dict]:
    """Accept SimEvent objects or already-parsed dicts."""
    out = []
    for ev in events:
        if isinstance(ev, dict):
            out.append(ev)
        else:
            out.append({"seq": ev.seq, "time": ev.time, "kind": ev.kind, "actor": ev.actor, "data": ev.data})
    return out


def score_from_events(events) -> ScoreBoard:
    return score_screen(events_to_dicts(events))
