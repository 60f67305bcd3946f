"""Batch execution, replay verification, and debrief export.

Exit codes: 0 success, 1 invariant breach or replay divergence, 2 usage or
archive refusal.  All run outputs land in the chosen directory as an archive
bundle: scenario copy, meta, the input log, the event log, and debrief
tables.  Replaying an archive re-runs the engine from the recorded inputs
and demands a byte-identical event log.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .analytics import events_to_dicts, export_debrief, score_from_events
from .engine import ENGINE_VERSION, Engine, InputRecord, ReplayMismatch, SimEvent, replay as replay_run
from .policies import make_policy
from .rng import RngStream
from .scenario import (
    FacilityRole,
    Scenario,
    ScenarioError,
    dumps_scenario,
    fixture_text,
    load_scenario,
    validate_scenario,
)
from .scoring import ScoringMode
from .views import view_for

DECISION_EPOCH_S = 60  # policies act once per in-game minute


def read_scenario_arg(ref: str) -> Scenario:
    """Accept a path to a scenario document or a bundled fixture name."""
    if os.path.exists(ref):
        with open(ref) as fh:
            return load_scenario(fh.read())
    try:
        return load_scenario(fixture_text(ref))
    except FileNotFoundError:
        raise ScenarioError(f"no such scenario file or fixture: {ref}")


def run_headless(
    scenario: Scenario,
    seed: int,
    policies: dict[str, str],
    tick_len_s: int = 6,
    duration_min: float | None = None,
    scoring_mode: ScoringMode | None = None,
    checker: bool = True,
    fold_check_every: int = 0,
    epoch_s: int = DECISION_EPOCH_S,
    scheduled_inputs: list[tuple[float, str, str, dict]] | None = None,
) -> Engine:
    """Run a full unpaced game with scripted policies issuing the actions.

    scheduled_inputs: optional (time_min, kind, actor, payload) records fed at
    their quantized ticks; used by tests that need a fixed action schedule.
    """
    eng = Engine(
        scenario,
        seed=seed,
        tick_len_s=tick_len_s,
        duration_min=duration_min,
        scoring_mode=scoring_mode,
        checker=checker,
        fold_check_every=fold_check_every,
    )
    bound = {
        role: make_policy(name, role, scenario, RngStream(seed, "policy", role))
        for role, name in policies.items()
        if name != "idle"
    }
    schedule = sorted(scheduled_inputs or [], key=lambda s: s[0])
    sched_i = 0
    ticks_per_epoch = max(1, round(epoch_s / tick_len_s))
    while not eng.finished:
        # feed any scheduled inputs due strictly before the next epoch boundary
        horizon = (eng.clock.tick + ticks_per_epoch) * tick_len_s / 60.0
        while sched_i < len(schedule) and schedule[sched_i][0] <= horizon:
            t_min, kind, actor, payload = schedule[sched_i]
            target_tick = max(eng.clock.tick + 1, int(-(-t_min * 60.0 // tick_len_s)))
            rec = InputRecord(
                seq=eng._input_seq, apply_tick=target_tick, kind=kind, actor=actor, payload=payload
            )
            eng._input_seq += 1
            eng.inputs.append(rec)
            eng._queue.append(rec)
            sched_i += 1
        eng.step(ticks_per_epoch)
        if eng.finished:
            break
        for role, pol in bound.items():
            view = view_for(eng.world, eng.clock.tick, eng.now, role)
            for action in pol.decide(view):
                eng.enqueue_action(action)
    return eng


def write_archive(eng: Engine, out_dir: str, policies: dict[str, str] | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "engine_version": ENGINE_VERSION,
        "scenario_name": eng.scenario.name,
        "scenario_sha": eng.scenario.sha256(),
        "seed": eng.seed,
        "tick_len_s": eng.clock.tick_len_s,
        "duration_min": eng.duration_min,
        "scoring_mode": eng.scoring_mode.value,
        "final_tick": eng.clock.tick,
        "policies": policies or {},
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "scenario.yaml"), "w") as fh:
        fh.write(dumps_scenario(eng.scenario))
    with open(os.path.join(out_dir, "inputs.jsonl"), "w") as fh:
        for rec in eng.inputs:
            fh.write(rec.to_json_line() + "\n")
    with open(os.path.join(out_dir, "events.jsonl"), "w") as fh:
        for ev in eng.log:
            fh.write(ev.to_json_line() + "\n")
    island_map = _island_map(eng.scenario)
    export_debrief(events_to_dicts(eng.log), os.path.join(out_dir, "debrief"), island_map)


def _island_map(scenario: Scenario) -> dict[str, str]:
    out = {}
    for f in scenario.facilities.values():
        if f.role == FacilityRole.CCP:
            node = scenario.world.nodes[f.node]
            if node.island:
                out[f.id] = node.island
    return out


def read_archive(path: str) -> tuple[dict, Scenario, list[InputRecord], list[str]]:
    with open(os.path.join(path, "meta.json")) as fh:
        meta = json.load(fh)
    with open(os.path.join(path, "scenario.yaml")) as fh:
        scenario = load_scenario(fh.read())
    inputs = []
    with open(os.path.join(path, "inputs.jsonl")) as fh:
        for line in fh:
            if line.strip():
                inputs.append(InputRecord.from_json_line(line))
    with open(os.path.join(path, "events.jsonl")) as fh:
        event_lines = [line.rstrip("\n") for line in fh if line.strip()]
    return meta, scenario, inputs, event_lines


class ArchiveRefused(RuntimeError):
    pass


def verify_archive(path: str, until_tick: int | None = None) -> tuple[bool, int | None]:
    """Replay an archive; (True, None) on byte-identical logs, else first diff."""
    meta, scenario, inputs, original = read_archive(path)
    if not original:
        raise ArchiveRefused("archive has no events")
    head = SimEvent.from_json_line(original[0])
    if head.kind != "run_started":
        raise ArchiveRefused("event log does not open with a run header")
    if head.data.get("engine_version") != ENGINE_VERSION:
        raise ArchiveRefused(
            f"engine version mismatch: archive {head.data.get('engine_version')}, this build {ENGINE_VERSION}"
        )
    if meta.get("engine_version") != ENGINE_VERSION:
        raise ArchiveRefused("meta engine version mismatch")
    if head.data.get("seed") != meta.get("seed"):
        raise ArchiveRefused("seed mismatch between meta and event log")
    if head.data.get("scenario_sha") != meta.get("scenario_sha") or scenario.sha256() != meta.get("scenario_sha"):
        raise ArchiveRefused("scenario fingerprint mismatch")

    eng = replay_run(
        scenario,
        seed=meta["seed"],
        tick_len_s=meta["tick_len_s"],
        duration_min=meta["duration_min"],
        scoring_mode=ScoringMode(meta["scoring_mode"]),
        inputs=inputs,
        until_tick=until_tick,
    )
    replayed = [ev.to_json_line() for ev in eng.log]
    limit = len(replayed) if until_tick is not None else max(len(replayed), len(original))
    for i in range(limit):
        a = original[i] if i < len(original) else None
        b = replayed[i] if i < len(replayed) else None
        if a != b:
            return False, json.loads(b or a)["seq"]
    return True, None


# ---------------------------------------------------------------------------
# click commands


@click.group()
def main():
    """Medical evacuation wargame: headless runs, replay, stats, server."""


@main.command()
@click.option("--scenario", "scenario_ref", required=True, help="scenario file path or bundled fixture name")
@click.option("--seed", type=int, default=None, help="override the scenario seed")
@click.option("--duration", "duration_min", type=float, default=None, help="in-game minutes to simulate")
@click.option("--ticklen", "tick_len_s", type=int, default=6, show_default=True, help="in-game seconds per tick")
@click.option("--policy", "policy_opts", multiple=True, help="ROLE=NAME; repeatable")
@click.option("--policy-all", "policy_all", default=None, help="apply one policy to every platform-owning role")
@click.option("--scoring", type=click.Choice(["linear_decay", "as_printed"]), default=None)
@click.option("--checker/--no-checker", default=True, show_default=True, help="assert doctrine invariants every tick")
@click.option("--fold-check", "fold_check_every", type=int, default=0, help="fold-vs-live state check every N ticks")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="archive output directory")
def run(scenario_ref, seed, duration_min, tick_len_s, policy_opts, policy_all, scoring, checker, fold_check_every, out_dir):
    """Run one unpaced game and write the archive bundle."""
    try:
        scenario = read_scenario_arg(scenario_ref)
    except ScenarioError as e:
        raise click.UsageError(str(e))
    policies: dict[str, str] = {}
    if policy_all:
        for rname, r in scenario.roles.items():
            if r.owned_platform_ids:
                policies[rname] = policy_all
    for opt in policy_opts:
        if "=" not in opt:
            raise click.UsageError(f"--policy expects ROLE=NAME, got '{opt}'")
        role, name = opt.split("=", 1)
        if role not in scenario.roles:
            raise click.UsageError(f"unknown role '{role}'")
        policies[role] = name
    mode = ScoringMode(scoring) if scoring else None
    try:
        eng = run_headless(
            scenario,
            seed=seed if seed is not None else scenario.rng_seed,
            policies=policies,
            tick_len_s=tick_len_s,
            duration_min=duration_min,
            scoring_mode=mode,
            checker=checker,
            fold_check_every=fold_check_every,
        )
    except Exception as e:
        click.echo(f"INVARIANT BREACH: {e}", err=True)
        sys.exit(1)
    write_archive(eng, out_dir, policies)
    board = score_from_events(eng.log)
    click.echo(
        f"{scenario.name}: score {board.score:.1f}, saves {board.saves}, "
        f"deaths {board.deaths}, alive {board.alive}, spawned {board.spawned}"
    )
    click.echo(f"archive written to {out_dir}")


@main.command("replay")
@click.argument("archive", type=click.Path(exists=True))
@click.option("--until-tick", type=int, default=None, help="replay only a prefix of the run")
def replay_cmd(archive, until_tick):
    """Verify an archive by re-running it and comparing logs byte for byte."""
    try:
        ok, seq = verify_archive(archive, until_tick)
    except ArchiveRefused as e:
        click.echo(f"REFUSED: {e}", err=True)
        sys.exit(2)
    if ok:
        click.echo("PASS: replay log is byte-identical")
    else:
        click.echo(f"FAIL: replay diverges at seq {seq}", err=True)
        sys.exit(1)


@main.command()
@click.argument("log_path", type=click.Path(exists=True))
@click.option("--which", type=click.Choice(["score", "delays", "evac", "timeseries", "all"]), default="score")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="write full debrief tables here")
def stats(log_path, which, out_dir):
    """Recompute debrief statistics from an event log."""
    events = []
    with open(log_path) as fh:
        for line in fh:
            if line.strip():
                events.append(json.loads(line))
    from . import analytics

    if out_dir or which == "all":
        summary = export_debrief(events, out_dir or "debrief")
        click.echo(json.dumps({"score": summary["score"], "saves": summary["saves"], "deaths": summary["deaths"]}, sort_keys=True))
        return
    if which == "score":
        b = analytics.score_from_events(events)
        click.echo(json.dumps({"score": b.score, "saves": b.saves, "deaths": b.deaths, "alive": b.alive, "spawned": b.spawned}, sort_keys=True))
    elif which == "delays":
        for r in analytics.delay_stats(events):
            click.echo(f"{r.group[0]},{r.group[1]},n={r.n},mean={r.mean},ci=({r.ci_lo},{r.ci_hi}),censored={r.n_censored}")
    elif which == "evac":
        for r in analytics.evac_time_stats(events):
            click.echo(f"{r.precedence},island={r.island},n={r.n},mean={r.mean},standard={r.standard_min},compliant={r.compliant_fraction}")
    elif which == "timeseries":
        series = analytics.timeseries(events)
        for node in sorted(series.ccp_counts):
            pts = series.ccp_counts[node].points
            click.echo(f"ccp {node}: {len(pts)} steps, last={pts[-1][1] if pts else 0}")


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
def validate(scenario_path):
    """Validate a scenario document; exit 0 only if sound."""
    with open(scenario_path) as fh:
        text = fh.read()
    try:
        s = load_scenario(text)
    except ScenarioError as e:
        click.echo(f"INVALID: {e}", err=True)
        sys.exit(2)
    violations = validate_scenario(s)
    if violations:
        for v in violations:
            click.echo(str(v), err=True)
        sys.exit(2)
    click.echo(f"OK: {s.name} ({len(s.facilities)} facilities, {len(s.platforms)} platforms)")


@main.command()
@click.option("--scenario", "scenario_ref", required=True)
@click.option("--seed", type=int, default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--teams", type=int, default=1, show_default=True)
@click.option("--pace", type=click.Choice(["real", "fast"]), default="real", show_default=True)
@click.option("--ticklen", "tick_len_s", type=int, default=6, show_default=True)
def serve(scenario_ref, seed, host, port, teams, pace, tick_len_s):
    """Start the authoritative session server for browser clients."""
    import asyncio

    from .server import serve_session

    try:
        scenario = read_scenario_arg(scenario_ref)
    except ScenarioError as e:
        raise click.UsageError(str(e))
    asyncio.run(
        serve_session(
            scenario,
            seed=seed if seed is not None else scenario.rng_seed,
            host=host,
            port=port,
            teams=teams,
            pace=pace,
            tick_len_s=tick_len_s,
        )
    )


if __name__ == "__main__":
    main()
