"""Acceptance gate: every exit criterion at its stated tolerance.

Each test evaluates one numbered criterion, prints a single
``[ACCEPTANCE] <n> PASS/FAIL`` line (run pytest with -s to watch them), and
then asserts.  Heavy batch criteria parallelize across the machine's cores.
Run the whole gate with:  pytest tests/test_acceptance.py -v -s
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
import time

import pytest

from evacsim.analytics import events_to_dicts, evac_time_stats, extract_delays
from evacsim.casualty import MortalityParams, next_wave, sample_death_times
from evacsim.cli import run_headless, verify_archive, write_archive
from evacsim.engine import Engine, Inject, InputRecord, replay
from evacsim.rng import RngStream
from evacsim.rules import ActionRequest
from evacsim.scenario import (
    DEFAULT_PRECEDENCE_SPECS,
    CasualtyStreamParams,
    Patient,
    PatientKind,
    Place,
    Precedence,
    load_fixture,
)
from evacsim.scoring import ScoringMode, patient_score, score_screen

from test_analytics import independent_fold

WORKERS = max(2, os.cpu_count() or 2)


def report(num: int, ok: bool, detail: str) -> None:
    print(f"\n[ACCEPTANCE] {num}. {'PASS' if ok else 'FAIL'} — {detail}")


# ---------------------------------------------------------------------------
# 1. golden-hour mortality calibration


def test_criterion_1_golden_hour_mortality():
    params = MortalityParams.from_standards(60.0, 240.0)
    rng = RngStream(104729, "acceptance", "golden_hour")
    n = 100_000
    start = time.monotonic()
    hits = sum(1 for _ in range(n) if sample_death_times(params, rng.uniform()).t_death1 <= 60.0)
    elapsed = time.monotonic() - start
    frac = hits / n
    ok = 0.195 <= frac <= 0.205 and elapsed < 5.0
    report(1, ok, f"fraction dying within the hour {frac:.4f} (band [0.195, 0.205]), {elapsed:.2f}s (< 5s)")
    assert 0.195 <= frac <= 0.205
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. rate derivation and single-draw coupling


def test_criterion_2_rate_derivation_and_coupling():
    params = MortalityParams.from_standards(60.0, 240.0)
    exact = params.lambda1 == -math.log(0.8) / 60.0
    rng = RngStream(7919, "acceptance", "coupling")
    coupled = all(
        (lambda dt: dt.t_death2 / dt.t_death1 == 240.0 / 60.0)(sample_death_times(params, rng.uniform()))
        for _ in range(10_000)
    )
    ok = exact and coupled
    report(2, ok, f"lambda1 == -ln(0.8)/60 exactly: {exact}; t2/t1 == 4.0 for 10,000 draws: {coupled}")
    assert exact
    assert coupled


# ---------------------------------------------------------------------------
# 3. scoring arithmetic on the published constants


def test_criterion_3_scoring_values():
    urgent = DEFAULT_PRECEDENCE_SPECS[Precedence.URGENT]
    priority = DEFAULT_PRECEDENCE_SPECS[Precedence.PRIORITY]

    def mk(prec, t2=None, dead=False):
        return Patient(
            id="p", precedence=prec, kind=PatientKind.LITTER, origin_ccp="c", t0=0.0,
            t1=t2, t2=t2, place=Place.DEAD if dead else Place.AT_FACILITY,
        )

    dead = patient_score(mk(Precedence.URGENT, dead=True), urgent, ScoringMode.LINEAR_DECAY)
    half = patient_score(mk(Precedence.URGENT, t2=30.0), urgent, ScoringMode.LINEAR_DECAY)
    boundary = patient_score(mk(Precedence.PRIORITY, t2=240.0), priority, ScoringMode.LINEAR_DECAY)
    printed = patient_score(mk(Precedence.URGENT, t2=120.0), urgent, ScoringMode.AS_PRINTED)
    ok = dead == -10.0 and half == 5.0 and boundary == 0.0 and printed == 5.0
    report(3, ok, f"death {dead}, urgent@30min {half}, priority@240min {boundary}, as-printed urgent@120min {printed}")
    assert dead == -10.0
    assert half == 5.0
    assert boundary == 0.0
    assert printed == 5.0


# ---------------------------------------------------------------------------
# 4. wave generation statistics


def _wave_stats(interval: float, size: float, mult: float, n: int, seed: int) -> tuple[float, float]:
    stream = CasualtyStreamParams(
        ccp="c", mean_wave_interval_min=interval, mean_wave_size=size,
        rate_multiplier=mult, urgent_fraction=0.0, litter_fraction=0.5,
    )
    params = MortalityParams.from_standards(60.0, 240.0)
    rng = RngStream(seed, "acceptance", "waves", interval, size, mult)
    gaps = 0.0
    sizes = 0
    for _ in range(n):
        t, drafts = next_wave(stream, params, rng, 0.0, active=True)
        gaps += t
        sizes += len(drafts)
    return gaps / n, sizes / n


def test_criterion_4_poisson_generation():
    n = 100_000
    results = []
    for interval, size, mult in ((30.0, 5.0, 1.0), (30.0, 5.0, 2.0), (18.0, 3.0, 1.0)):
        mean_gap, mean_size = _wave_stats(interval, size, mult, n, seed=42)
        want_gap = interval / mult
        gap_ok = abs(mean_gap - want_gap) <= 0.02 * want_gap
        # the min-1 floor shifts the mean by P(X=0)*E[...]: well under the 2% band
        size_ok = abs(mean_size - size) <= 0.02 * size
        results.append((interval, size, mult, mean_gap, mean_size, gap_ok, size_ok))
    base_gap = results[0][3]
    hot_gap = results[1][3]
    halved_ok = abs(hot_gap / base_gap - 0.5) <= 0.02 * 0.5
    ok = all(r[5] and r[6] for r in results) and halved_ok
    detail = "; ".join(
        f"cfg(i={r[0]:g},s={r[1]:g},m={r[2]:g}): gap {r[3]:.3f} size {r[4]:.3f}" for r in results
    )
    report(4, ok, f"{detail}; multiplier-2 gap ratio {hot_gap / base_gap:.4f} (2% bands)")
    for _, _, _, _, _, gap_ok, size_ok in results:
        assert gap_ok and size_ok
    assert halved_ok


# ---------------------------------------------------------------------------
# 5. doctrine invariants under 1,000 random-legal fuzz runs


def _fuzz_one(seed: int) -> str | None:
    scenario = load_fixture("storm-surge-lite")
    roles = {r: "random_legal" for r, a in scenario.roles.items() if a.owned_platform_ids}
    try:
        run_headless(scenario, seed=seed, policies=roles, tick_len_s=6, duration_min=60.0, checker=True)
    except Exception as e:  # any invariant breach or crash fails the criterion
        return f"seed {seed}: {e}"
    return None


def test_criterion_5_doctrine_invariants_1000_seeds():
    start = time.monotonic()
    with mp.Pool(WORKERS) as pool:
        failures = [f for f in pool.map(_fuzz_one, range(1000), chunksize=25) if f]
    elapsed = time.monotonic() - start
    ok = not failures and elapsed < 600.0
    report(5, ok, f"1000 seeds x random-legal, checker armed: {len(failures)} violations, {elapsed:.0f}s (< 600s)")
    assert failures == [], failures[:3]
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 6. determinism and replay


def _recorded_run() -> Engine:
    scenario = load_fixture("minimal")
    roles = {"medics": "random_legal"}
    return run_headless(scenario, seed=31, policies=roles, tick_len_s=6, duration_min=180.0)


def test_criterion_6_determinism_and_replay(tmp_path):
    original = _recorded_run()
    lines = [e.to_json_line() for e in original.log]

    again = replay(
        original.scenario, seed=original.seed, tick_len_s=6, duration_min=180.0,
        scoring_mode=original.scoring_mode, inputs=original.inputs,
    )
    identical = [e.to_json_line() for e in again.log] == lines

    cut = original.total_ticks // 2
    truncated = [r for r in original.inputs if r.apply_tick <= cut]
    prefix_run = replay(
        original.scenario, seed=original.seed, tick_len_s=6, duration_min=180.0,
        scoring_mode=original.scoring_mode, inputs=truncated, until_tick=cut,
    )
    prefix_lines = [e.to_json_line() for e in prefix_run.log]
    prefix_ok = prefix_lines == lines[: len(prefix_lines)] and len(prefix_lines) > 1

    # an archive with a different seed must be refused outright
    import json as _json
    out = str(tmp_path / "arc")
    write_archive(original, out)
    meta = _json.load(open(os.path.join(out, "meta.json")))
    meta["seed"] += 1
    _json.dump(meta, open(os.path.join(out, "meta.json"), "w"))
    try:
        verify_archive(out)
        refused = False
    except Exception:
        refused = True

    ok = identical and prefix_ok and refused
    report(6, ok, f"byte-identical replay: {identical}; truncated log is a prefix: {prefix_ok}; altered seed refused: {refused}")
    assert identical
    assert prefix_ok
    assert refused


# ---------------------------------------------------------------------------
# 7. analytics equal an independent single-pass fold


def test_criterion_7_analytics_oracle():
    scenario = load_fixture("storm-surge-lite")
    roles = {r: "triage_greedy" for r, a in scenario.roles.items() if a.owned_platform_ids}
    eng = run_headless(scenario, seed=13, policies=roles, tick_len_s=6, duration_min=240.0)
    events = events_to_dicts(eng.log)
    oracle = independent_fold(events)

    board = score_screen(events)
    score_ok = (
        board.score == oracle["score"]
        and board.saves == oracle["saves"]
        and board.deaths == oracle["deaths"]
        and board.alive == oracle["alive"]
        and board.spawned == oracle["spawned"]
    )
    got_delays = sorted((r.node, r.precedence, r.delay_min, r.censored) for r in extract_delays(events))
    delays_ok = got_delays == oracle["waits"]

    spawn_t0 = {e["data"]["patient"]: e["data"]["t0"] for e in events if e["kind"] == "patient_spawned"}
    prec = {e["data"]["patient"]: e["data"]["precedence"] for e in events if e["kind"] == "patient_spawned"}
    evac_ok = True
    for row in evac_time_stats(events):
        if row.island is not None:
            continue
        times = [t - spawn_t0[p] for p, t in oracle["t2"].items() if prec[p] == row.precedence]
        if row.n != len(times):
            evac_ok = False
        elif times and row.mean != sum(times) / len(times):
            evac_ok = False

    ok = score_ok and delays_ok and evac_ok
    report(7, ok, f"score screen exact: {score_ok}; delays exact ({len(got_delays)} records): {delays_ok}; evac times exact: {evac_ok}")
    assert score_ok
    assert delays_ok
    assert evac_ok


# ---------------------------------------------------------------------------
# 8. triage incentive


def _policy_pair(seed: int) -> tuple[float, float, float | None, float | None, int, int]:
    scenario = load_fixture("storm-surge-lite")
    roles = {r: None for r, a in scenario.roles.items() if a.owned_platform_ids}
    scores = {}
    umean = pmean = None
    un = pn = 0
    for pol in ("triage_greedy", "greedy_nearest"):
        eng = run_headless(
            scenario, seed=seed, policies={r: pol for r in roles}, tick_len_s=6, duration_min=480.0, checker=False
        )
        scores[pol] = score_screen(events_to_dicts(eng.log)).score
        if pol == "triage_greedy":
            rows = {r.precedence: r for r in evac_time_stats(events_to_dicts(eng.log)) if r.island is None}
            un, pn = rows["urgent"].n, rows["priority"].n
            umean, pmean = rows["urgent"].mean, rows["priority"].mean
    return scores["triage_greedy"], scores["greedy_nearest"], umean, pmean, un, pn


def _sign_test_p(wins: int, n: int) -> float:
    """Exact one-sided binomial tail: P(X >= wins | n, 1/2)."""
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0**n


N_TRIAGE_SEEDS = 120


def test_criterion_8_triage_incentive():
    with mp.Pool(WORKERS) as pool:
        results = pool.map(_policy_pair, range(N_TRIAGE_SEEDS), chunksize=4)
    wins = sum(1 for t, g, *_ in results if t > g)
    ties = sum(1 for t, g, *_ in results if t == g)
    n_eff = N_TRIAGE_SEEDS - ties
    p_value = _sign_test_p(wins, n_eff)

    ordering_violations = [
        (i, um, pm) for i, (_, _, um, pm, un, pn) in enumerate(results) if un > 0 and pn > 0 and not um < pm
    ]
    compared = sum(1 for _, _, um, pm, un, pn in results if un > 0 and pn > 0)

    ok = p_value < 0.05 and not ordering_violations
    report(
        8,
        ok,
        f"triage wins {wins}/{n_eff} (sign test p = {p_value:.2e} < 0.05); "
        f"urgent-faster-than-priority held in {compared - len(ordering_violations)}/{compared} runs",
    )
    assert p_value < 0.05
    assert ordering_violations == [], ordering_violations[:3]


# ---------------------------------------------------------------------------
# 9. tick-rate independence


def _scheduled_engine(tick_len_s: int) -> Engine:
    scenario = load_fixture("minimal")
    eng = Engine(scenario, seed=17, tick_len_s=tick_len_s, duration_min=150.0)
    feeds = [
        ("inject", "instructor", Inject(kind="mascal", params={"ccp": "ccp1", "n": 5}).to_dict(), 0.05),
        ("action", "medics", ActionRequest("medics", "amb1", "dispatch", {"to": "ccp1"}).to_dict(), 2.55),
        ("action", "medics", ActionRequest("medics", "amb1", "load", {"patients": ["p00001", "p00002"]}).to_dict(), 16.0),
        ("action", "medics", ActionRequest("medics", "amb1", "dispatch", {"to": "aid1"}).to_dict(), 20.5),
        ("action", "medics", ActionRequest("medics", "amb1", "unload", {"patients": ["p00001", "p00002"]}).to_dict(), 35.0),
        ("action", "medics", ActionRequest("medics", "amb1", "load", {"patients": ["p00001", "p00002"]}).to_dict(), 55.0),
        ("action", "medics", ActionRequest("medics", "amb1", "dispatch", {"to": "surg1"}).to_dict(), 60.0),
        ("action", "medics", ActionRequest("medics", "amb1", "unload", {"patients": ["p00001", "p00002"]}).to_dict(), 75.0),
    ]
    for i, (kind, actor, payload, t_min) in enumerate(feeds):
        eng.feed_inputs(
            [InputRecord(seq=i, apply_tick=max(1, math.ceil(t_min * 60 / tick_len_s)), kind=kind, actor=actor, payload=payload)]
        )
    eng.run_to_end()
    return eng


def test_criterion_9_tick_independence():
    runs = {tick: _scheduled_engine(tick) for tick in (1, 6)}
    quantum = 6 / 60.0  # the coarser run's tick, in minutes

    def stamps(eng, kind, key):
        out = {}
        for ev in eng.log:
            if ev.kind == kind:
                out.setdefault(f"{ev.data[key]}#{len(out)}", ev.time)
        return {k.split('#')[0] + str(i): v for i, (k, v) in enumerate(sorted(out.items()))}

    worst = 0.0
    counts = {}
    ok = True
    for kind, key in (("died", "patient"), ("arrived", "unit")):
        a = [ev for ev in runs[1].log if ev.kind == kind]
        b = [ev for ev in runs[6].log if ev.kind == kind]
        ka = {(ev.data[key], i) for i, ev in enumerate(a)}
        if {x[0] for x in ka} != {ev.data[key] for ev in b} or len(a) != len(b):
            ok = False
            continue
        counts[kind] = len(a)
        for ev_a, ev_b in zip(sorted(a, key=lambda e: (e.data[key], e.time)), sorted(b, key=lambda e: (e.data[key], e.time))):
            delta = abs(ev_a.time - ev_b.time)
            worst = max(worst, delta)
            if delta > quantum + 1e-9:
                ok = False
    report(9, ok, f"death/arrival stamps across 1s vs 6s ticks: worst delta {worst * 60:.2f}s <= one 6s tick ({counts})")
    assert ok
    assert worst <= quantum + 1e-9
