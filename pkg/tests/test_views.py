"""Fog of war: role views, visibility radius, and the event stream filter."""

from __future__ import annotations

import json

from evacsim.analytics import events_to_dicts
from evacsim.engine import Engine, Inject
from evacsim.rules import ActionRequest
from evacsim.scenario import load_fixture
from evacsim.views import view_for, visible_events


def e2e_engine(step=5) -> Engine:
    # e2e-min starts at dusk; ccp_far sits 80 km from every sensor
    eng = Engine(load_fixture("e2e-min"), seed=7, tick_len_s=6, duration_min=200.0)
    eng.step(step)
    return eng


def far_mascal(eng: Engine, n=4):
    eng.enqueue_inject("instructor", Inject(kind="mascal", params={"ccp": "ccp_far", "n": n}))
    eng.step(2)


class TestViewVisibility:
    def test_distant_ccp_casualties_hidden_but_node_shown(self):
        eng = e2e_engine()
        far_mascal(eng)
        view = view_for(eng.world, eng.clock.tick, eng.now, "medics")
        far = next(f for f in view.facilities if f["id"] == "ccp_far")
        assert far["counts"] is None and far["patients"] is None  # unknown, never zero
        near = next(f for f in view.facilities if f["id"] == "ccp_near")
        assert near["counts"] is not None  # 5 km from a staffed facility

    def test_instructor_sees_true_counts_from_same_snapshot(self):
        eng = e2e_engine()
        far_mascal(eng, n=4)
        player = view_for(eng.world, eng.clock.tick, eng.now, "medics")
        instructor = view_for(eng.world, eng.clock.tick, eng.now, "instructor")
        p_far = next(f for f in player.facilities if f["id"] == "ccp_far")
        i_far = next(f for f in instructor.facilities if f["id"] == "ccp_far")
        assert p_far["counts"] is None
        assert i_far["counts"]["total"] == 4
        assert instructor.score is not None
        assert player.score is None

    def test_night_shrinks_the_radius(self):
        eng = e2e_engine(step=5)  # still dusk band: factor 0.7
        assert view_for(eng.world, eng.clock.tick, eng.now, "medics").visibility_factor == 0.7
        eng.step(int(40 * 60 / 6))  # into night
        view = view_for(eng.world, eng.clock.tick, eng.now, "medics")
        assert view.phase == "night"
        assert view.visibility_factor == 0.4

    def test_nearby_platform_reveals_a_node(self):
        eng = e2e_engine()
        far_mascal(eng)
        eng.enqueue_action(ActionRequest(actor="medics", platform="helo1", verb="dispatch", params={"to": "ccp_far"}))
        eng.step(int(20 * 60 / 6))  # 80 km at 280 km/h: ~17 min
        view = view_for(eng.world, eng.clock.tick, eng.now, "medics")
        far = next(f for f in view.facilities if f["id"] == "ccp_far")
        assert far["counts"] is not None and far["counts"]["total"] == 4

    def test_own_manifest_full_detail_but_never_death_times(self):
        eng = e2e_engine()
        eng.step(200)
        eng.enqueue_action(ActionRequest(actor="medics", platform="amb1", verb="dispatch", params={"to": "ccp_near"}))
        eng.step(120)
        pats = list(eng.world.facilities["ccp_near"].patients)[:2]
        if pats:
            eng.enqueue_action(ActionRequest(actor="medics", platform="amb1", verb="load", params={"patients": pats}))
            eng.step(30)
        view = view_for(eng.world, eng.clock.tick, eng.now, "medics")
        own = next(p for p in view.own_platforms if p["id"] == "amb1")
        blob = json.dumps(view.to_dict())
        assert "t_death" not in blob
        for rec in own["manifest"]:
            assert set(rec) == {"id", "precedence", "kind", "treated", "t0", "next_role", "claimed"}

    def test_view_monotonicity_instructor_superset(self):
        eng = e2e_engine()
        far_mascal(eng)
        player = view_for(eng.world, eng.clock.tick, eng.now, "medics").to_dict()
        instructor = view_for(eng.world, eng.clock.tick, eng.now, "instructor").to_dict()
        p_vis = {f["id"]: f for f in player["facilities"] if f["counts"] is not None}
        i_vis = {f["id"]: f for f in instructor["facilities"] if f["counts"] is not None}
        assert set(p_vis) <= set(i_vis)
        for fid, rec in p_vis.items():
            assert i_vis[fid]["counts"] == rec["counts"]
        assert len(instructor["own_platforms"]) >= len(player["own_platforms"])

    def test_unknown_role_raises(self):
        eng = e2e_engine()
        try:
            view_for(eng.world, eng.clock.tick, eng.now, "nobody")
            assert False
        except ValueError:
            pass


class TestEventFilter:
    def test_death_times_never_leave_the_server(self):
        eng = e2e_engine(step=60)
        batch = events_to_dicts(eng.log)
        for role in ("medics", "instructor", "observer"):
            for ev in visible_events(eng.world, eng.now, role, batch):
                assert "t_death1" not in ev["data"] and "t_death2" not in ev["data"]

    def test_instructor_stream_contains_every_player_event(self):
        eng = e2e_engine(step=60)
        far_mascal(eng)
        eng.enqueue_action(ActionRequest(actor="medics", platform="amb1", verb="dispatch", params={"to": "ccp_near"}))
        eng.step(60)
        batch = events_to_dicts(eng.log)
        player = visible_events(eng.world, eng.now, "medics", batch)
        instructor = visible_events(eng.world, eng.now, "instructor", batch)
        player_seqs = {ev["seq"] for ev in player}
        instructor_seqs = {ev["seq"] for ev in instructor}
        assert player_seqs <= instructor_seqs

    def test_hidden_node_spawns_filtered_for_players(self):
        eng = e2e_engine()
        far_mascal(eng)
        batch = events_to_dicts(eng.log)
        player = visible_events(eng.world, eng.now, "medics", batch)
        far_spawns = [ev for ev in player if ev["kind"] == "patient_spawned" and ev["data"]["ccp"] == "ccp_far"]
        assert far_spawns == []
        instructor = visible_events(eng.world, eng.now, "instructor", batch)
        far_spawns_i = [ev for ev in instructor if ev["kind"] == "patient_spawned" and ev["data"]["ccp"] == "ccp_far"]
        assert len(far_spawns_i) == 4

    def test_action_results_private_to_actor(self):
        eng = e2e_engine()
        eng.enqueue_action(ActionRequest(actor="medics", platform="amb1", verb="wait", params={}))
        eng.step(2)
        batch = events_to_dicts(eng.log)
        other = visible_events(eng.world, eng.now, "observer", batch)
        assert not any(ev["kind"] == "action_accepted" for ev in other)
        own = visible_events(eng.world, eng.now, "medics", batch)
        assert any(ev["kind"] == "action_accepted" for ev in own)
