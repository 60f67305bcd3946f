"""Doctrine legality: capacity, continuity of care, holds, pads, casevac."""

from __future__ import annotations

import pytest

from evacsim import rules
from evacsim.engine import Engine, Inject
from evacsim.rules import ActionRequest
from evacsim.scenario import PlatformSpec, load_scenario
from evacsim.world import digest_json
from evacsim.worldmap import PlatformClass

PAD_WORLD = """
format: 1
name: padworld
rng_seed: 5
duration_min: 600
map:
  nodes:
    - {id: n_base, x: 0.0, y: 0.0, kind: land}
    - {id: n_ccp_lit, x: 5.0, y: 0.0, kind: land}
    - {id: n_ccp_amb, x: 5.0, y: 5.0, kind: land}
    - {id: n_axp, x: 10.0, y: 0.0, kind: land}
    - {id: n_r1, x: 20.0, y: 0.0, kind: land}
    - {id: n_r2, x: 30.0, y: 0.0, kind: land}
    - {id: n_r3, x: 40.0, y: 0.0, kind: land}
  roads:
    - {a: n_base, b: n_ccp_lit, km: 5.0}
    - {a: n_ccp_lit, b: n_axp, km: 5.0}
    - {a: n_axp, b: n_r1, km: 10.0}
    - {a: n_r1, b: n_r2, km: 10.0}
    - {a: n_r2, b: n_r3, km: 10.0}
    - {a: n_base, b: n_ccp_amb, km: 7.1}
facilities:
  - {id: ccp_lit, role: ccp, node: n_ccp_lit}
  - {id: ccp_amb, role: ccp, node: n_ccp_amb}
  - {id: axp1, role: axp, node: n_axp}
  - {id: aid1, role: role1, node: n_r1}
  - {id: surg1, role: role2, node: n_r2, pad_slots: 1}
  - {id: hosp1, role: role3, node: n_r3, pad_slots: 1}
platform_types:
  hh60: {class: rotary_wing, cruise_kmh: 300.0, litter: 6, ambulatory: 6, conversion: 2.0, callsign: DUSTOFF}
  amb: {class: ground_vehicle, cruise_kmh: 60.0, litter: 4, ambulatory: 8, conversion: 2.0, callsign: RHINO}
  ch47: {class: rotary_wing, cruise_kmh: 250.0, litter: 24, ambulatory: 30, conversion: 2.0, medevac: false, callsign: HOOK}
platforms:
  - {id: helo1, type: hh60, start: n_base, owner: medics}
  - {id: helo2, type: hh60, start: n_base, owner: medics}
  - {id: helo3, type: hh60, start: n_base, owner: medics}
  - {id: truck1, type: amb, start: n_base, owner: medics}
casualty_streams:
  ccp_lit: {mean_wave_interval_min: 100000.0, mean_wave_size: 1.0, urgent_fraction: 0.0, litter_fraction: 1.0}
  ccp_amb: {mean_wave_interval_min: 100000.0, mean_wave_size: 1.0, urgent_fraction: 0.0, litter_fraction: 0.0}
roles:
  - {name: medics}
  - {name: instructor, inject: true, sees_all: true}
"""


@pytest.fixture
def eng() -> Engine:
    return Engine(load_scenario(PAD_WORLD), seed=11, tick_len_s=6, checker=True)


def do(eng: Engine, actor, platform, verb, **params):
    ok, reason, _ = eng.enqueue_action(ActionRequest(actor=actor, platform=platform, verb=verb, params=params))
    return ok, reason


def mascal(eng: Engine, ccp: str, n: int):
    ok, reason, _ = eng.enqueue_inject("instructor", Inject(kind="mascal", params={"ccp": ccp, "n": n}))
    assert ok, reason
    eng.step()


def goto(eng: Engine, platform: str, dest: str, actor="medics"):
    ok, reason = do(eng, actor, platform, "dispatch", to=dest)
    assert ok, reason
    eng.step()  # dispatch applies at the next step boundary
    guard = 0
    while eng.world.platforms[platform].status in ("enroute", "busy"):
        eng.step(10)
        guard += 1
        assert guard < 2000, f"{platform} never arrived at {dest}"


def finish_ops(eng: Engine, platform: str):
    guard = 0
    while eng.world.platforms[platform].status == "busy":
        eng.step()
        guard += 1
        assert guard < 2000


class TestCapacity:
    def test_exact_litter_capacity_allowed(self, eng):
        mascal(eng, "ccp_lit", 7)
        goto(eng, "helo1", "ccp_lit")
        pats = list(eng.world.facilities["ccp_lit"].patients)
        ok, reason = do(eng, "medics", "helo1", "load", patients=pats[:6])
        assert ok, reason
        eng.step()
        finish_ops(eng, "helo1")
        assert len(eng.world.platforms["helo1"].manifest) == 6

    def test_seventh_litter_rejected(self, eng):
        mascal(eng, "ccp_lit", 7)
        goto(eng, "helo1", "ccp_lit")
        pats = list(eng.world.facilities["ccp_lit"].patients)
        ok, reason = do(eng, "medics", "helo1", "load", patients=pats[:7])
        assert not ok
        assert "capacity" in reason

    def test_mixed_load_conversion_arithmetic(self, eng):
        # oracle: units = max(6 litter * 2, 6 ambulatory) = 12.  3L + 6A = 12 fits;
        # 4L + 5A = 13 must not.
        spec = eng.scenario.platform_specs["hh60"]
        used, total = rules.occupancy(spec, 3, 6)
        assert (used, total) == (12.0, 12.0)
        assert rules.fits(spec, 3, 6).allowed
        bad = rules.fits(spec, 4, 5)
        assert not bad.allowed
        assert "13" in bad.reason and "12" in bad.reason

    def test_mixed_load_end_to_end(self, eng):
        mascal(eng, "ccp_lit", 4)
        mascal(eng, "ccp_amb", 6)
        goto(eng, "helo1", "ccp_amb")
        ambs = list(eng.world.facilities["ccp_amb"].patients)
        ok, _ = do(eng, "medics", "helo1", "load", patients=ambs[:6])
        assert ok
        eng.step()
        finish_ops(eng, "helo1")
        goto(eng, "helo1", "ccp_lit")
        lits = list(eng.world.facilities["ccp_lit"].patients)
        ok, reason = do(eng, "medics", "helo1", "load", patients=lits[:3])
        assert ok, reason  # 3L + 6A consumes exactly the converted seats
        eng.step()
        finish_ops(eng, "helo1")
        ok, reason = do(eng, "medics", "helo1", "load", patients=lits[3:4])
        assert not ok and "capacity" in reason

    def test_partial_selection_allowed(self, eng):
        mascal(eng, "ccp_lit", 7)
        goto(eng, "helo1", "ccp_lit")
        pats = list(eng.world.facilities["ccp_lit"].patients)
        ok, _ = do(eng, "medics", "helo1", "load", patients=pats[:2])
        assert ok

    def test_load_while_enroute_rejected(self, eng):
        mascal(eng, "ccp_lit", 2)
        ok, reason = do(eng, "medics", "helo1", "dispatch", to="ccp_lit")
        assert ok
        eng.step(2)
        pats = eng.world.facilities["ccp_lit"].patients
        ok, reason = do(eng, "medics", "helo1", "load", patients=pats[:1])
        assert not ok and "not on site" in reason


class TestContinuity:
    def _loaded_helo(self, eng, n=2) -> list[str]:
        mascal(eng, "ccp_lit", n)
        goto(eng, "helo1", "ccp_lit")
        pats = eng.world.facilities["ccp_lit"].patients[:n]
        ok, _ = do(eng, "medics", "helo1", "load", patients=pats)
        assert ok
        eng.step()
        finish_ops(eng, "helo1")
        return pats

    def test_fresh_patient_cannot_skip_to_role2(self, eng):
        pats = self._loaded_helo(eng)
        goto(eng, "helo1", "surg1")
        ok, reason = do(eng, "medics", "helo1", "unload", patients=pats)
        assert not ok
        assert "continuity" in reason

    def test_sequential_unload_stamps_each_timestamp(self, eng):
        pats = self._loaded_helo(eng)
        for fac, stamp in (("aid1", "t1"), ("surg1", "t2"), ("hosp1", "t3")):
            goto(eng, "helo1", fac)
            ok, reason = do(eng, "medics", "helo1", "unload", patients=pats)
            assert ok, (fac, reason)
            eng.step()
            finish_ops(eng, "helo1")
            for pid in pats:
                assert getattr(eng.world.patients[pid], stamp) is not None
            if fac != "hosp1":
                # wait out the treatment dwell, then re-load for the next leg
                guard = 0
                while not all(eng.world.patients[p].treated for p in pats):
                    eng.step(10)
                    guard += 1
                    assert guard < 1000
                ok, reason = do(eng, "medics", "helo1", "load", patients=pats)
                assert ok, reason
                eng.step()
                finish_ops(eng, "helo1")
        board = eng.world.totals
        assert board.saves == 2
        for pid in pats:
            p = eng.world.patients[pid]
            assert p.t0 <= p.t1 <= p.t2 <= p.t3

    def test_untreated_patient_not_loadable_from_facility(self, eng):
        pats = self._loaded_helo(eng)
        goto(eng, "helo1", "aid1")
        ok, _ = do(eng, "medics", "helo1", "unload", patients=pats)
        assert ok
        eng.step()
        finish_ops(eng, "helo1")
        ok, reason = do(eng, "medics", "helo1", "load", patients=pats)
        assert not ok and "treatment" in reason

    def test_unload_at_ccp_rejected(self, eng):
        pats = self._loaded_helo(eng)
        goto(eng, "helo1", "ccp_amb")
        ok, reason = do(eng, "medics", "helo1", "unload", patients=pats)
        assert not ok and "collection point" in reason


class TestExchangeHolds:
    def _drop_at_axp(self, eng, n=2) -> list[str]:
        mascal(eng, "ccp_lit", n)
        goto(eng, "truck1", "ccp_lit")
        pats = eng.world.facilities["ccp_lit"].patients[:n]
        ok, _ = do(eng, "medics", "truck1", "load", patients=pats)
        assert ok
        eng.step()
        finish_ops(eng, "truck1")
        goto(eng, "truck1", "axp1")
        ok, reason = do(eng, "medics", "truck1", "unload", patients=pats)
        assert ok, reason
        eng.step()
        finish_ops(eng, "truck1")
        return pats

    def test_dropper_bound_until_pickup(self, eng):
        pats = self._drop_at_axp(eng)
        ok, reason = do(eng, "medics", "truck1", "dispatch", to="n_base")
        assert not ok
        assert "attended" in reason
        # second platform arrives and lifts the patients: hold releases
        goto(eng, "helo1", "axp1")
        ok, reason = do(eng, "medics", "truck1", "dispatch", to="n_base")
        assert ok, reason  # another attender present now
        eng.step()

    def test_transfer_releases_hold(self, eng):
        pats = self._drop_at_axp(eng)
        goto(eng, "helo1", "axp1")
        ok, reason = do(eng, "medics", "helo1", "load", patients=pats)
        assert ok, reason
        eng.step()
        finish_ops(eng, "helo1")
        assert eng.world.facilities["axp1"].patients == []
        ok, reason = do(eng, "medics", "truck1", "dispatch", to="n_base")
        assert ok, reason

    def test_direct_transfer_between_platforms(self, eng):
        mascal(eng, "ccp_lit", 2)
        goto(eng, "truck1", "ccp_lit")
        pats = eng.world.facilities["ccp_lit"].patients[:2]
        do(eng, "medics", "truck1", "load", patients=pats)
        eng.step()
        finish_ops(eng, "truck1")
        goto(eng, "truck1", "axp1")
        goto(eng, "helo1", "axp1")
        ok, reason = do(eng, "medics", "truck1", "transfer_to", to_platform="helo1", patients=pats)
        assert ok, reason
        eng.step()
        finish_ops(eng, "truck1")
        assert set(eng.world.platforms["helo1"].manifest) == set(pats)
        assert eng.world.platforms["truck1"].manifest == []
        ok, reason = do(eng, "medics", "truck1", "dispatch", to="n_base")
        assert ok, reason

    def test_transfer_to_full_receiver_rejected(self, eng):
        mascal(eng, "ccp_lit", 8)
        goto(eng, "helo1", "ccp_lit")
        pats = list(eng.world.facilities["ccp_lit"].patients)
        do(eng, "medics", "helo1", "load", patients=pats[:6])
        eng.step()
        finish_ops(eng, "helo1")
        goto(eng, "truck1", "ccp_lit")
        do(eng, "medics", "truck1", "load", patients=pats[6:8])
        eng.step()
        finish_ops(eng, "truck1")
        goto(eng, "helo1", "axp1")
        goto(eng, "truck1", "axp1")
        ok, reason = do(eng, "medics", "truck1", "transfer_to", to_platform="helo1", patients=pats[6:8])
        assert not ok and "capacity" in reason

    def test_empty_transfer_rejected(self, eng):
        goto(eng, "truck1", "axp1")
        goto(eng, "helo1", "axp1")
        ok, reason = do(eng, "medics", "truck1", "transfer_to", to_platform="helo1", patients=[])
        assert not ok and "empty" in reason


class TestPads:
    def test_second_helicopter_queues_at_position_one(self, eng):
        goto(eng, "helo1", "surg1")
        ok, _ = do(eng, "medics", "helo2", "dispatch", to="surg1")
        assert ok
        eng.step(200)
        fac = eng.world.facilities["surg1"]
        assert fac.pad_occupied == ["helo1"]
        assert fac.pad_queue == ["helo2"]
        queued_ev = [e for e in eng.log if e.kind == "pad_queued"]
        assert queued_ev and queued_ev[0].data["position"] == 1
        assert eng.world.platforms["helo2"].status == "queued"

    def test_departure_promotes_in_same_tick(self, eng):
        goto(eng, "helo1", "surg1")
        do(eng, "medics", "helo2", "dispatch", to="surg1")
        eng.step(200)
        ok, _ = do(eng, "medics", "helo1", "dispatch", to="n_base")
        assert ok
        eng.step()
        fac = eng.world.facilities["surg1"]
        assert fac.pad_occupied == ["helo2"]
        assert fac.pad_queue == []
        tick_kinds = [(e.kind, e.data.get("platform")) for e in eng.log[-6:]]
        assert ("pad_freed", "helo1") in tick_kinds and ("pad_occupied", "helo2") in tick_kinds

    def test_fifo_service_order(self, eng):
        # stagger departures so arrival order is helo1, helo2, helo3
        do(eng, "medics", "helo1", "dispatch", to="surg1")
        eng.step(20)
        do(eng, "medics", "helo2", "dispatch", to="surg1")
        eng.step(20)
        do(eng, "medics", "helo3", "dispatch", to="surg1")
        eng.step(300)
        occupied_order = [e.data["platform"] for e in eng.log if e.kind == "pad_occupied"]
        assert occupied_order[0] == "helo1"
        # free pads one by one; promotions must follow arrival order
        do(eng, "medics", "helo1", "dispatch", to="n_base")
        eng.step(5)
        do(eng, "medics", "helo2", "dispatch", to="n_base")
        eng.step(5)
        occupied_order = [e.data["platform"] for e in eng.log if e.kind == "pad_occupied"]
        assert occupied_order == ["helo1", "helo2", "helo3"]

    def test_queued_platform_cannot_load(self, eng):
        mascal(eng, "ccp_lit", 1)
        goto(eng, "helo1", "surg1")
        do(eng, "medics", "helo2", "dispatch", to="surg1")
        eng.step(200)
        ok, reason = do(eng, "medics", "helo2", "unload", patients=["p00001"])
        assert not ok
        assert "queue" in reason or "pad" in reason

    def test_ground_platform_ignores_pads(self, eng):
        goto(eng, "helo1", "surg1")
        goto(eng, "truck1", "surg1")
        assert eng.world.platforms["truck1"].at_facility == "surg1"
        assert "truck1" not in eng.world.facilities["surg1"].pad_occupied


class TestRejectionPurity:
    def test_rejected_action_leaves_state_bit_identical(self, eng):
        mascal(eng, "ccp_lit", 8)
        goto(eng, "helo1", "ccp_lit")
        eng.step(3)
        before = digest_json(eng.world, eng.now)
        seq_before = len(eng.log)
        pats = list(eng.world.facilities["ccp_lit"].patients)
        ok, _ = do(eng, "medics", "helo1", "load", patients=pats[:7])  # over capacity
        assert not ok
        eng.step()
        after = digest_json(eng.world, eng.now)
        assert before == after
        kinds = [e.kind for e in eng.log[seq_before:]]
        assert "action_rejected" in kinds
        assert not any(k in ("loaded", "load_started") for k in kinds)


class TestCasevac:
    def test_request_grant_spawn_and_deferred_despawn(self, eng):
        ok, _ = do(eng, "medics", "any", "request_casevac", details="need heavy lift")
        assert ok
        eng.step()
        reqs = list(eng.world.casevac_requests.values())
        assert len(reqs) == 1 and reqs[0].status == "pending"
        ok, reason, _ = eng.enqueue_inject(
            "instructor",
            Inject(kind="grant_casevac", params={"request": reqs[0].id, "spec": "ch47", "node": "n_base", "window_min": 30.0}),
        )
        assert ok, reason
        eng.step()
        cv = [p for p in eng.world.platforms.values() if p.casevac_expires is not None]
        assert len(cv) == 1
        hook = cv[0]
        assert hook.owner == "medics"
        assert not hook.spec.medevac
        # load patients aboard, let the window lapse: despawn must defer
        mascal(eng, "ccp_lit", 2)
        goto(eng, "medics_hook" if False else hook.id, "ccp_lit")
        pats = list(eng.world.facilities["ccp_lit"].patients)[:2]
        ok, reason = do(eng, "medics", hook.id, "load", patients=pats)
        assert ok, reason
        eng.step()
        finish_ops(eng, hook.id)
        eng.step(400)  # way past expiry
        assert hook.id in eng.world.platforms  # still flying: patients aboard
        goto(eng, hook.id, "aid1")
        do(eng, "medics", hook.id, "unload", patients=pats)
        eng.step()
        guard = 0
        while hook.id in eng.world.platforms and eng.world.platforms[hook.id].status == "busy":
            eng.step()
            guard += 1
            assert guard < 2000
        eng.step(2)
        assert hook.id not in eng.world.platforms  # empty at a facility: gone
        kinds = [e.kind for e in eng.log]
        assert "platform_despawned" in kinds

    def test_deny_request(self, eng):
        do(eng, "medics", "x", "request_casevac", details="please")
        eng.step()
        req = next(iter(eng.world.casevac_requests.values()))
        ok, _, _ = eng.enqueue_inject("instructor", Inject(kind="deny_casevac", params={"request": req.id}))
        assert ok
        eng.step()
        assert eng.world.casevac_requests[req.id].status == "denied"
        assert all(p.casevac_expires is None for p in eng.world.platforms.values())


class TestOwnership:
    def test_other_roles_platform_rejected(self, eng):
        ok, reason = do(eng, "instructor", "helo1", "dispatch", to="ccp_lit")
        assert not ok and "ownership" in reason

    def test_unknown_platform_rejected(self, eng):
        ok, reason = do(eng, "medics", "ghost9", "dispatch", to="ccp_lit")
        assert not ok and "ownership" in reason
