"""Scripted baseline policies for headless runs.

A policy maps one role's observation view to action requests once per
decision epoch.  Policies only emit actions that are legal at issue time;
races between roles can still produce rejections, which the engine logs.
GreedyNearest works casualties strictly oldest-first; TriageGreedy lifts
urgent patients ahead of priority, which is what the scoring rewards.
"""

from __future__ import annotations

import math

from .rng import RngStream
from .rules import ActionRequest
from .scenario import FacilityRole, Scenario
from .views import ObservationView
from .worldmap import AIR_CLASSES, PlatformClass, Spot, ThreatRing, plan_route, plan_route_to_pos

CARE_ROLE_BY_LEVEL = {1: "role1", 2: "role2", 3: "role3"}


def _spot_of(platform: dict, scenario: Scenario, facilities_by_id: dict) -> Spot:
    node = platform.get("node")
    at = platform.get("at")
    if at and at in facilities_by_id:
        node = facilities_by_id[at]["node"]
    if node:
        return Spot.at_node(scenario.world, node)
    return Spot(x=platform["x"], y=platform["y"])


class Policy:
    name = "idle"

    def __init__(self, role: str, scenario: Scenario, rng: RngStream):
        self.role = role
        self.scenario = scenario
        self.rng = rng

    def decide(self, view: ObservationView) -> list[ActionRequest]:
        return []

    # helpers shared by the concrete policies ---------------------------

    def _rings(self, view: ObservationView) -> list[ThreatRing]:
        return [ThreatRing.from_dict(r) for r in view.rings]

    def _reachable(self, view: ObservationView, platform: dict, target: dict) -> bool:
        return self._route_km(view, platform, target) is not None

    def _route_km(self, view: ObservationView, platform: dict, target: dict) -> float | None:
        facilities = {f["id"]: f for f in view.facilities}
        origin = _spot_of(platform, self.scenario, facilities)
        klass = PlatformClass(platform["class"])
        rings = self._rings(view)
        if target.get("mobile") and klass in AIR_CLASSES:
            route = plan_route_to_pos(klass, 1.0, origin, (target["x"], target["y"]), rings, view.time)
            return route.total_km if route else None
        node = target["node"]
        if node is None:
            return None
        if origin.node == node:
            return 0.0
        try:
            route = plan_route(self.scenario.world, klass, 1.0, origin, node, rings, view.time)
        except ValueError:
            return None
        return route.total_km if route else None

    def _action(self, platform: str, verb: str, view: ObservationView, **params) -> ActionRequest:
        return ActionRequest(actor=self.role, platform=platform, verb=verb, params=params, issued_at=view.time)

    def _fits(self, platform: dict, manifest_like: list[dict], extra: list[dict]) -> bool:
        litters = sum(1 for p in manifest_like + extra if p["kind"] == "litter")
        ambs = len(manifest_like) + len(extra) - litters
        if litters > platform["litter_capacity"] or ambs > platform["ambulatory_capacity"]:
            return False
        conv = platform["conversion"]
        total = max(platform["litter_capacity"] * conv, float(platform["ambulatory_capacity"]))
        return litters * conv + ambs <= total


class IdlePolicy(Policy):
    name = "idle"


class RandomLegalPolicy(Policy):
    """Uniformly random legal verbs; the doctrine-invariant fuzzer."""

    name = "random_legal"

    def decide(self, view: ObservationView) -> list[ActionRequest]:
        actions: list[ActionRequest] = []
        facilities = {f["id"]: f for f in view.facilities}
        for plat in view.own_platforms:
            if plat["status"] not in ("idle", "halted"):
                continue
            options = self._options(view, plat, facilities)
            if options:
                actions.append(self.rng.choice(options))
        return actions

    def _options(self, view, plat, facilities) -> list[ActionRequest]:
        opts: list[ActionRequest] = [self._action(plat["id"], "wait", view)]
        here = facilities.get(plat["at"]) if plat.get("at") else None

        attended_bind = False
        if here and here["role"] in ("axp", "hlz") and (here["patients"] or here["counts"] and here["counts"]["total"]):
            others = [
                p
                for p in view.own_platforms + view.friendly_platforms
                if p.get("at") == here["id"] and p["id"] != plat["id"]
            ]
            attended_bind = not others

        if not attended_bind:
            for f in view.facilities:
                if here is not None and f["id"] == here["id"]:
                    continue
                if self.rng.bernoulli(0.5) and self._reachable(view, plat, f):
                    opts.append(self._action(plat["id"], "dispatch", view, to=f["id"]))
                    break  # one dispatch candidate is enough

        if here is not None:
            loadable = [
                p
                for p in (here.get("patients") or [])
                if not p["claimed"] and (here["role"] in ("ccp", "axp", "hlz") or p["treated"]) and here["role"] != "role3"
            ]
            padded = here["pad_slots"] is None or plat["id"] in here["pad_occupied"] or PlatformClass(plat["class"]) not in AIR_CLASSES
            if loadable and padded:
                take = self.rng.shuffled(loadable)[: 1 + self.rng.randrange(3)]
                keep = [p for p in take if self._fits(plat, plat["manifest"], [p])]
                if keep and self._fits(plat, plat["manifest"], keep):
                    opts.append(self._action(plat["id"], "load", view, patients=[p["id"] for p in keep]))
            manifest = plat["manifest"]
            if manifest and padded:
                if here["role"] in ("axp", "hlz"):
                    take = self.rng.shuffled(manifest)[: 1 + self.rng.randrange(3)]
                    opts.append(self._action(plat["id"], "unload", view, patients=[p["id"] for p in take]))
                elif here["role"] in ("role1", "role2", "role3"):
                    level = int(here["role"][-1])
                    ok = [p for p in manifest if p["next_role"] == level]
                    if ok:
                        opts.append(self._action(plat["id"], "unload", view, patients=[p["id"] for p in ok]))
                if here["role"] in ("axp", "hlz"):
                    peers = [
                        p
                        for p in view.own_platforms
                        if p["id"] != plat["id"] and p.get("at") == here["id"] and p["status"] == "idle"
                    ]
                    if peers:
                        peer = self.rng.choice(peers)
                        movers = [m for m in manifest if self._fits(peer, peer["manifest"], [m])]
                        if movers:
                            opts.append(
                                self._action(
                                    plat["id"], "transfer_to", view,
                                    to_platform=peer["id"], patients=[movers[0]["id"]],
                                )
                            )
        if self.rng.bernoulli(0.02):
            opts.append(self._action(plat["id"], "request_casevac", view, details="surge lift requested"))
        return opts


class GreedyPolicy(Policy):
    """Dispatch the closest free platform to the neediest waiting casualty,
    carry to the nearest next role of care, repeat."""

    name = "greedy_nearest"
    triage = False

    def decide(self, view: ObservationView) -> list[ActionRequest]:
        actions: list[ActionRequest] = []
        facilities = {f["id"]: f for f in view.facilities}
        free = [p for p in view.own_platforms if p["status"] in ("idle", "halted")]
        assigned_sites: set[str] = set()
        busy_dests = {p["dest"] for p in view.own_platforms if p.get("dest")}

        carriers = [p for p in free if p["manifest"]]
        empties = [p for p in free if not p["manifest"]]

        for plat in carriers:
            act = self._deliver(view, plat, facilities)
            if act is not None:
                actions.append(act)

        targets = self._targets(view)
        # platforms already standing on loadable work take it before anything
        # deadheads: cuts churn when site rankings shift between epochs
        by_site = dict(targets)
        for plat in list(empties):
            at = plat.get("at")
            if at in by_site and at not in assigned_sites and self._onward(view, plat, by_site[at][0]["next_role"], facilities[at]):
                chosen = self._pick_load(plat, by_site[at])
                if chosen:
                    actions.append(self._action(plat["id"], "load", view, patients=[p["id"] for p in chosen]))
                    empties.remove(plat)
                    assigned_sites.add(at)
        for site_id, patients in targets:
            if not empties:
                break
            if site_id in assigned_sites or site_id in busy_dests:
                continue
            site = facilities[site_id]
            plat = self._nearest_able(view, empties, site, patients)
            if plat is None:
                continue
            empties.remove(plat)
            assigned_sites.add(site_id)
            if plat.get("at") == site_id:
                chosen = self._pick_load(plat, patients)
                if chosen:
                    actions.append(self._action(plat["id"], "load", view, patients=[p["id"] for p in chosen]))
            else:
                actions.append(self._action(plat["id"], "dispatch", view, to=site_id))
        return actions

    def _sort_key(self, p: dict):
        if self.triage:
            return (0 if p["precedence"] == "urgent" else 1, p["t0"])
        return (p["t0"],)

    def _targets(self, view: ObservationView) -> list[tuple[str, list[dict]]]:
        """Sites with waiting work, ordered by their neediest patient."""
        per_site: dict[str, list[dict]] = {}
        for f in view.facilities:
            if f["patients"] is None or f["role"] == "role3":
                continue
            waiting = [
                p
                for p in f["patients"]
                if not p["claimed"] and (f["role"] in ("ccp", "axp", "hlz") or p["treated"])
            ]
            if waiting:
                per_site[f["id"]] = sorted(waiting, key=self._sort_key)
        return sorted(per_site.items(), key=lambda kv: self._sort_key(kv[1][0]))

    def _nearest_able(self, view, empties: list[dict], site: dict, patients: list[dict]) -> dict | None:
        best = None
        best_km = math.inf
        for plat in empties:
            km = self._route_km(view, plat, site)
            if km is None:
                continue
            if self._onward(view, plat, patients[0]["next_role"], site) is None:
                continue
            if km < best_km:
                best, best_km = plat, km
        return best

    def _onward(self, view, plat, next_role: int, from_site: dict) -> str | None:
        """Nearest next-role facility reachable from the pickup site."""
        want = CARE_ROLE_BY_LEVEL.get(next_role)
        if want is None:
            return None
        best = None
        best_km = math.inf
        fake_origin = dict(plat)
        fake_origin["at"] = None
        fake_origin["node"] = from_site["node"]
        fake_origin["x"], fake_origin["y"] = from_site["x"], from_site["y"]
        for f in view.facilities:
            if f["role"] != want or not f["active"]:
                continue
            km = self._route_km(view, fake_origin, f)
            if km is not None and km < best_km:
                best, best_km = f["id"], km
        return best

    def _pick_load(self, plat: dict, patients: list[dict]) -> list[dict]:
        """Fill capacity in triage order with patients sharing one next role."""
        if not patients:
            return []
        next_role = patients[0]["next_role"]
        chosen: list[dict] = []
        for p in patients:
            if p["next_role"] != next_role:
                continue
            if self._fits(plat, plat["manifest"], chosen + [p]):
                chosen.append(p)
        return chosen

    def _deliver(self, view, plat, facilities) -> ActionRequest | None:
        manifest = sorted(plat["manifest"], key=self._sort_key)
        next_role = manifest[0]["next_role"]
        want = CARE_ROLE_BY_LEVEL.get(next_role)
        if want is None:
            return None
        here = facilities.get(plat["at"]) if plat.get("at") else None
        if here is not None and here["role"] == want:
            padded = here["pad_slots"] is None or plat["id"] in here["pad_occupied"] or PlatformClass(plat["class"]) not in AIR_CLASSES
            if not padded:
                return None  # waiting for the pad queue
            drop = [p["id"] for p in manifest if p["next_role"] == next_role]
            return self._action(plat["id"], "unload", view, patients=drop)
        dest = self._onward(view, plat, next_role, _self_site(plat, here))
        if dest is None or (here is not None and dest == here["id"]):
            return None
        if plat.get("dest") == dest:
            return None
        return self._action(plat["id"], "dispatch", view, to=dest)


def _self_site(plat: dict, here: dict | None) -> dict:
    if here is not None:
        return here
    return {"id": "__self__", "node": plat.get("node"), "x": plat["x"], "y": plat["y"], "mobile": False}


class GreedyNearestPolicy(GreedyPolicy):
    name = "greedy_nearest"
    triage = False


class TriageGreedyPolicy(GreedyPolicy):
    name = "triage_greedy"
    triage = True


POLICIES = {
    "idle": IdlePolicy,
    "random_legal": RandomLegalPolicy,
    "greedy_nearest": GreedyNearestPolicy,
    "triage_greedy": TriageGreedyPolicy,
}


def make_policy(name: str, role: str, scenario: Scenario, rng: RngStream) -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy '{name}' (have: {', '.join(sorted(POLICIES))})")
    return cls(role, scenario, rng)
