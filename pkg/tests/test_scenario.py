"""Scenario document loading, validation, and round-trip serialization."""

from __future__ import annotations

import pytest

from evacsim.scenario import (
    DEFAULT_PRECEDENCE_SPECS,
    Precedence,
    ScenarioError,
    dumps_scenario,
    load_fixture,
    load_scenario,
    validate_scenario,
)

MINIMAL_DOC = """
format: 1
name: tiny
map:
  nodes:
    - {id: n1, x: 0.0, y: 0.0, kind: land}
    - {id: n2, x: 10.0, y: 0.0, kind: land}
    - {id: n3, x: 20.0, y: 0.0, kind: land}
    - {id: n4, x: 30.0, y: 0.0, kind: land}
  roads:
    - {a: n1, b: n2, km: 10.0}
    - {a: n2, b: n3, km: 10.0}
    - {a: n3, b: n4, km: 10.0}
facilities:
  - {id: ccp1, role: ccp, node: n1}
  - {id: r1, role: role1, node: n2}
  - {id: r2, role: role2, node: n3}
  - {id: r3, role: role3, node: n4}
platform_types:
  amb: {class: ground_vehicle, cruise_kmh: 60.0, litter: 4, ambulatory: 8}
platforms:
  - {id: a1, type: amb, start: n2, owner: medics}
casualty_streams:
  ccp1: {mean_wave_interval_min: 30.0, mean_wave_size: 3.0}
roles:
  - {name: medics}
  - {name: instructor, inject: true, sees_all: true}
"""


class TestLoad:
    def test_minimal_document(self):
        s = load_scenario(MINIMAL_DOC)
        assert s.name == "tiny"
        assert set(s.facilities) == {"ccp1", "r1", "r2", "r3"}
        assert s.platforms[0].owner == "medics"
        assert validate_scenario(s) == []

    def test_default_precedence_constants(self):
        s = load_scenario(MINIMAL_DOC)
        assert s.precedence_specs[Precedence.URGENT].p_max == 10.0
        assert s.precedence_specs[Precedence.URGENT].standard_min == 60.0
        assert s.precedence_specs[Precedence.PRIORITY].p_max == 8.0
        assert s.precedence_specs[Precedence.PRIORITY].standard_min == 240.0
        assert DEFAULT_PRECEDENCE_SPECS[Precedence.URGENT].p_max == 10.0

    def test_dangling_platform_start(self):
        doc = MINIMAL_DOC.replace("start: n2", "start: nowhere")
        with pytest.raises(ScenarioError, match="dangling.*nowhere"):
            load_scenario(doc)

    def test_dangling_facility_node(self):
        doc = MINIMAL_DOC.replace("{id: ccp1, role: ccp, node: n1}", "{id: ccp1, role: ccp, node: ghost}")
        with pytest.raises(ScenarioError, match="ccp1.*ghost"):
            load_scenario(doc)

    def test_unknown_owner_role(self):
        doc = MINIMAL_DOC.replace("owner: medics", "owner: pirates")
        with pytest.raises(ScenarioError, match="pirates"):
            load_scenario(doc)

    def test_parse_error_carries_detail(self):
        with pytest.raises(ScenarioError, match="parse error"):
            load_scenario("format: 1\nname: [unclosed")

    def test_wrong_format_version(self):
        with pytest.raises(ScenarioError, match="format"):
            load_scenario(MINIMAL_DOC.replace("format: 1", "format: 99"))

    def test_missing_field_names_it(self):
        doc = MINIMAL_DOC.replace("cruise_kmh: 60.0, ", "")
        with pytest.raises(ScenarioError, match="cruise_kmh"):
            load_scenario(doc)


class TestValidate:
    def test_bad_urgent_fraction(self):
        doc = MINIMAL_DOC.replace(
            "ccp1: {mean_wave_interval_min: 30.0, mean_wave_size: 3.0}",
            "ccp1: {mean_wave_interval_min: 30.0, mean_wave_size: 3.0, urgent_fraction: 1.5}",
        )
        with pytest.raises(ScenarioError, match="urgent_fraction"):
            load_scenario(doc)

    def test_road_shorter_than_euclid(self):
        doc = MINIMAL_DOC.replace("{a: n1, b: n2, km: 10.0}", "{a: n1, b: n2, km: 1.0}")
        with pytest.raises(ScenarioError, match="euclidean"):
            load_scenario(doc)

    def test_road_into_water(self):
        doc = MINIMAL_DOC.replace(
            "- {id: n4, x: 30.0, y: 0.0, kind: land}", "- {id: n4, x: 30.0, y: 0.0, kind: water}"
        )
        with pytest.raises(ScenarioError, match="road"):
            load_scenario(doc)

    def test_validate_is_empty_for_every_fixture(self):
        for name in ("minimal", "storm-surge-lite", "eastern-crucible-lite", "e2e-min"):
            assert validate_scenario(load_fixture(name)) == []


class TestRoundTrip:
    @pytest.mark.parametrize("name", ["minimal", "storm-surge-lite", "eastern-crucible-lite", "e2e-min"])
    def test_serialize_reparses_equal(self, name):
        s = load_fixture(name)
        text = dumps_scenario(s)
        s2 = load_scenario(text)
        assert dumps_scenario(s2) == text
        assert s2.sha256() == s.sha256()

    def test_storm_surge_lite_shape(self):
        s = load_fixture("storm-surge-lite")
        by_role: dict[str, int] = {}
        for f in s.facilities.values():
            by_role[f.role.value] = by_role.get(f.role.value, 0) + 1
        assert by_role["ccp"] == 7
        assert by_role["role1"] == 3
        assert by_role["role2"] == 2
        assert by_role["role3"] == 1
        islands = {s.world.nodes[f.node].island for f in s.facilities.values() if f.role.value == "ccp"}
        assert islands == {"windward", "leeward"}
        ships = [f for f in s.facilities.values() if f.mobile]
        assert all(f.pad_slots == 1 for f in ships)
