"""CLI surface: run, replay, stats, validate; exit codes and archives."""

from __future__ import annotations

import json
import os

import pytest
from click.testing import CliRunner

from evacsim.cli import main, read_archive, verify_archive, ArchiveRefused
from evacsim.scenario import dumps_scenario, load_fixture


@pytest.fixture(scope="module")
def archive(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run") / "arc")
    runner = CliRunner()
    res = runner.invoke(
        main,
        ["run", "--scenario", "minimal", "--seed", "9", "--duration", "120",
         "--ticklen", "6", "--policy", "medics=triage_greedy", "--out", out],
    )
    assert res.exit_code == 0, res.output
    return out


class TestRun:
    def test_archive_bundle_complete(self, archive):
        for name in ("meta.json", "scenario.yaml", "inputs.jsonl", "events.jsonl"):
            assert os.path.exists(os.path.join(archive, name)), name
        for name in ("summary.json", "delays.csv", "evac_times.csv"):
            assert os.path.exists(os.path.join(archive, "debrief", name)), name

    def test_same_command_twice_identical_logs(self, tmp_path):
        runner = CliRunner()
        outs = []
        for sub in ("a", "b"):
            out = str(tmp_path / sub)
            res = runner.invoke(
                main,
                ["run", "--scenario", "minimal", "--seed", "9", "--duration", "60",
                 "--ticklen", "6", "--policy", "medics=random_legal", "--out", out],
            )
            assert res.exit_code == 0, res.output
            outs.append(open(os.path.join(out, "events.jsonl")).read())
        assert outs[0] == outs[1]

    def test_unknown_role_usage_error(self, tmp_path):
        runner = CliRunner()
        res = runner.invoke(main, ["run", "--scenario", "minimal", "--policy", "ghosts=idle", "--out", str(tmp_path / "x")])
        assert res.exit_code == 2

    def test_policy_all(self, tmp_path):
        runner = CliRunner()
        res = runner.invoke(
            main,
            ["run", "--scenario", "minimal", "--duration", "30", "--policy-all", "idle", "--out", str(tmp_path / "y")],
        )
        assert res.exit_code == 0, res.output


class TestReplay:
    def test_untouched_archive_passes(self, archive):
        runner = CliRunner()
        res = runner.invoke(main, ["replay", archive])
        assert res.exit_code == 0
        assert "PASS" in res.output

    def test_edited_event_fails_with_seq(self, archive, tmp_path):
        import shutil

        broken = str(tmp_path / "broken")
        shutil.copytree(archive, broken)
        path = os.path.join(broken, "events.jsonl")
        lines = open(path).read().splitlines()
        idx = max(5, len(lines) // 2)
        ev = json.loads(lines[idx])
        ev["time"] += 0.5
        lines[idx] = json.dumps(ev, sort_keys=True, separators=(",", ":"))
        open(path, "w").write("\n".join(lines) + "\n")
        runner = CliRunner()
        res = runner.invoke(main, ["replay", broken])
        assert res.exit_code == 1
        assert "FAIL" in res.output

    def test_altered_seed_refused(self, archive, tmp_path):
        import shutil

        hacked = str(tmp_path / "hacked")
        shutil.copytree(archive, hacked)
        meta = json.load(open(os.path.join(hacked, "meta.json")))
        meta["seed"] += 1
        json.dump(meta, open(os.path.join(hacked, "meta.json"), "w"))
        runner = CliRunner()
        res = runner.invoke(main, ["replay", hacked])
        assert res.exit_code == 2
        assert "REFUSED" in res.output

    def test_cross_version_refused(self, archive, tmp_path):
        import shutil

        old = str(tmp_path / "old")
        shutil.copytree(archive, old)
        meta = json.load(open(os.path.join(old, "meta.json")))
        meta["engine_version"] = "0.0.1"
        json.dump(meta, open(os.path.join(old, "meta.json"), "w"))
        with pytest.raises(ArchiveRefused):
            verify_archive(old)


class TestStats:
    def test_score_matches_run_summary(self, archive):
        runner = CliRunner()
        res = runner.invoke(main, ["stats", os.path.join(archive, "events.jsonl"), "--which", "score"])
        assert res.exit_code == 0
        got = json.loads(res.output.strip())
        summary = json.load(open(os.path.join(archive, "debrief", "summary.json")))
        assert got["score"] == summary["score"]
        assert got["saves"] == summary["saves"]

    def test_delays_output(self, archive):
        runner = CliRunner()
        res = runner.invoke(main, ["stats", os.path.join(archive, "events.jsonl"), "--which", "delays"])
        assert res.exit_code == 0

    def test_empty_log_empty_tables(self, tmp_path):
        path = str(tmp_path / "empty.jsonl")
        open(path, "w").write("")
        runner = CliRunner()
        res = runner.invoke(main, ["stats", path, "--which", "score"])
        assert res.exit_code == 0
        got = json.loads(res.output.strip())
        assert got == {"alive": 0, "deaths": 0, "saves": 0, "score": 0.0, "spawned": 0}


class TestValidate:
    def test_valid_fixture_file(self, tmp_path):
        path = str(tmp_path / "ok.yaml")
        open(path, "w").write(dumps_scenario(load_fixture("minimal")))
        runner = CliRunner()
        res = runner.invoke(main, ["validate", path])
        assert res.exit_code == 0
        assert "OK" in res.output

    def test_broken_scenario_exit_two(self, tmp_path):
        path = str(tmp_path / "bad.yaml")
        open(path, "w").write("format: 1\nname: bad\nmap: {nodes: []}\n")
        runner = CliRunner()
        res = runner.invoke(main, ["validate", path])
        assert res.exit_code == 2


class TestArchiveRoundtrip:
    def test_read_archive_parses_everything(self, archive):
        meta, scenario, inputs, events = read_archive(archive)
        assert meta["scenario_name"] == "minimal"
        assert scenario.name == "minimal"
        assert len(events) > 0
        assert all(rec.kind in ("action", "inject") for rec in inputs)
