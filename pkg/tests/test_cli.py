import json

import numpy as np
import pytest

from sgeo.cli import (CHECKS, ConfigError, RunConfig, list_targets, main,
                      run)


def _config(tmp_path, body):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(body))
    return str(path)


BASE = {"geometry": {"kind": "circle", "cutoff": 16},
        "checks": ["validate", "order_one"], "seed": 1}


class TestConfigValidation:
    def test_unknown_check_rejected_before_compute(self):
        cfg = dict(BASE, checks=["validate", "not_a_check"])
        with pytest.raises(ConfigError, match="not_a_check"):
            RunConfig.from_dict(cfg)

    def test_unknown_config_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            RunConfig.from_dict(dict(BASE, extra_field=1))

    def test_geometry_block_required(self):
        with pytest.raises(ConfigError, match="geometry"):
            RunConfig.from_dict({"checks": []})

    def test_check_entries_with_params(self):
        cfg = dict(BASE, checks=[{"name": "order_one", "tol": 1e-8}])
        rc = RunConfig.from_dict(cfg)
        assert rc.checks == [("order_one", {"tol": 1e-8})]


class TestRun:
    def test_empty_check_list_valid(self):
        rc = RunConfig.from_dict(dict(BASE, checks=[]))
        rep = run(rc)
        assert rep.exit_status == 0
        assert rep.body["checks"] == []
        assert rep.body["summary"] == {"pass": 0, "fail": 0, "inconclusive": 0}

    def test_passes_and_report_shape(self, tmp_path):
        out = tmp_path / "report.json"
        rc = RunConfig.from_dict(dict(BASE, output_path=str(out)))
        rep = run(rc)
        assert rep.exit_status == 0
        body = json.loads(out.read_text())
        assert body["schema"] == "sgeo-report/1"
        assert body["summary"]["pass"] == 2
        # the two unitarily-complete data: eigenvalue list + basis hash
        assert len(body["two_pieces"]["d_eigenvalues"]) == 33
        assert len(body["two_pieces"]["basis_fingerprint"]) == 64
        assert set(body["environment"]["timing"]) == {"validate", "order_one"}

    def test_deterministic_hash_across_runs(self):
        rc1 = RunConfig.from_dict(BASE)
        rc2 = RunConfig.from_dict(BASE)
        assert run(rc1).determinism_hash == run(rc2).determinism_hash

    def test_corrupt_geometry_fails_run(self):
        cfg = {"geometry": {"kind": "circle", "cutoff": 16,
                            "corruption": "dense_D"},
               "checks": ["validate", "order_one"]}
        rep = run(RunConfig.from_dict(cfg))
        assert rep.exit_status == 1
        verdicts = {c["name"]: c["verdict"] for c in rep.body["checks"]}
        assert verdicts == {"validate": "pass", "order_one": "fail"}

    def test_per_check_exception_becomes_fail(self):
        # orientability on the interval raises; the run must survive
        cfg = {"geometry": {"kind": "interval", "cutoff": 32},
               "checks": ["orientability"]}
        rep = run(RunConfig.from_dict(cfg))
        verdict = rep.body["checks"][0]["verdict"]
        assert verdict in ("fail", "inconclusive")

    def test_parallel_jobs_same_verdicts(self):
        cfg = dict(BASE, checks=["validate", "order_one", "dimension",
                                 "dixmier"])
        serial = run(RunConfig.from_dict(dict(cfg, jobs=1)))
        parallel = run(RunConfig.from_dict(dict(cfg, jobs=4)))
        v = lambda r: [c["verdict"] for c in r.body["checks"]]
        assert v(serial) == v(parallel)


class TestMain:
    def test_check_exit_codes(self, tmp_path, capsys):
        ok = _config(tmp_path, BASE)
        assert main(["check", ok]) == 0
        bad = _config(tmp_path, dict(BASE, checks=["nope"]))
        assert main(["check", bad]) == 2
        missing = str(tmp_path / "missing.json")
        assert main(["check", missing]) == 2

    def test_check_writes_report(self, tmp_path, capsys):
        cfg = _config(tmp_path, BASE)
        out = tmp_path / "r.json"
        assert main(["check", cfg, "--report", str(out), "--seed", "7"]) == 0
        body = json.loads(out.read_text())
        assert body["config"]["seed"] == 7

    def test_distance_subcommand(self, capsys):
        assert main(["distance", "--geometry", "circle", "--cutoff", "32",
                     "--from", "0", "--to", "0.25"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["lower_bound"] >= 0.95 * np.pi / 2

    def test_dixmier_subcommand(self, capsys):
        assert main(["dixmier", "--geometry", "circle", "--cutoff", "64"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["value"] == pytest.approx(2.0, abs=0.1)

    def test_list_targets(self, capsys):
        assert main(["list"]) == 0
        text = capsys.readouterr().out
        for needle in ("circle", "torus", "heat_vs_dixmier"):
            assert needle in text
        assert list_targets() == text.rstrip("\n")


class TestRegistry:
    def test_all_checks_run_on_circle(self):
        cfg = {"geometry": {"kind": "circle", "cutoff": 16},
               "checks": sorted(CHECKS)}
        rep = run(RunConfig.from_dict(cfg))
        verdicts = {c["name"]: c["verdict"] for c in rep.body["checks"]}
        assert all(v in ("pass", "fail", "inconclusive")
                   for v in verdicts.values())
        assert verdicts["validate"] == "pass"
        assert verdicts["order_one"] == "pass"
