import json
import subprocess
import sys

import pytest

from emitgraph.cli import main
from emitgraph.graph import two_chains
from emitgraph.sim import DEFAULT_SEED


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def grid_schedule(tmp_path, capsys):
    path = tmp_path / "s.json"
    code, _, _ = run(["compile", "--target", "grid", "--dims", "4x4", "--layout", "line:4", "--out", path], capsys)
    assert code == 0
    return path


class TestPipeline:
    def test_compile_then_run(self, grid_schedule, capsys):
        code, out, _ = run(["run", "--schedule", grid_schedule, "--backend", "stabilizer", "--verify", "grid:4x4"], capsys)
        assert code == 0
        res = json.loads(out)
        assert res["verify"]["ok"] and res["seed"] == DEFAULT_SEED

    def test_compile_report(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        code, text, _ = run(["compile", "--target", "grid:5x4", "--layout", "line:5", "--out", out], capsys)
        report = json.loads(text)["report"]
        assert code == 0 and report["g_count"] == 16 and report["depth"] == 8

    def test_verify_all_branches(self, grid_schedule, capsys):
        code, out, _ = run(["verify", "--schedule", grid_schedule, "--branch-limit", "4"], capsys)
        assert code == 0 and json.loads(out)["ok"]

    def test_verify_wrong_target(self, grid_schedule, capsys):
        code, out, _ = run(["verify", "--schedule", grid_schedule, "--target", "cycle:16"], capsys)
        assert code == 1 and not json.loads(out)["ok"]

    def test_dense_backend_small(self, tmp_path, capsys):
        path = tmp_path / "lr.json"
        assert run(["compile", "--target", "path:4", "--layout", "line:1", "--protocol", "lr", "--out", path], capsys)[0] == 0
        code, out, _ = run(["run", "--schedule", path, "--backend", "dense", "--verify", "path:4"], capsys)
        assert code == 0 and json.loads(out)["verify"]["ok"]

    def test_dense_cap_is_resource_error(self, grid_schedule, capsys):
        code, _, err = run(["run", "--schedule", grid_schedule, "--backend", "dense"], capsys)
        assert code == 3 and json.loads(err)["error"] == "resource"

    def test_general_protocol(self, tmp_path, capsys):
        path = tmp_path / "g.json"
        code, out, _ = run(["compile", "--target", "seven", "--layout", "line:3", "--out", path], capsys)
        assert code == 0 and json.loads(out)["report"]["pump_count"] >= 7
        assert run(["verify", "--schedule", path], capsys)[0] == 0

    def test_capacity(self, tmp_path, capsys):
        code, _, err = run(["compile", "--target", "complete:5", "--layout", "line:3", "--out", tmp_path / "x.json"], capsys)
        assert code == 3 and "error" in json.loads(err)


class TestOrbit:
    @pytest.fixture
    def panels(self, tmp_path):
        a, d = tmp_path / "a.json", tmp_path / "d.json"
        a.write_text(two_chains().to_json())
        d.write_text(two_chains((5, 6)).to_json())
        return a, d

    def test_far_rung_pair_inequivalent(self, panels, capsys):
        a, d = panels
        code, out, _ = run(["orbit", "--graph", a, "--control", "1,2", "--equiv", d], capsys)
        res = json.loads(out)
        assert code == 1 and res["certificate"]["verdict"] == "inequivalent"
        assert res["scope"] == "clifford-restricted LU_C"

    def test_shifted_rung_equivalent(self, capsys):
        code, out, _ = run(["orbit", "--graph", "ladder", "--control", "1,2", "--equiv", "ladder:3-4"], capsys)
        assert code == 0 and json.loads(out)["certificate"]["moves"]

    def test_dump(self, tmp_path, capsys):
        code, out, _ = run(["orbit", "--graph", "path:4", "--dump", tmp_path / "dump"], capsys)
        assert code == 0
        keys = (tmp_path / "dump" / "keys.txt").read_text().split()
        assert len(keys) == json.loads(out)["orbit_size"]
        json.loads((tmp_path / "dump" / "moves.json").read_text())

    def test_key_cap(self, capsys):
        code, _, _ = run(["orbit", "--graph", "path:8", "--max-keys", "3"], capsys)
        assert code == 3


class TestFault:
    def test_lr_sweep_max_two(self, tmp_path, capsys):
        path = tmp_path / "lr.json"
        run(["compile", "--target", "path:6", "--layout", "line:1", "--protocol", "lr", "--out", path], capsys)
        code, out, _ = run(["fault", "--schedule", path, "--sweep", "all"], capsys)
        res = json.loads(out)
        assert code == 0 and res["max_support"] == 2 and res["counterexamples"] == 0

    def test_single_fault(self, tmp_path, capsys):
        path = tmp_path / "lr.json"
        run(["compile", "--target", "path:3", "--layout", "line:1", "--protocol", "lr", "--out", path], capsys)
        code, out, _ = run(["fault", "--schedule", path, "--fault", "3:0:Z"], capsys)
        assert code == 0 and len(json.loads(out)["entries"]) == 1

    def test_bad_fault_text(self, grid_schedule, capsys):
        code, _, err = run(["fault", "--schedule", grid_schedule, "--fault", "nonsense"], capsys)
        assert code == 2 and json.loads(err)["error"] == "usage"


class TestErrors:
    def test_unknown_subcommand(self, capsys):
        code, _, err = run(["bogus"], capsys)
        assert code == 2 and json.loads(err)["error"] == "usage"

    def test_missing_subcommand(self, capsys):
        assert run([], capsys)[0] == 2

    def test_invalid_schedule_rejected_before_running(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"format": "emitgraph.schedule/1", "steps": [{"kind": "cz", "qubits": [0, 1]}]}))
        code, out, err = run(["run", "--schedule", bad], capsys)
        assert code == 2 and out == "" and json.loads(err)["error"] == "validation"

    def test_missing_file(self, tmp_path, capsys):
        assert run(["run", "--schedule", tmp_path / "nope.json"], capsys)[0] == 2

    def test_bad_graph_spec(self, capsys):
        assert run(["export-dot", "--graph", "grid:0x3"], capsys)[0] == 2


class TestReproducibility:
    def test_byte_identical_compile(self, tmp_path, capsys):
        outs = []
        for k in range(2):
            path = tmp_path / f"s{k}.json"
            run(["compile", "--target", "random:8:0.4", "--layout", "line:4", "--seed", "5", "--out", path], capsys)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_byte_identical_run_and_seed_echo(self, grid_schedule, capsys):
        a = run(["run", "--schedule", grid_schedule, "--seed", "17"], capsys)[1]
        b = run(["run", "--schedule", grid_schedule, "--seed", "17"], capsys)[1]
        assert a == b and json.loads(a)["seed"] == 17

    def test_threads_do_not_change_output(self, capsys):
        a = run(["orbit", "--graph", "ladder", "--threads", "1"], capsys)[1]
        b = run(["orbit", "--graph", "ladder", "--threads", "2"], capsys)[1]
        assert a == b

    def test_export_dot(self, tmp_path, capsys):
        code, out, _ = run(["export-dot", "--graph", "path:3"], capsys)
        assert code == 0 and "0 -- 1;" in out

    def test_console_entry(self):
        proc = subprocess.run([sys.executable, "-m", "emitgraph", "export-dot", "--graph", "path:2"], capture_output=True, text=True)
        assert proc.returncode == 0 and "0 -- 1;" in proc.stdout
