import csv
import json
import subprocess
import sys

import pytest

from jouletrace.cli import main
from jouletrace.io import read_footprint
from jouletrace.model import parse_qtn

SPEC = {
    "seed": 101,
    "devices": ["cpu:0", "gpu:0"],
    "layers": 2,
    "tensors_per_layer": 2,
    "dur_min": 5,
    "dur_max": 120,
    "gap_max": 40,
    "concurrency": 2,
    "period": 50,
    "power": {"kind": "two_phase", "w_low": 4.0, "w_high": 16.0, "switch_ts": 300},
}


@pytest.fixture
def workdir(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(SPEC))
    assert main(["synth", str(spec_path), "--outdir", str(tmp_path)]) == 0
    return tmp_path


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSynthCommand:
    def test_emits_three_artifacts(self, workdir):
        for name in ("events.jsonl", "power.csv", "expected_tef.json"):
            assert (workdir / name).exists()

    def test_deterministic(self, workdir, tmp_path):
        other = tmp_path / "again"
        spec_path = workdir / "spec.json"
        assert main(["synth", str(spec_path), "--outdir", str(other)]) == 0
        for name in ("events.jsonl", "power.csv", "expected_tef.json"):
            assert (other / name).read_bytes() == (workdir / name).read_bytes()

    def test_invalid_spec_field_names_it(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text('{"seed": 1, "wattage": 9}')
        code, _, err = run(["synth", str(spec_path), "--outdir", str(tmp_path)], capsys)
        assert code == 1
        assert "wattage" in err


class TestAccountCommand:
    def test_matches_expected_footprint(self, workdir, capsys):
        out = workdir / "tef.json"
        code, _, err = run(
            ["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "-o", str(out)],
            capsys,
        )
        assert code == 0
        expected = read_footprint(workdir / "expected_tef.json")
        actual = read_footprint(out)
        assert set(actual) == set(expected)
        for op in actual:
            assert abs(actual[op] - expected[op]) <= 1e-9 * max(expected[op], 1e-300)
        assert "device cpu:0" in err and "pre_sample_ticks=" in err

    def test_naive_flag_is_byte_identical(self, workdir, capsys):
        default_out = workdir / "tef.json"
        naive_out = workdir / "tef_naive.json"
        run(["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "-o", str(default_out)], capsys)
        run(["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "-o", str(naive_out), "--naive"], capsys)
        assert default_out.read_bytes() == naive_out.read_bytes()

    def test_naive_guard_refuses_large_traces(self, workdir, capsys):
        code, _, err = run(
            ["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "--stdout", "--naive", "--naive-tick-guard", "3"],
            capsys,
        )
        assert code == 2
        assert "guard" in err

    def test_missing_power_file(self, workdir, capsys):
        code, _, err = run(
            ["account", str(workdir / "events.jsonl"), str(workdir / "nope.csv"),
             "--stdout"],
            capsys,
        )
        assert code == 1
        assert "nope.csv" in err

    def test_stdout_artifact(self, workdir, capsys):
        code, out, _ = run(
            ["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "--stdout"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)

    def test_split_passes_outputs(self, workdir, capsys):
        fwd, bwd = workdir / "fwd.json", workdir / "bwd.json"
        code, _, _ = run(
            ["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "--stdout", "--forward-out", str(fwd), "--backward-out", str(bwd)],
            capsys,
        )
        assert code == 0
        assert read_footprint(bwd) == {}  # fixture has no gradient ops
        assert read_footprint(fwd)

    def test_stpf_output(self, workdir, capsys):
        stpf = workdir / "stpf.json"
        code, _, _ = run(
            ["account", str(workdir / "events.jsonl"), str(workdir / "power.csv"),
             "--stdout", "--stpf", str(stpf)],
            capsys,
        )
        assert code == 0
        watts = read_footprint(stpf)
        assert watts and all(v >= 0 for v in watts.values())
        assert any("transformer" in op.segments for op in watts)


class TestSummarizeCommand:
    def test_two_entry_fixture_collapses_to_eight(self, tmp_path, capsys):
        tef_path = tmp_path / "tef.json"
        tef_path.write_text(
            '{"bert/encoder/layer_0/output/dense/MatMul": 5,\n'
            ' "bert/encoder/layer_1/output/dense/MatMul": 3}\n'
        )
        out = tmp_path / "stef.json"
        code, _, _ = run(["summarize", str(tef_path), "-o", str(out)], capsys)
        assert code == 0
        stef = read_footprint(out)
        assert stef == {parse_qtn("bert/encoder/transformer/output/dense/MatMul"): 8.0}

    def test_no_match_is_identity(self, tmp_path, capsys):
        tef_path = tmp_path / "tef.json"
        tef_path.write_text('{"a/X": 1, "b/Y": 2}')
        code, out, _ = run(["summarize", str(tef_path), "--stdout"], capsys)
        assert code == 0
        assert json.loads(out) == {"a/X": 1, "b/Y": 2}

    def test_idempotent_on_own_output(self, workdir, capsys):
        first = workdir / "stef1.json"
        second = workdir / "stef2.json"
        run(["summarize", str(workdir / "expected_tef.json"), "-o", str(first)], capsys)
        run(["summarize", str(first), "-o", str(second)], capsys)
        assert first.read_bytes() == second.read_bytes()

    def test_top_listing_on_stderr(self, workdir, capsys):
        code, _, err = run(
            ["summarize", str(workdir / "expected_tef.json"), "--stdout", "--top", "3"],
            capsys,
        )
        assert code == 0
        assert len([line for line in err.splitlines() if "\t" in line]) == 3


class TestEddCommand:
    def test_dot_output(self, tmp_path, capsys):
        tef_path = tmp_path / "tef.json"
        tef_path.write_text('{"a/X": 1, "a/Y": 3}')
        code, out, _ = run(["edd", str(tef_path), "--stdout", "--format", "dot"], capsys)
        assert code == 0
        assert out.startswith("digraph") and out.rstrip().endswith("}")
        assert out.count(" -> ") == 2

    def test_topology_adds_dashed_edges(self, tmp_path, capsys):
        tef_path = tmp_path / "tef.json"
        tef_path.write_text('{"a/X": 1, "a/Y": 3}')
        topo = tmp_path / "topology.jsonl"
        topo.write_text('{"parent": "a", "from": "X", "to": "Y"}\n')
        code, out, _ = run(
            ["edd", str(tef_path), "--stdout", "--format", "dot",
             "--topology", str(topo)],
            capsys,
        )
        assert code == 0
        assert "[style=dashed];" in out

    def test_percent_labels_sum_to_hundred_per_level(self, workdir, capsys):
        code, out, _ = run(
            ["edd", str(workdir / "expected_tef.json"), "--stdout", "--format", "dot"],
            capsys,
        )
        assert code == 0
        # re-parse labels: group nodes by containment parent, sum percentages
        import re

        labels = {
            m.group(1): float(m.group(2))
            for m in re.finditer(r'"([^"]+)" \[label="[^"]*?([\d.e+-]+)%"', out)
        }
        children = {}
        for m in re.finditer(r'"([^"]+)" -> "([^"]+)";', out):
            children.setdefault(m.group(1), []).append(m.group(2))
        checked = 0
        for parent, kids in children.items():
            total = sum(labels[kid] for kid in kids)
            assert abs(total - 100.0) <= 1e-6
            checked += 1
        assert checked >= 1

    def test_structural_collision_is_exit_2(self, tmp_path, capsys):
        tef_path = tmp_path / "tef.json"
        tef_path.write_text('{"a/X": 1, "a/X/Y": 1}')
        code, _, err = run(["edd", str(tef_path), "--stdout"], capsys)
        assert code == 2
        assert "a/X" in err

    def test_json_output_parses(self, workdir, capsys):
        code, out, _ = run(["edd", str(workdir / "expected_tef.json"), "--stdout"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["kind"] == "composite"


FIXTURE_A = {
    "embed/in": 21, "embed/out": 21, "attention/in": 54, "attention/out": 54,
    "addnorm1/in": 118, "addnorm/out": 118, "feedforward/in": 184,
    "addnorm2/in": 100, "feedforward/out": 200,
}
FIXTURE_B = {
    "embed/in": 15, "embed/out": 15, "attention/in": 23, "attention/out": 23,
    "addnorm1/in": 59, "addnorm/out": 59, "feedforward/in": 92,
    "addnorm2/in": 50, "feedforward/out": 100,
}


class TestCompareCommand:
    def test_half_rate_fixture_prints_similarity(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        a.write_text(json.dumps(FIXTURE_A))
        b.write_text(json.dumps(FIXTURE_B))
        code, _, err = run(["compare", str(a), str(b)], capsys)
        assert code == 0
        value = float(err.split()[1])
        assert abs(value - 0.9958) <= 1e-4

    def test_self_compare(self, tmp_path, capsys):
        a = tmp_path / "a.json"
        a.write_text(json.dumps(FIXTURE_A))
        code, _, err = run(["compare", str(a), str(a)], capsys)
        assert code == 0 and err.split()[1] == "1"
        code, _, err = run(["compare", str(a), str(a), "--metric", "med"], capsys)
        assert code == 0 and err.split()[1] == "0"

    def test_json_result_artifact(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        a.write_text(json.dumps(FIXTURE_A))
        b.write_text(json.dumps(FIXTURE_B))
        code, out, _ = run(["compare", str(a), str(b), "--stdout"], capsys)
        payload = json.loads(out)
        assert payload["metric"] == "pcc" and payload["n_keys"] == 9
        assert abs(payload["value"] - 0.9958) <= 1e-4

    def test_matrix_mode(self, tmp_path, capsys):
        directory = tmp_path / "footprints"
        directory.mkdir()
        for i in range(3):
            (directory / f"run{i}.json").write_text(
                json.dumps({k: v * (1 + 0.1 * i) for k, v in FIXTURE_A.items()})
            )
        out = tmp_path / "matrix.csv"
        code, _, _ = run(
            ["compare", "--matrix", str(directory), "--metric", "pcc", "-o", str(out)],
            capsys,
        )
        assert code == 0
        with open(out, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["", "run0", "run1", "run2"]
        assert len(rows) == 4 and all(len(row) == 4 for row in rows)


class TestPrecisionCommand:
    def test_asss_base_period_is_one(self, workdir, capsys):
        out = workdir / "asss.csv"
        code, _, _ = run(
            ["precision", "--mode", "asss",
             "--events", str(workdir / "events.jsonl"),
             "--power", str(workdir / "power.csv"),
             "--base-period", "50", "--periods", "50,100,200",
             "-o", str(out)],
            capsys,
        )
        assert code == 0
        with open(out, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["period", "pcc"]
        assert rows[1] == ["50", "1"]
        assert len(rows) == 4

    def test_assw_identical_inputs_all_one(self, workdir, tmp_path, capsys):
        stef = workdir / "stef.json"
        run(["summarize", str(workdir / "expected_tef.json"), "-o", str(stef)], capsys)
        out = tmp_path / "assw.csv"
        code, _, _ = run(
            ["precision", "--mode", "assw", "--stefs", str(stef), str(stef), str(stef),
             "-o", str(out)],
            capsys,
        )
        assert code == 0
        with open(out, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["n", "pcc"]
        assert [row[1] for row in rows[1:]] == ["1", "1", "1"]


class TestEntryPoint:
    def test_installed_console_script(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(SPEC))
        result = subprocess.run(
            [sys.executable, "-m", "jouletrace.cli", "synth", str(spec_path),
             "--outdir", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "events.jsonl").exists()

    def test_no_traceback_on_malformed_input(self, tmp_path):
        bad = tmp_path / "events.jsonl"
        bad.write_text("garbage\n")
        power = tmp_path / "power.csv"
        power.write_text("device,ts,watts\ncpu:0,0,1\n")
        result = subprocess.run(
            [sys.executable, "-m", "jouletrace.cli", "account", str(bad), str(power),
             "--stdout"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1
        assert "Traceback" not in result.stderr
