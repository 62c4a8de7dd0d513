import json
from pathlib import Path

import pytest

from wavec.cli import main

FIG = Path(__file__).parent / "fig_ordering.csv"
MUTANT = Path(__file__).parent / "data" / "mut_wf_read_overtakes.csv"


def test_build_writes_versioned_artifacts(tmp_path):
    assert main(["build", "ordering", "--out", str(tmp_path)]) == 0
    for kind in ("ir", "sched", "graph", "resources"):
        d = json.loads((tmp_path / f"ordering.{kind}.json").read_text())
        assert d["schema"] == 1


def test_build_accepts_a_source_file(tmp_path):
    src = tmp_path / "tiny.wf"
    src.write_text("uint32 x; void main() { x = x + 1; }")
    assert main(["build", str(src), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tiny.graph.json").exists()


def test_out_dir_defaults_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("WAVEC_OUT", str(tmp_path / "env"))
    assert main(["build", "mutex"]) == 0
    assert (tmp_path / "env" / "mutex.ir.json").exists()


def test_sim_writes_trace_and_report(tmp_path, capsys):
    argv = ["sim", "static", "--const", "N=16", "--const", "SIZE=16", "--dataset", "conflict-free",
            "--out", str(tmp_path), "--timeline", "vars=hist"]
    assert main(argv) == 0
    report = json.loads((tmp_path / "static.report.json").read_text())
    assert report["schema"] == 1 and report["cycles"] > 16 * 8
    assert (tmp_path / "static.trace.jsonl").read_text().count("\n") > 0
    assert "hist" in capsys.readouterr().out


def test_sim_with_random_stalls_is_reproducible(tmp_path):
    runs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["sim", "ordering", "--stall", "random", "--seed", "4", "--out", str(d)]) == 0
        runs.append((d / "ordering.trace.jsonl").read_text())
    assert runs[0] == runs[1]


def test_sim_reads_a_dataset_file(tmp_path):
    data = tmp_path / "d.json"
    assert main(["gen-data", "random", "--n", "16", "--size", "16", "--seed", "2", "-o", str(data)]) == 0
    assert main(["sim", "dynamic", "--const", "N=16", "--const", "SIZE=16", "--data", str(data),
                 "--out", str(tmp_path)]) == 0


def test_check_accepts_the_figure_trace(capsys):
    assert main(["check", str(FIG), "--program", "ordering"]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")


def test_check_rejects_a_mutated_trace(capsys):
    assert main(["check", str(MUTANT), "--program", "ordering"]) == 1
    assert "WavefrontViolation" in capsys.readouterr().out


def test_check_round_trips_a_simulator_trace(tmp_path):
    assert main(["sim", "cond_order", "--out", str(tmp_path)]) == 0
    assert main(["check", str(tmp_path / "cond_order.trace.jsonl"), "--program", "cond_order"]) == 0


def test_bench_prints_one_row_per_variant(capsys):
    assert main(["bench", "--variants", "static", "replicated", "--const", "N=32", "--const", "SIZE=16", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r["variant"] for r in rows] == ["static", "replicated"]
    assert all(r["check_ok"] for r in rows)


@pytest.mark.parametrize("what", ["ir", "sched", "graph", "resources"])
def test_dump_json(what, capsys):
    assert main(["dump", what, "ordering"]) == 0
    assert json.loads(capsys.readouterr().out)["schema"] == 1


def test_dump_dot_and_timeline(capsys):
    assert main(["dump", "dot", "ordering"]) == 0
    assert capsys.readouterr().out.startswith("digraph")
    assert main(["dump", "timeline", "ordering", "--timeline", "sites=0,1"]) == 0
    assert "s0" in capsys.readouterr().out


def test_logic_depth_flag_changes_the_schedule(capsys):
    main(["dump", "resources", "replicated", "-D", "1"])
    deep = json.loads(capsys.readouterr().out)["stage_count"]
    main(["dump", "resources", "replicated", "-D", "12"])
    assert deep > json.loads(capsys.readouterr().out)["stage_count"]


def test_config_file_is_used_and_flags_override_it(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": 1, "logic_depth": 1}))
    main(["dump", "resources", "replicated", "--config", str(cfg)])
    from_file = json.loads(capsys.readouterr().out)["stage_count"]
    main(["dump", "resources", "replicated", "--config", str(cfg), "-D", "12"])
    flagged = json.loads(capsys.readouterr().out)["stage_count"]
    main(["dump", "resources", "replicated", "-D", "1"])
    assert from_file == json.loads(capsys.readouterr().out)["stage_count"] > flagged


def test_missing_const_fails_with_exit_1(tmp_path, capsys):
    p = tmp_path / "p.wf"
    p.write_text("uint32[N] a; void main() { }")
    assert main(["build", str(p)]) == 1
    assert "ElabError" in capsys.readouterr().err


def test_zero_length_array_fails_with_exit_1():
    assert main(["build", "static", "--const", "N=0"]) == 1


def test_unknown_program_fails_with_exit_1():
    assert main(["build", "no_such_thing"]) == 1


@pytest.mark.parametrize("src,code,extra", [
    ("bool f; uint32 x; void main() { pipelined_for(2, [](uint32 t) { wait_for(f); x = t; }); }", 2, []),
    ("uint32 x; uint32 y; void main() { pipelined_for(3, [](uint32 t) "
     "{ uint32 r = y; x = r; uint32 q = x; y = q; x = q + 1; }); }", 3, []),
    ("uint32 x; void main() { pipelined_for(1000, [](uint32 t) { x = t; }); }", 4, ["--max-cycles", "100"]),
])
def test_simulator_errors_map_to_exit_codes(tmp_path, src, code, extra):
    p = tmp_path / "p.wf"
    p.write_text(src)
    assert main(["sim", str(p), "--out", str(tmp_path), *extra]) == code
