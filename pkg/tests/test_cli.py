import json

from almabdc.harness.cli import main


def test_reproduce_list(capsys):
    assert main(["reproduce", "--list"]) == 0
    assert "case4" in capsys.readouterr().out


def test_run_writes_tree(tmp_path):
    out = tmp_path / "r"
    assert main(["run", "--case", "4", "--strategy", "almab_ucb,random", "--replicates", "3", "--out", str(out)]) == 0
    for name in ("replicates.csv", "aggregate.json", "config.json", "plots/curves.csv"):
        assert (out / name).exists()
    assert main(["analyze", str(out / "replicates.csv"), "--out", str(out)]) == 0
    assert json.loads((out / "analysis.json").read_text())["groups"]


def test_json_format(tmp_path):
    assert main(["run", "--case", "5", "--strategy", "random", "--replicates", "2",
                 "--format", "json", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "replicates.json").read_text())


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--case", "9", "--out", str(tmp_path)]) == 2
    assert main(["reproduce", "nope"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("case: '4'\nstrategies: [random]\nwhat: 1\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file_exits_4(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 4
    assert main(["analyze", str(tmp_path / "absent.csv")]) == 4


def test_scaling_simulated_and_from_traces(tmp_path, capsys):
    assert main(["scaling", "--k", "1,2,4", "--tasks", "200", "--out", str(tmp_path)]) == 0
    assert "serial fraction" in capsys.readouterr().out
    traces = sorted(str(p) for p in (tmp_path / "traces").glob("*.jsonl"))
    assert len(traces) == 3
    assert main(["scaling", *traces]) == 0
    assert main(["scaling", str(tmp_path / "scaling.csv")]) == 2
