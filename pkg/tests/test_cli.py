import json
import shutil
import subprocess
import sys

import pytest

from ltlabel.abstraction import TransitionSystem
from ltlabel.cli import EXIT_BAD_PREFIX, EXIT_IO, EXIT_NO_PATH, EXIT_OK, EXIT_PARSE, main
from ltlabel.labeling import LabelMatrix
from ltlabel.planner import split_lane_example


@pytest.fixture
def trace(tmp_path):
    def write(lines):
        p = tmp_path / "trace.txt"
        p.write_text("\n".join(lines) + "\n")
        return str(p)

    return write


class TestMonitor:
    def test_verdicts(self, trace, capsys):
        f = "G (split_lane -> X !split_lane)"
        assert main(["monitor", f, trace(["", "split_lane", ""])]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "Undetermined"
        assert main(["monitor", f, trace(["split_lane", "split_lane"])]) == EXIT_BAD_PREFIX
        assert capsys.readouterr().out.strip() == "BadPrefix 1"

    def test_props_order_and_unknown_name(self, trace, capsys):
        assert main(["monitor", "G !b", trace(["a", "a,b"]), "--props", "a,b"]) == EXIT_BAD_PREFIX
        assert capsys.readouterr().out.strip() == "BadPrefix 1"
        assert main(["monitor", "G !b", trace(["c"]), "--props", "a,b"]) == EXIT_IO

    def test_parse_error(self, trace, capsys):
        assert main(["monitor", "G (a ->", trace(["a"])]) == EXIT_PARSE
        assert "error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["monitor", "G a", str(tmp_path / "none.txt")]) == EXIT_IO


def test_build_then_label(tmp_path, capsys):
    sys_path = tmp_path / "s.ltts"
    assert main(["build", "--seed", "3", "--edges", "200", "--out", str(sys_path)]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["edges"] == 200 and info["max_endpoint_error"] <= 1e-3
    assert TransitionSystem.load(sys_path).n_edges == 200

    out = tmp_path / "l.csv"
    assert main(["label", "--system", str(sys_path), "--out", str(out), "--depth", "15"]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert set(info["labeled"]) == {"moving_vehicle", "not_nominal_lane"}
    L = LabelMatrix.from_csv(out.read_text(), ["moving_vehicle", "not_nominal_lane"])
    assert L.shape == (200, 2)
    assert L.data[:, 1].sum() == info["labeled"]["not_nominal_lane"]

    assert main(["label", "--system", str(sys_path), "--out", str(out), "--depth", "15",
                 "--box", "west:-64,0,-64,64,0,8"]) == EXIT_OK
    assert set(json.loads(capsys.readouterr().out)["labeled"]) == {"west"}


def test_build_requires_seed(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["build"])
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "edges": 50, "out": str(tmp_path / "a.ltts")}))
    assert main(["build", "--config", str(cfg), "--edges", "80"]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["edges"] == 80 and info["out"].endswith("a.ltts")
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["build", "--config", str(cfg), "--seed", "1"]) == EXIT_IO


class TestPlan:
    def test_demo(self, tmp_path, capsys):
        dot = tmp_path / "p.dot"
        assert main(["plan", "--demo", "--dot", str(dot)]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert [s["v"] for s in doc["states"]] == [0, 1, 4, 5]
        assert [s["q"] for s in doc["states"]] == [0, 1, 0, 0]
        assert dot.read_text().startswith("digraph")

    def test_graph_file_and_no_path(self, tmp_path, capsys):
        graph, *_ = split_lane_example()
        g = tmp_path / "g.json"
        g.write_text(json.dumps(graph.to_json_dict()))
        assert main(["plan", "--graph", str(g), "--goal", "5", "--formula", "G split_lane"]) == EXIT_NO_PATH
        assert json.loads(capsys.readouterr().out) == {"path": None}
        assert main(["plan", "--graph", str(g), "--goal", "5"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["cost"] == 0.0
        assert main(["plan", "--graph", str(g)]) == EXIT_IO


def test_bernoulli(capsys):
    assert main(["bernoulli", "0.5", "0.1", "--trials", "5000"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "prediction 20.0" in out
    assert main(["bernoulli", "0.5", "2.0"]) == EXIT_IO


def test_bench(tmp_path, capsys):
    out = tmp_path / "b.csv"
    args = ["bench", "--seed", "1", "--sizes", "100,200,400", "--queries", "2", "--depth", "15", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert out.read_text().splitlines()[0].startswith("size,proposition,mean_ms")
    assert "max relative residual" in capsys.readouterr().out


def test_console_script():
    exe = shutil.which("ltlabel")
    cmd = [exe] if exe else [sys.executable, "-m", "ltlabel.cli"]
    r = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for name in ("monitor", "build", "label", "plan", "bench", "bernoulli"):
        assert name in r.stdout
