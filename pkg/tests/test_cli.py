import json
import subprocess
import sys

import numpy as np
import pytest

from forests import CHAIN3_PARENTS, DEMO_EDGES, DEMO_CASCADE, PD_PARENTS, forest, random_forest
from recursive_incentive.cli import main
from recursive_incentive.network import cascade_to_text, read_cascade


@pytest.fixture
def graph_file(tmp_path):
    p = tmp_path / "graph.txt"
    p.write_text(DEMO_EDGES)
    return p


@pytest.fixture
def demo_cascade(tmp_path):
    p = tmp_path / "fig1.csv"
    p.write_text(DEMO_CASCADE)
    return p


def write_forest(tmp_path, parents, name):
    p = tmp_path / name
    p.write_text(cascade_to_text(forest(parents)))
    return p


class TestSimulate:
    def test_deterministic(self, tmp_path, graph_file, capsys):
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            code = main(["simulate", "--graph", str(graph_file), "--seeds", "1",
                         "--recruit-probability", "0.8", "--rng-seed", "7", "--output-dir", str(out)])
            assert code == 0
            outputs.append((out / "cascade.csv").read_bytes())
        assert outputs[0] == outputs[1]
        assert "n'=" in capsys.readouterr().out

    def test_config_file_and_override(self, tmp_path, graph_file):
        cfg = tmp_path / "scenario.json"
        cfg.write_text(json.dumps({"graph_path": str(graph_file), "n_seeds": 2,
                                   "rng_seed": 3, "recruit_probability": 0.0}))
        assert main(["simulate", "--config", str(cfg), "--output-dir", str(tmp_path / "o")]) == 0
        f = read_cascade(tmp_path / "o" / "cascade.csv")
        assert len(f) == 2
        assert main(["simulate", "--config", str(cfg), "--recruit-probability", "1",
                     "--output-dir", str(tmp_path / "p")]) == 0
        assert len(read_cascade(tmp_path / "p" / "cascade.csv")) == 9

    def test_missing_graph(self, tmp_path):
        code = main(["simulate", "--graph", str(tmp_path / "nope.txt"), "--seeds", "1",
                     "--rng-seed", "1", "--output-dir", str(tmp_path)])
        assert code == 2

    def test_missing_rng_seed(self, tmp_path, graph_file):
        code = main(["simulate", "--graph", str(graph_file), "--seeds", "1",
                     "--output-dir", str(tmp_path)])
        assert code == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"grpah": "x"}')
        assert main(["simulate", "--config", str(cfg)]) == 1

    def test_seed_outside_graph(self, tmp_path, graph_file):
        assert main(["simulate", "--graph", str(graph_file), "--seeds", "42",
                     "--rng-seed", "1", "--output-dir", str(tmp_path)]) == 1

    def test_replicates(self, tmp_path, graph_file):
        out = tmp_path / "reps"
        assert main(["simulate", "--graph", str(graph_file), "--seeds", "1",
                     "--recruit-probability", "0.5", "--rng-seed", "5", "--replicates", "3",
                     "--output-dir", str(out)]) == 0
        agg = json.loads((out / "aggregate.json").read_text())
        assert [r["rng_seed"] for r in agg["replicates"]] == [5, 6, 7]
        assert all((out / f"cascade_r{i:03d}.csv").exists() for i in range(3))

    def test_parallel_matches_serial(self, tmp_path, graph_file):
        for workers in ("1", "2"):
            assert main(["simulate", "--graph", str(graph_file), "--seeds", "1",
                         "--recruit-probability", "0.5", "--rng-seed", "5", "--replicates", "3",
                         "--workers", workers, "--output-dir", str(tmp_path / workers)]) == 0
        for i in range(3):
            name = f"cascade_r{i:03d}.csv"
            assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


class TestSettle:
    def test_worked_example(self, demo_cascade, tmp_path):
        out = tmp_path / "ledger.json"
        assert main(["settle", str(demo_cascade), "--finders", "6,4", "--tasks", "2",
                     "--budget", "8000", "-o", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["payments"] == {"1": "750/1", "2": "500/1", "3": "1000/1",
                                    "4": "2000/1", "6": "2000/1", "8": "1000/1"}
        assert data["surplus"] == "750/1"
        assert data["task_budget"] == "4000/1"
        assert data["budget_check"]["satisfied"]

    def test_unknown_finder(self, demo_cascade):
        assert main(["settle", str(demo_cascade), "--finders", "99", "--tasks", "2",
                     "--budget", "8000"]) == 2

    def test_sample_needs_seed(self, demo_cascade):
        assert main(["settle", str(demo_cascade), "--sample"]) == 1

    def test_sample(self, demo_cascade, capsys):
        assert main(["settle", str(demo_cascade), "--sample", "--rng-seed", "3"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert len(data["sequences"]) == 10

    def test_bad_budget(self, demo_cascade):
        assert main(["settle", str(demo_cascade), "--budget", "lots"]) == 1
        assert main(["settle", str(demo_cascade), "--budget", "-5"]) == 1


class TestVerify:
    def test_prisoners_dilemma(self, tmp_path, capsys):
        p = write_forest(tmp_path, PD_PARENTS, "pd.csv")
        assert main(["verify", str(p)]) == 0
        assert "all-recruit is Nash: yes" in capsys.readouterr().out
        assert main(["verify", str(p), "--mode", "oracle"]) == 0
        assert "pure Nash profiles found: 1" in capsys.readouterr().out

    def test_three_chain(self, tmp_path, capsys):
        p = write_forest(tmp_path, CHAIN3_PARENTS, "chain.csv")
        assert main(["verify", str(p)]) == 0
        out = capsys.readouterr().out
        assert "all-recruit is Nash: no; deviators: 1 (root)" in out
        assert "(indifferent)" in out

    def test_json_and_selective(self, tmp_path, capsys):
        p = write_forest(tmp_path, CHAIN3_PARENTS, "chain.csv")
        assert main(["verify", str(p), "--mode", "selective", "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["is_nash"] is False and data["deviators"] == [1]
        assert main(["verify", str(p), "--mode", "oracle-selective", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["is_nash"] is False

    def test_cap(self, tmp_path):
        p = write_forest(tmp_path, {i: (None if i == 0 else i - 1) for i in range(30)}, "long.csv")
        assert main(["verify", str(p), "--mode", "oracle", "--cap", "1000"]) == 3

    def test_empty(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("child,parent,signup_time\n")
        assert main(["verify", str(p)]) == 2


class TestAnalyze:
    def test_outputs(self, demo_cascade, tmp_path):
        out = tmp_path / "analysis"
        assert main(["analyze", str(demo_cascade), "--output-dir", str(out), "--bin-width", "20"]) == 0
        report = json.loads((out / "stats.json").read_text())
        assert report["stats"]["max_depth"] == 4
        assert report["power_law_size"] is None and len(report["notices"]) == 2
        rows = (out / "timeline.csv").read_text().splitlines()
        assert rows[0] == "bin_start,signups,cumulative"
        assert rows[-1].endswith(",7")
        assert (out / "tree_size_loglog.csv").read_text().splitlines()[1] == "7,1,1.0"
        assert len((out / "intersignup_ccdf.csv").read_text().splitlines()) == 6

    def test_fits_when_data_suffices(self, tmp_path, graph_file):
        sim = tmp_path / "sim"
        edges = "\n".join(f"0 {i}" for i in range(1, 60))
        (tmp_path / "star.txt").write_text(edges)
        assert main(["simulate", "--graph", str(tmp_path / "star.txt"), "--seeds", "0",
                     "--rng-seed", "1", "--output-dir", str(sim)]) == 0
        assert main(["analyze", str(sim / "cascade.csv"), "--output-dir", str(tmp_path / "a")]) == 0
        report = json.loads((tmp_path / "a" / "stats.json").read_text())
        assert report["exponential_delay"]["n"] == 59

    def test_empty_cascade(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("child,parent,signup_time\n")
        assert main(["analyze", str(p), "--output-dir", str(tmp_path / "a")]) == 0

    def test_corrupt_cascade(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("child,parent,signup_time\n1,,5\n2,1,3\n")
        assert main(["analyze", str(p), "--output-dir", str(tmp_path)]) == 2


class TestMonotonicity:
    def test_crafted(self, tmp_path, capsys):
        g = tmp_path / "crafted.txt"
        g.write_text("0 2\n1 2\n2 3\n0 3\n1 4\n3 4\n")
        out = tmp_path / "mono.json"
        assert main(["monotonicity", "--graph", str(g), "--seeds", "0,1", "--signal-threshold", "2",
                     "--rng-seed", "0", "-o", str(out)]) == 0
        assert "monotonic: no" in capsys.readouterr().out
        assert json.loads(out.read_text())["monotonicity"]["violations"]

    def test_equilibrium(self, graph_file, capsys):
        assert main(["monotonicity", "--graph", str(graph_file), "--seeds", "1,7",
                     "--rng-seed", "0", "--equilibrium"]) == 0
        out = capsys.readouterr().out
        assert "monotonic: yes" in out and "all-recruit equilibrium:" in out


def test_module_entry_point(tmp_path):
    p = tmp_path / "pd.csv"
    p.write_text(cascade_to_text(forest(PD_PARENTS)))
    res = subprocess.run([sys.executable, "-m", "recursive_incentive", "verify", str(p)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "yes" in res.stdout


def test_full_spread_is_one_tree(tmp_path, graph_file, capsys):
    assert main(["simulate", "--graph", str(graph_file), "--seeds", "1", "--rng-seed", "0",
                 "--output-dir", str(tmp_path)]) == 0
    assert "n'=9 trees=1" in capsys.readouterr().out


def test_pipeline_round_trip(tmp_path, capsys):
    # a path of 10^4 agents with a second chain hanging off every 50th node
    edges = [(i, i + 1) for i in range(9_999)] + [(i, 10_000 + i) for i in range(0, 9_999, 50)]
    g = tmp_path / "big.txt"
    g.write_text("\n".join(f"{u} {v}" for u, v in edges))
    sim = tmp_path / "sim"
    assert main(["simulate", "--graph", str(g), "--seeds", "0,5000", "--rng-seed", "3",
                 "--output-dir", str(sim)]) == 0
    cascade = sim / "cascade.csv"
    f = read_cascade(cascade)
    assert len(f) == 10_200 and cascade_to_text(f) == cascade.read_text()

    out = tmp_path / "analysis"
    assert main(["analyze", str(cascade), "--output-dir", str(out)]) == 0
    names = {"stats.json", "tree_size_loglog.csv", "intersignup_ccdf.csv", "timeline.csv"}
    assert names <= {p.name for p in out.iterdir()}
    stats = json.loads((out / "stats.json").read_text())["stats"]
    assert stats["node_count"] == 10_200 and stats["tree_count"] == 2

    capsys.readouterr()
    assert main(["settle", str(cascade), "--sample", "--rng-seed", "1"]) == 0
    ledger = json.loads(capsys.readouterr().out)
    assert ledger["task_budget"] == "4000/1"
    assert all(seq["chain"][0] in (0, 5000) for seq in ledger["sequences"])
    assert ledger["budget_check"]["satisfied"]


def test_verify_balanced_random_forest(tmp_path, capsys):
    f = random_forest(np.random.default_rng(1), 30, 15)
    p = tmp_path / "f.csv"
    p.write_text(cascade_to_text(f))
    assert main(["verify", str(p)]) == 0
    assert "all-recruit is Nash: yes" in capsys.readouterr().out
