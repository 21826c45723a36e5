import subprocess
import sys

import pytest
import yaml

from promiselab.cli import analyze_model, main
from promiselab.document import bundled_names, bundled_path, load_model

from conftest import SCENARIOS


def model(name):
    return str(bundled_path(name))


def scenario(name):
    return str(SCENARIOS / f"{name}.yaml")


class TestValidate:
    @pytest.mark.parametrize("name", bundled_names())
    def test_bundled(self, name, capsys):
        assert main(["validate", model(name)]) == 0
        assert capsys.readouterr().out.startswith("ok:")

    def test_with_scenario(self, capsys):
        assert main(["validate", model("cond1"), "--scenario", scenario("cond1_kill_d")]) == 0
        assert capsys.readouterr().out.count("ok:") == 2

    def test_invalid_model(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("version: 1\nagents: [{id: S}]\npromises:\n  - {promiser: S, promisees: [R], polarity: '+', body: [s]}\n")
        assert main(["validate", str(bad)]) == 1
        err = capsys.readouterr().err
        assert f"{bad}:4:" in err and "S+s>R" in err

    def test_scenario_mismatch(self, capsys):
        assert main(["validate", model("cond1"), "--scenario", scenario("advret_sync")]) == 1

    def test_missing_file(self, capsys):
        assert main(["validate", "/nonexistent/model.yaml"]) == 2

    def test_bad_usage(self, capsys):
        assert main(["validate"]) == 2
        assert main(["frobnicate"]) == 2


class TestAnalyze:
    def test_partition_scale(self, tmp_path, capsys):
        out = tmp_path / "r.yaml"
        assert main(["analyze", model("partition"), "--scale", "entity", "--out", str(out)]) == 0
        report = yaml.safe_load(out.read_text())
        assert report["scales"]["0"]["M"]["class"] == "weakly_stateless"
        assert report["scales"]["entity"]["entity"] == {
            "class": "stateful",
            "members": ["K", "M"],
            "locality": "non-local",
        }
        assert "entity:" in capsys.readouterr().out

    def test_cond1_spof(self, capsys):
        assert main(["analyze", model("cond1")]) == 0
        assert "single points of failure: D, S" in capsys.readouterr().out

    def test_invariance_bundle(self):
        r = analyze_model(load_model(bundled_path("invariance")), ["bundle"])
        assert r["invariance"]["bundle"]["invariant"] is True
        assert r["invariance"]["A"]["invariant"] is False

    def test_unknown_partition(self, capsys):
        assert main(["analyze", model("cond1"), "--scale", "nope"]) == 1
        assert "nope" in capsys.readouterr().err

    def test_empty_model(self, tmp_path, capsys):
        empty = tmp_path / "empty.yaml"
        empty.write_text("version: 1\nagents: []\n")
        assert main(["analyze", str(empty)]) == 0
        assert "bindings: 0" in capsys.readouterr().out


class TestSimulate:
    def test_seed_required(self, capsys):
        assert main(["simulate", model("cond1"), scenario("cond1_baseline")]) == 2
        assert "seed" in capsys.readouterr().err

    def test_deterministic_traces(self, tmp_path, capsys):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for path in (a, b):
            assert main(["simulate", model("cond3"), scenario("cond3_kill_d1"), "--seed", "7", "--trace", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_bytes()) > 0

    def test_seed_range_with_jobs(self, tmp_path, capsys):
        pattern = str(tmp_path / "t{seed}.jsonl")
        args = ["simulate", model("cond1"), scenario("cond1_baseline"), "--seeds", "1..3", "--trace", pattern]
        assert main(args + ["--jobs", "2"]) == 0
        parallel = [(tmp_path / f"t{s}.jsonl").read_bytes() for s in (1, 2, 3)]
        assert main(args) == 0
        serial = [(tmp_path / f"t{s}.jsonl").read_bytes() for s in (1, 2, 3)]
        assert parallel == serial
        assert len(set(serial)) == 3

    def test_kill_summary(self, tmp_path, capsys):
        out = tmp_path / "s.yaml"
        assert main(["simulate", model("cond1"), scenario("cond1_kill_d"), "--seed", "1", "--out", str(out)]) == 0
        s = yaml.safe_load(out.read_text())
        assert s["kept"]["S+s|d>R"] == 0

    def test_transaction_summary(self, tmp_path, capsys):
        out = tmp_path / "s.yaml"
        assert main(["simulate", model("transaction"), scenario("transaction_t3"), "--seed", "3", "--out", str(out)]) == 0
        t = yaml.safe_load(out.read_text())["transaction"]
        assert t["status"] == "kept"
        assert t["replay_equivalent"] and t["matches_oracle"]
        assert "matches_oracle=true" in capsys.readouterr().out

    def test_bad_seed_range(self, capsys):
        assert main(["simulate", model("cond1"), scenario("cond1_baseline"), "--seeds", "5..2"]) == 2


class TestMarkov:
    def _trace(self, tmp_path, steps):
        path = tmp_path / "chain.jsonl"
        args = ["simulate", model("chain"), scenario("chain_order1"), "--seed", "0", "--trace", str(path)]
        assert main(args + ["--steps", str(steps)]) == 0
        return str(path)

    def test_order_one(self, tmp_path, capsys):
        path = self._trace(tmp_path, 20000)
        out = tmp_path / "m.yaml"
        assert main(["markov", path, "--agent", "M", "--variable", "y", "--out", str(out)]) == 0
        r = yaml.safe_load(out.read_text())
        assert r["order"] == 1
        assert "order: 1" in capsys.readouterr().out

    def test_declared_history_cross_check(self, tmp_path, capsys):
        path = self._trace(tmp_path, 20000)
        out = tmp_path / "m.yaml"
        args = ["markov", path, "--agent", "M", "--variable", "y", "--model", model("chain"), "--out", str(out)]
        assert main(args) == 0
        assert "declared history: 1 (consistent" in capsys.readouterr().out
        r = yaml.safe_load(out.read_text())
        assert r["declared_history"] == 1 and r["consistent"] is True

    def test_cross_check_mismatch(self, tmp_path, capsys):
        path = self._trace(tmp_path, 20000)
        other = tmp_path / "chain2.yaml"
        other.write_text(open(model("chain")).read().replace("history: 1", "history: 2"))
        assert main(["markov", path, "--agent", "M", "--variable", "y", "--model", str(other)]) == 0
        assert "MISMATCH" in capsys.readouterr().out

    def test_cross_check_unknown_agent(self, tmp_path, capsys):
        path = self._trace(tmp_path, 20000)
        assert main(["markov", path, "--agent", "M", "--variable", "y", "--model", model("cond1")]) == 1

    def test_short_trace(self, tmp_path, capsys):
        path = self._trace(tmp_path, 50)
        assert main(["markov", path, "--agent", "M", "--variable", "y"]) == 1
        assert "insufficient data" in capsys.readouterr().err

    def test_constant_variable(self, tmp_path, capsys):
        path = tmp_path / "const.jsonl"
        lines = [
            f'{{"global_step":{i},"observer":"M","observer_proper_time":{i + 1},"kind":"state","message_id":"","body_label":"y","payload":"a"}}'
            for i in range(200)
        ]
        path.write_text("\n".join(lines) + "\n")
        assert main(["markov", str(path), "--agent", "M", "--variable", "y", "--max-order", "1"]) == 0
        assert "order: 0" in capsys.readouterr().out

    def test_malformed_trace(self, tmp_path, capsys):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"global_step": 1}\n')
        assert main(["markov", str(path), "--agent", "M", "--variable", "y"]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "promiselab.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
