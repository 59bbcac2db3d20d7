import csv
import json
import subprocess
import sys

import pytest

from securecache.cli import ExperimentConfig, main, run_experiment
from securecache.core import ConfigurationError, DeliveryPayload


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestRate:
    def test_centralized_three_users(self, capsys):
        code, out, _ = run(capsys, "rate", "--scheme", "centralized", "--n", "3", "--k", "3", "--m", "1.6667")
        assert code == 0
        assert json.loads(out)["R_secure"] == pytest.approx(1.0, abs=1e-3)

    def test_decentralized_three_users(self, capsys):
        code, out, _ = run(capsys, "rate", "--scheme", "decentralized", "--n", "3", "--k", "3", "--m", "1.6667")
        assert json.loads(out)["R_secure"] == pytest.approx(38 / 27, abs=1e-3)

    def test_full_memory(self, capsys):
        _, out, _ = run(capsys, "rate", "--scheme", "centralized", "--n", "5", "--k", "5", "--m", "5")
        assert json.loads(out)["R_secure"] == 0

    def test_fraction_and_t(self, capsys):
        _, a, _ = run(capsys, "rate", "--n", "3", "--k", "3", "--m", "5/3")
        _, b, _ = run(capsys, "rate", "--n", "3", "--k", "3", "--t", "1")
        assert json.loads(a)["R_secure"] == json.loads(b)["R_secure"] == pytest.approx(1)

    def test_infeasible(self, capsys):
        code, out, err = run(capsys, "rate", "--n", "3", "--k", "3", "--m", "0.5")
        assert code != 0 and out == ""
        assert "M < 1 infeasible under secure delivery" in err


class TestSimulate:
    def test_two_user_system(self, capsys):
        code, out, _ = run(
            capsys, "simulate", "--scheme", "centralized", "--n", "2", "--k", "2",
            "--t", "1", "--f", "128", "--demand", "1,2",
        )
        rep = json.loads(out)
        assert code == 0 and rep["passed"]
        assert rep["measured_rate"] == 0.5
        assert rep["checks"]["decode"]["passed"]

    def test_decentralized_three_users(self, capsys):
        code, out, _ = run(
            capsys, "simulate", "--scheme", "decentralized", "--n", "3", "--k", "3",
            "--m", "5/3", "--f", "300000", "--check", "decode,rate,memory",
        )
        rep = json.loads(out)
        assert code == 0
        assert abs(rep["measured_rate"] / (38 / 27) - 1) <= 0.05

    def test_secrecy_check(self, capsys):
        code, out, _ = run(
            capsys, "simulate", "--scheme", "centralized", "--n", "2", "--k", "2",
            "--t", "1", "--f", "2", "--check", "secrecy",
        )
        sec = json.loads(out)["checks"]["secrecy"]
        assert code == 0
        assert sec["method"] == "exhaustive" and sec["mutual_information_bits"] == 0

    def test_config_file_and_dump(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scheme": "centralized", "N": 3, "K": 3, "F": 30, "t": 1, "seed": 4}))
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        d1, d2 = tmp_path / "a.bin", tmp_path / "b.bin"
        assert main(["simulate", str(cfg), "--out", str(out1), "--dump", str(d1)]) == 0
        assert main(["simulate", str(cfg), "--out", str(out2), "--dump", str(d2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert d1.read_bytes() == d2.read_bytes()
        payload = DeliveryPayload.from_bytes(d1.read_bytes())
        assert payload.total_bits == 30

    def test_env_seed(self, monkeypatch, capsys):
        args = ["simulate", "--scheme", "centralized", "--n", "2", "--k", "2", "--t", "1", "--f", "8"]
        monkeypatch.setenv("SECURECACHE_SEED", "17")
        _, out, _ = run(capsys, *args)
        assert json.loads(out)["params"]["seed"] == 17
        _, out, _ = run(capsys, *args, "--seed", "3")
        assert json.loads(out)["params"]["seed"] == 3

    def test_failing_check_exits_nonzero(self, capsys):
        # F = 400 is too small for the decentralized rate to concentrate within 5%.
        code, out, err = run(
            capsys, "simulate", "--scheme", "decentralized", "--n", "4", "--k", "4",
            "--m", "1.3", "--f", "40", "--check", "rate",
        )
        rep = json.loads(out)
        assert (code == 0) == rep["checks"]["rate"]["passed"]
        if code:
            assert "check failed: rate" in err

    def test_bad_config(self, capsys):
        code, _, err = run(capsys, "simulate", "--scheme", "centralized", "--n", "3", "--k", "3", "--f", "4", "--t", "1")
        assert code == 2 and "divisible" in err

    def test_default_demand_is_worst_case(self):
        cfg = ExperimentConfig.from_dict({"scheme": "centralized", "N": 2, "K": 4, "F": 8, "t": 1})
        assert cfg.resolved_demand() == (1, 2, 1, 2)
        rep = run_experiment(cfg)
        assert rep["demand"] == [1, 2, 1, 2] and rep["passed"]


class TestConfig:
    def test_field_errors(self):
        with pytest.raises(ConfigurationError, match="'N'"):
            ExperimentConfig.from_dict({"scheme": "centralized", "K": 2, "F": 2, "t": 1})
        with pytest.raises(ConfigurationError, match="'t' and 'M'"):
            ExperimentConfig.from_dict({"scheme": "centralized", "N": 2, "K": 2, "F": 2})
        with pytest.raises(ConfigurationError, match="checks"):
            ExperimentConfig.from_dict({"scheme": "centralized", "N": 2, "K": 2, "F": 2, "t": 1, "checks": ["speed"]})
        with pytest.raises(ConfigurationError, match="unknown"):
            ExperimentConfig.from_dict({"scheme": "centralized", "N": 2, "K": 2, "F": 2, "t": 1, "x": 1})
        with pytest.raises(ConfigurationError, match="'F'"):
            ExperimentConfig.from_dict({"scheme": "centralized", "N": 2, "K": 2, "F": 2.5, "t": 1})


class TestSweeps:
    def test_keymem(self, capsys):
        code, out, _ = run(capsys, "keymem", "--n", "5", "--k", "5")
        rows = list(csv.DictReader(out.splitlines()))
        assert code == 0 and len(rows) == 6
        assert [r["regime"] for r in rows][-2:] == ["regime 5", "no keys"]
        assert rows[4]["num_keys"] == "1"

    def test_tradeoff(self, capsys):
        code, out, _ = run(capsys, "tradeoff", "--n", "20", "--k", "20")
        rows = list(csv.DictReader(out.splitlines()))
        for scheme in ("centralized", "decentralized"):
            r = [float(x["R_secure"]) for x in rows if x["scheme"] == scheme]
            assert all(a >= b - 1e-12 for a, b in zip(r, r[1:]))

    def test_gap_small(self, capsys):
        code, out, err = run(capsys, "gap", "--n-max", "20", "--k-max", "20")
        rows = list(csv.DictReader(out.splitlines()))
        assert code == 0
        assert max(float(r["max_gap"]) for r in rows) <= 17
        assert json.loads(err)["centralized"]["certified"]

    def test_unwritable(self, capsys):
        code, _, err = run(capsys, "keymem", "--n", "5", "--k", "5", "--out", "/nonexistent/dir/x.csv")
        assert code != 0 and "cannot write" in err


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "securecache", "rate", "--n", "2", "--k", "2", "--m", "1.5"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(res.stdout)["R_secure"] == 0.5
