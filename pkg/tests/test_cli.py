import csv
import json

import numpy as np
import pytest

from ddsbm import bias_rmse, make_case, read_edgelist
from ddsbm.cli import ExperimentConfig, main, parse_config_text, UsageError


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report_dict(text):
    return dict(line.split(" ", 1) for line in text.strip().splitlines())


@pytest.fixture
def case1_file(tmp_path, capsys):
    run(["generate", "--case", 1, "--k0", 3, "--n", 50, "--replicates", 1, "--seed", 7,
         "--out", tmp_path / "nets"], capsys)
    return tmp_path / "nets" / "network_000.txt"


class TestGenerate:
    def test_byte_identical_across_runs(self, tmp_path, capsys):
        for d in ("a", "b"):
            assert run(["generate", "--replicates", 2, "--seed", 3, "--out", tmp_path / d], capsys)[0] == 0
        for name in ("network_000.txt", "network_001.txt", "manifest.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "network_000.txt").read_bytes() != (tmp_path / "a" / "network_001.txt").read_bytes()

    def test_manifest_and_format(self, case1_file):
        manifest = (case1_file.parent / "manifest.txt").read_text().splitlines()
        i = manifest.index("p0")
        p0 = np.array([[float(v) for v in line.split()] for line in manifest[i + 1:i + 4]])
        assert np.allclose(p0, make_case(1, 3), atol=1e-6)
        z0 = [int(v) for v in next(l for l in manifest if l.startswith("z0 ")).split()[1:]]
        assert z0 == [i % 3 + 1 for i in range(50)]
        assert any(l.startswith("replicate 0 seed ") for l in manifest)
        lines = case1_file.read_text().splitlines()
        assert lines[0] == "n 50"
        pairs = [tuple(map(int, l.split())) for l in lines[1:]]
        assert all(i < j for i, j in pairs) and pairs == sorted(pairs)

    def test_config_file_with_override(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("# desk run\ncase = 2\nk0=2\nn = 20\nreplicates=1\n")
        assert run(["generate", "--config", cfg, "--n", 12, "--out", tmp_path / "o"], capsys)[0] == 0
        assert read_edgelist(tmp_path / "o" / "network_000.txt").n == 12
        assert "case 2" in (tmp_path / "o" / "manifest.txt").read_text()

    def test_invalid_config_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(["generate", "--k0", 5, "--n", 9, "--out", tmp_path], capsys)
        assert code == 1 and "2*k0" in err


class TestFit:
    def test_strong_signal_recovers_three(self, case1_file, capsys):
        code, out, _ = run(["fit", case1_file, "--seed", 2], capsys)
        assert code == 0
        rep = report_dict(out)
        assert rep["k_hat"] == "3"
        assert rep["n"] == "50" and rep["n_keep"] == "10000" and rep["n_burn"] == "5000"
        assert len(rep["partition"].split()) == 50

    def test_same_seed_same_report(self, case1_file, tmp_path, capsys):
        args = ["fit", case1_file, "--keep", 600, "--burn", 200, "--seed", 9]
        first = run(args + ["--out", tmp_path / "r.txt"], capsys)[1]
        assert first == run(args, capsys)[1]
        assert (tmp_path / "r.txt").read_text() == first

    def test_edgeless_network(self, tmp_path, capsys):
        path = tmp_path / "empty.txt"
        path.write_text("n 8\n")
        code, out, _ = run(["fit", path, "--keep", 20000, "--burn", 2000, "--seed", 1], capsys)
        assert code == 0 and report_dict(out)["k_hat"] == "1"

    def test_trace_dump(self, case1_file, tmp_path, capsys):
        trace = tmp_path / "trace.txt"
        run(["fit", case1_file, "--keep", 50, "--burn", 10, "--trace", trace], capsys)
        lines = trace.read_text().splitlines()
        assert len(lines) == 50 and len(lines[-1].split()) == 52
        summary = json.loads((tmp_path / "trace.txt.json").read_text())
        assert summary["n_keep"] == 50 and summary["n_burn"] == 10

    @pytest.mark.parametrize("text,line", [("n 4\n1 2\n3 x\n", 3), ("4\n", 1), ("n 4\n1 9\n", 2)])
    def test_malformed_file(self, tmp_path, capsys, text, line):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        code, _, err = run(["fit", path], capsys)
        assert code == 2 and f"line {line}" in err

    def test_single_node(self, tmp_path, capsys):
        path = tmp_path / "one.txt"
        path.write_text("n 1\n")
        assert run(["fit", path], capsys)[0] == 2

    def test_missing_file_and_bad_flags(self, tmp_path, capsys):
        assert run(["fit", tmp_path / "nope.txt"], capsys)[0] == 1
        with pytest.raises(SystemExit) as info:
            main(["fit"])
        assert info.value.code == 1
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 1


class TestAri:
    def write(self, tmp_path, name, labels):
        p = tmp_path / name
        p.write_text(" ".join(map(str, labels)) + "\n")
        return p

    def test_examples(self, tmp_path, capsys):
        a = self.write(tmp_path, "a", [1, 1, 2, 2])
        b = self.write(tmp_path, "b", [1, 2, 1, 2])
        c = self.write(tmp_path, "c", [2, 2, 1, 1])
        assert run(["ari", a, a], capsys)[1] == "1.000000\n"
        assert run(["ari", a, b], capsys)[1] == "-0.500000\n"
        assert run(["ari", c, b], capsys)[1] == "-0.500000\n"

    def test_errors(self, tmp_path, capsys):
        a = self.write(tmp_path, "a", [1, 1, 2, 2])
        short = self.write(tmp_path, "s", [1, 2])
        junk = self.write(tmp_path, "j", ["1", "x", "2", "2"])
        assert run(["ari", a, short], capsys)[0] == 2
        assert run(["ari", a, junk], capsys)[0] == 2


class TestSimulate:
    ARGS = ["simulate", "--case", 1, "--k0", 2, "--n", 12, "--replicates", 3,
            "--keep", 200, "--burn", 50, "--seed", 5]

    def test_outputs(self, tmp_path, capsys):
        code, out, _ = run(self.ARGS + ["--out", tmp_path / "r", "--workers", 1], capsys)
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "r" / "results.csv").open()))
        raw = (tmp_path / "r" / "results.csv").read_text().splitlines()
        assert raw[0] == "replicate,seed,k_hat,mean_ari" and len(raw) == 4
        summary = list(csv.DictReader((tmp_path / "r" / "summary.csv").open()))[0]
        bias, rmse = bias_rmse([int(r["k_hat"]) for r in rows], 2)
        assert float(summary["bias"]) == pytest.approx(bias, abs=1e-6)
        assert float(summary["rmse"]) == pytest.approx(rmse, abs=1e-6)
        assert out == (tmp_path / "r" / "summary.csv").read_text()
        assert b"\r" not in (tmp_path / "r" / "results.csv").read_bytes()

    def test_worker_count_does_not_change_bytes(self, tmp_path, capsys):
        run(self.ARGS + ["--out", tmp_path / "one", "--workers", 1], capsys)
        run(self.ARGS + ["--out", tmp_path / "two", "--workers", 2], capsys)
        for name in ("results.csv", "summary.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_parse_config_text():
    vals = parse_config_text("case=4\nk0 = 5 # comment\n\nrho=0.5\nkeep=100\nseed=0x10\n")
    assert vals == {"case_id": 4, "k0": 5, "rho": 0.5, "n_keep": 100, "master_seed": 16}
    with pytest.raises(UsageError):
        parse_config_text("colour=blue\n")
    with pytest.raises(UsageError):
        parse_config_text("n=fifty\n")
    with pytest.raises(UsageError):
        parse_config_text("just a line\n")


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(case_id=5)
    with pytest.raises(ValueError):
        ExperimentConfig(rho=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(replicates=0)
    cfg = ExperimentConfig(n=75, rho=0.5)
    assert cfg.hp.delta_n == 0.05 and cfg.hp.k_max == 8
    assert cfg.replicate_seed(0) != cfg.replicate_seed(1)
