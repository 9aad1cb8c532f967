import json
import subprocess
import sys

import pytest

from spsk.cli import EXIT_DATA, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from spsk.io import load_sketch_set


@pytest.fixture
def files(tmp_path):
    b = tmp_path / "b.txt"
    b.write_text("d=100\n0 2 5\n0 2 6\n\n50 60 70 80\n")
    r = tmp_path / "r.txt"
    r.write_text("d=4\n0:3.0 1:4.0\n0:1.0 1:2.0\n2:1 3:-1\n")
    return tmp_path, b, r


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestPlan:
    def test_binary(self, capsys):
        code, out, _ = run(capsys, "plan", "binary", "--n", 16, "--psi", 3, "--r", 20, "--eps", 1)
        assert code == EXIT_OK
        assert "144" in out and "LargeDeviation" in out

    def test_csv_and_flags_before_subcommand(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "--cap-psi", 2, "--eps", 0.5, "plan", "real")
        assert code == EXIT_OK
        assert out.splitlines() == ["field,value", "N,160", "k,2"]

    def test_pairwise_domain_error_is_usage(self, capsys):
        assert run(capsys, "plan", "pairwise", "--r", 1)[0] == EXIT_USAGE

    def test_missing_flag(self, capsys):
        code, _, err = run(capsys, "plan", "binary", "--n", 16)
        assert code == EXIT_USAGE and "--psi" in err


class TestUsage:
    def test_unknown_flag(self, capsys):
        assert run(capsys, "plan", "binary", "--bogus")[0] == EXIT_USAGE

    def test_unknown_command(self, capsys):
        assert run(capsys, "frobnicate")[0] == EXIT_USAGE

    def test_help(self, capsys):
        assert run(capsys, "--help")[0] == EXIT_OK

    def test_seed_env(self, capsys, files, monkeypatch):
        tmp, b, _ = files
        monkeypatch.setenv("SPSK_SEED", "42")
        assert run(capsys, "sketch", "--scheme", "bin", "--input", b, "--output", tmp / "s", "--buckets", 16)[0] == 0
        assert load_sketch_set(tmp / "s").map_seed == 42
        monkeypatch.setenv("SPSK_SEED", "nope")
        assert run(capsys, "plan", "pairwise", "--r", 3)[0] == EXIT_USAGE

    def test_seed_flag_overrides_env(self, capsys, files, monkeypatch):
        tmp, b, _ = files
        monkeypatch.setenv("SPSK_SEED", "42")
        run(capsys, "sketch", "--scheme", "bin", "--input", b, "--output", tmp / "s", "--buckets", 16, "--seed", 7)
        assert load_sketch_set(tmp / "s").map_seed == 7


class TestSketchAndQuery:
    def test_binary_pipeline(self, capsys, files):
        tmp, b, _ = files
        s = tmp / "b.spsk"
        assert run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--buckets", 64, "--seed", 3)[0] == 0
        code, out, _ = run(capsys, "--format", "csv", "dist", "--input", s, "0", "1")
        assert code == 0
        assert out.splitlines()[0] == "a,b,hamming"
        assert float(out.splitlines()[1].split(",")[2]) <= 2
        code, out, _ = run(capsys, "dist", "--input", s)
        assert code == 0 and len(out.splitlines()) == 1 + 6
        assert run(capsys, "ip", "--input", s, "0", "1")[0] == 0

    def test_binary_planned(self, capsys, files):
        tmp, b, _ = files
        s = tmp / "b.spsk"
        assert run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--r", 8, "--eps", 1)[0] == 0
        fs = load_sketch_set(s)
        assert (fs.n_buckets, fs.replication) == (16 * 16, 1)

    def test_real_pipeline(self, capsys, files):
        tmp, _, r = files
        s = tmp / "r.spsk"
        assert run(capsys, "sketch", "--scheme", "REAL", "--input", r, "--output", s, "--eps", 0.5)[0] == 0
        assert load_sketch_set(s).n_buckets == 25_000  # Psi = 25 realized
        code, out, _ = run(capsys, "--format", "csv", "l2", "--input", s, "0", "1")
        assert code == 0 and abs(float(out.splitlines()[1].split(",")[2]) - 8) < 0.5
        code, out, _ = run(capsys, "kway", "--input", s, "0", "1", "2", "2")
        assert code == 0 and "kway_ip" in out

    def test_wrong_scheme_is_data_error(self, capsys, files):
        tmp, b, _ = files
        s = tmp / "b.spsk"
        run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--buckets", 8)
        assert run(capsys, "l2", "--input", s, "0", "1")[0] == EXIT_DATA

    def test_unknown_id(self, capsys, files):
        tmp, b, _ = files
        s = tmp / "b.spsk"
        run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--buckets", 8)
        assert run(capsys, "dist", "--input", s, "0", "zz")[0] == EXIT_DATA

    def test_bad_input_is_data_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("d=2\n5\n")
        code, _, err = run(capsys, "sketch", "--scheme", "BIN", "--input", bad, "--output", tmp_path / "x", "--buckets", 8)
        assert code == EXIT_DATA and "line 2" in err
        assert run(capsys, "dist", "--input", tmp_path / "missing")[0] == EXIT_DATA

    def test_corrupt_sketch_file(self, capsys, tmp_path):
        f = tmp_path / "junk"
        f.write_bytes(b"SPSK\0\0")
        assert run(capsys, "dist", "--input", f)[0] == EXIT_DATA

    def test_index(self, capsys, files):
        tmp, b, _ = files
        s, idx = tmp / "b.spsk", tmp / "idx.json"
        run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--buckets", 64)
        assert run(capsys, "index", "build", "--input", s, "--r", 2, "--c", 2, "--output", idx)[0] == 0
        doc = json.loads(idx.read_text())
        assert doc["K"] >= 1 and doc["L"] >= 1
        code, out, _ = run(capsys, "--format", "csv", "index", "query", "--input", idx, "--query", s)
        assert code == 0
        rows = [line.split(",") for line in out.splitlines()[1:]]
        assert len(rows) == 4
        for q, match, dist, _ in rows:
            assert match != "" and float(dist) <= 4

    def test_index_detects_changed_sketches(self, capsys, files):
        tmp, b, _ = files
        s, idx = tmp / "b.spsk", tmp / "idx.json"
        run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--buckets", 64)
        run(capsys, "index", "build", "--input", s, "--r", 2, "--c", 2, "--output", idx)
        run(capsys, "sketch", "--scheme", "BIN", "--input", b, "--output", s, "--buckets", 64, "--seed", 1)
        assert run(capsys, "index", "query", "--input", idx, "--query", s)[0] == EXIT_DATA


class TestBench:
    def test_pass(self, capsys):
        code, out, _ = run(capsys, "bench", "lemma3", "--format", "csv")
        assert code == EXIT_OK
        assert out.splitlines()[0] == "experiment,check,params,empirical,bound,relation,slack,verdict"

    def test_reproducible(self, capsys):
        a = run(capsys, "bench", "kway", "--format", "csv", "--trials", 2000)[1]
        b = run(capsys, "bench", "kway", "--format", "csv", "--trials", 2000)[1]
        assert a == b

    def test_fail_exit_code(self, capsys):
        # the product-of-norms variance bound fails on the enumerated inputs
        code, out, _ = run(capsys, "bench", "rcs_ip", "--trials", 1000)
        assert code == EXIT_FAIL and "FAIL" in out

    def test_timing_column(self, capsys):
        out = run(capsys, "bench", "lemma3", "--format", "csv", "--timing", "--trials", 100)[1]
        assert out.splitlines()[0].endswith(",wall_s")

    def test_unknown_tag(self, capsys):
        assert run(capsys, "bench", "thm9")[0] == EXIT_USAGE

    def test_corpus_file(self, capsys, tmp_path):
        f = tmp_path / "c.txt"
        lines = ["d=500"] + [" ".join(str(i * 7 + j * 37 % 500) for j in range(1)) for i in range(5)]
        f.write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "bench", "thm2", "--input", f)
        assert code in (EXIT_OK, EXIT_FAIL) and "thm2" in out
        assert run(capsys, "bench", "lemma3", "--input", f)[0] == EXIT_USAGE


def test_console_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "spsk.cli", "plan", "pairwise", "--r", "2"], capture_output=True, text=True
    )
    assert out.returncode == 0 and "32" in out.stdout
