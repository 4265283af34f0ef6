import json
import subprocess
import sys

import numpy as np
import pytest

from sigbasis import cli
from sigbasis.basis import is_basis_of_words
from sigbasis.pathio import decode_paths_binary, parse_paths_csv
from sigbasis.regress import ExperimentConfig, algorithm1
from sigbasis.signature import sig_backward
from sigbasis.stochastic import SdeSpec, gram_report, simulate
from sigbasis.words import WordSet, suffix_words, words_up_to


def run(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_shuffle(capsys):
    code, out, _ = run(["shuffle", "1", "21"], capsys)
    assert (code, out) == (0, "121 + 2*211\n")
    code, out, _ = run(["shuffle", "1", "21", "--format", "json"], capsys)
    doc = json.loads(out)
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["config"]["w"] == "1" and doc["result"]["terms"] == {"121": "1", "211": "2"}


def test_basis_gen_pipe_check():
    gen = subprocess.run([sys.executable, "-m", "sigbasis.cli", "basis", "gen", "--family", "suffix",
                          "--order", "3", "--dim", "1"], capture_output=True, text=True, check=True)
    chk = subprocess.run([sys.executable, "-m", "sigbasis.cli", "basis", "check", "--order", "3"],
                         input=gen.stdout, capture_output=True, text=True)
    assert chk.returncode == 0
    res = json.loads(chk.stdout)["result"]
    assert (res["verdict"], res["rank"]) == ("basis", 8)
    assert res["necessary_filter"]["passed"]


def test_basis_check_matches_library(tmp_path, capsys):
    f = tmp_path / "b.json"
    B = WordSet.from_json({"d": 1, "N": 4, "words": ["101", "110", "0101", "0110", "1001", "1010"]})
    f.write_text(B.dumps())
    code, out, _ = run(["basis", "check", "--set", str(f)], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    expected = is_basis_of_words(B, 4).to_json()
    assert {k: res[k] for k in expected} == expected


def test_padded_generation_is_seeded(capsys):
    a = run(["basis", "gen", "--family", "prefix_padded", "--order", "3", "--seed", "4"], capsys)[1]
    b = run(["basis", "gen", "--family", "prefix_padded", "--order", "3", "--seed", "4"], capsys)[1]
    assert a == b


def test_sig_compute_single_row_is_invalid(tmp_path, capsys):
    f = tmp_path / "one.csv"
    f.write_text("t,x1\n0,1\n")
    code, out, err = run(["sig", "compute", "--paths", str(f), "--order", "2"], capsys)
    assert code == 1 and out == "" and "two timestamps" in err


def test_sig_compute_matches_library(tmp_path, capsys):
    f = tmp_path / "p.csv"
    code, _, _ = run(["simulate", "--n", "3", "--steps", "7", "--seed", "2", "--out", str(f)], capsys)
    assert code == 0
    paths = parse_paths_csv(f.read_text())
    code, out, _ = run(["sig", "compute", "--paths", str(f), "--order", "3", "--words", "suffix",
                        "--direction", "bwd", "--count-ops"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    for item, p in zip(res["paths"], paths):
        sv, ops = sig_backward(p, suffix_words(3, 1))
        assert item["values"] == sv.to_json() and item["ops"] == ops.elementary_ops
    code, out, _ = run(["sig", "compute", "--paths", str(f), "--order", "2", "--emit", "csv"], capsys)
    lines = out.splitlines()
    assert lines[0].startswith("# schema_version=") and lines[1].startswith("# config=")
    assert lines[2] == "path,e,0,1,00,01,10,11"


def test_simulate_binary_matches_library(tmp_path, capsys):
    f = tmp_path / "p.bin"
    assert run(["simulate", "--process", "ou", "--n", "4", "--steps", "5", "--seed", "9",
                "--out", str(f)], capsys)[0] == 0
    got = decode_paths_binary(f.read_bytes())
    want = simulate(SdeSpec("ou"), 5, 4, 9)
    assert np.array_equal(np.stack([p.values for p in got]), want.values)


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv(cli.SEED_ENV, "17")
    a = run(["simulate", "--n", "2", "--steps", "3"], capsys)[1]
    b = run(["simulate", "--n", "2", "--steps", "3", "--seed", "17"], capsys)[1]
    assert a == b
    monkeypatch.setenv(cli.SEED_ENV, "x")
    assert run(["simulate"], capsys)[0] == 1


def test_gram_matches_library(capsys):
    code, out, _ = run(["gram", "--order", "2", "--words", "all", "--n", "300", "--seed", "1", "--null-check"], capsys)
    res = json.loads(out)["result"]
    lib = gram_report(simulate(SdeSpec("bm"), 100, 300, 1), words_up_to(2, 1))
    assert res["eigenvalues"] == lib.to_json()["eigenvalues"]
    assert res["null_direction_residual"] < 1e-6


def test_experiment_regression_matches_library(capsys):
    argv = ["experiment", "regression", "--order", "2", "--n-train", "60", "--n-test", "200",
            "--batches", "3", "--steps", "10", "--seed", "3", "--no-timing"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    lib = algorithm1(ExperimentConfig(N=2, n_train=60, n_test=200, batches=3, K=10, seed=3))
    assert json.loads(out)["result"] == json.loads(json.dumps(lib.to_json(include_timing=False)))
    code, out, _ = run(argv + ["--emit", "csv"], capsys)
    assert out.splitlines()[2] == "batch,mse_all,mse_suffix,diff,lambda_all,lambda_suffix"
    assert len(out.splitlines()) == 3 + 3


def test_experiment_timing(capsys):
    code, out, _ = run(["experiment", "timing", "--orders", "2,3", "--n-paths", "50", "--n-fit", "50",
                        "--repeats", "1", "--emit", "csv"], capsys)
    assert code == 0 and len(out.splitlines()) == 5
    assert run(["experiment", "timing", "--orders", "2,x"], capsys)[0] == 1


@pytest.mark.parametrize("argv", [["bogus"], ["shuffle", "1"], ["sig", "compute", "--order", "2"],
                                  ["basis", "gen", "--family", "suffix", "--order", "2", "--nope"]])
def test_usage_errors_exit_1(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1 and "usage:" in err and out == ""


def test_bad_inputs_exit_1(tmp_path, capsys):
    assert run(["shuffle", "1", "3", "--dim", "2"], capsys)[0] == 1
    bad = tmp_path / "b.json"
    bad.write_text("{not json")
    assert run(["basis", "check", "--set", str(bad)], capsys)[0] == 1
    assert run(["sig", "compute", "--paths", str(tmp_path / "missing.csv"), "--order", "2"], capsys)[0] == 1


def test_invariant_violation_exit_2(monkeypatch, capsys):
    from sigbasis.errors import InvariantError

    def boom(*a, **k):
        raise InvariantError("rank mismatch")

    monkeypatch.setattr(cli.basis, "construct_family", boom)
    code, _, err = run(["basis", "gen", "--family", "suffix", "--order", "2"], capsys)
    assert code == 2 and "rank mismatch" in err
