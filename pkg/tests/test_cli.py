import json
import re
import signal
import subprocess
import sys
import urllib.request

import pytest

from entrorec.cli import main
from entrorec.dataset import PageViewMatrix
from entrorec.recommender import KnowledgeBase


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_ingest_golden(tmp_path, capsys, fixtures_dir):
    out = tmp_path / "m.tsv"
    code, stdout, _ = run(capsys, "ingest", fixtures_dir / "golden.log", out)
    assert code == 0
    assert out.read_text() == (fixtures_dir / "golden.expected.tsv").read_text()
    assert "kept_sessions\t4\tkept_pages\t6" in stdout
    assert "skipped_lines\t1" in stdout


def test_ingest_assets_only_is_too_sparse(tmp_path, capsys):
    log = tmp_path / "assets.log"
    line = '9.9.9.9 - - [12/Mar/2012:10:00:{:02d} +0000] "GET /s{}.css HTTP/1.1" 200 10 "-" "x"\n'
    log.write_text("".join(line.format(i, i) for i in range(10)))
    code, _, err = run(capsys, "ingest", log, tmp_path / "m.tsv")
    assert code == 2
    assert err.startswith("error: ") and "dataset too sparse" in err
    assert len(err.strip().splitlines()) == 1


def test_ingest_strict_and_missing_file(tmp_path, capsys, fixtures_dir):
    code, _, err = run(capsys, "ingest", "--strict", fixtures_dir / "golden.log", tmp_path / "m.tsv")
    assert code == 2 and "line 39" in err
    code, _, err = run(capsys, "ingest", tmp_path / "none.log", tmp_path / "m.tsv")
    assert code == 2 and err.startswith("error: cannot read log")


def test_usage_errors_exit_1(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "train", "--beta", "high")[0] == 1
    code, _, err = run(capsys, "train")
    assert code == 1 and err.startswith("error: ") and "ENTROREC_MATRIX" in err


def test_non_numeric_port_env_is_usage_error(capsys, monkeypatch):
    monkeypatch.setenv("ENTROREC_PORT", "abc")
    code, _, err = run(capsys, "serve", "x.kb")
    assert code == 1 and "ENTROREC_PORT" in err


def test_env_overrides_paths(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ENTROREC_MATRIX", str(tmp_path / "env.tsv"))
    monkeypatch.setenv("ENTROREC_KB", str(tmp_path / "env.kb"))
    assert run(capsys, "synth", "--users-per-group", "10", "--pages-per-group", "6")[0] == 0
    assert run(capsys, "train")[0] == 0
    assert KnowledgeBase.read(tmp_path / "env.kb").entries


def test_synth_outputs(tmp_path, capsys):
    out = tmp_path / "m.tsv"
    code, stdout, _ = run(capsys, "synth", out, "--drift", "0", "--seed", "5")
    assert code == 0 and stdout.startswith("users\t120\tpages\t42\tdrifted\t0")
    assert PageViewMatrix.read(out).shape == (120, 42)
    labels = (tmp_path / "m.tsv.labels.tsv").read_text().splitlines()
    assert all(line.endswith("\t0") for line in labels[1:])
    code, _, err = run(capsys, "synth", out, "--p-in", "0.1", "--p-out", "0.2")
    assert code == 2 and err.startswith("error: ")


def test_train_full_beta_without_identical_rows(tmp_path, capsys):
    m = tmp_path / "m.tsv"
    rows = ["PVMATRIX v1", "\t".join(f"/p{j}" for j in range(4))]
    for i, cells in enumerate(["1 0 0 0", "0 1 0 0", "1 1 0 1", "0 0 1 1", "1 1 1 1"]):
        rows.append(f"s{i}\t" + cells.replace(" ", "\t"))
    m.write_text("\n".join(rows) + "\n")
    code, stdout, _ = run(capsys, "train", m, tmp_path / "kb", "--beta", "1.0", "--trust-out", tmp_path / "t.tsv")
    assert code == 0
    counts = [line.split("\t") for line in stdout.splitlines()[1:]]
    assert [c[2] for c in counts] == ["0", "0", "0", "0"]
    assert (tmp_path / "t.tsv").read_text() == "target\trecommender\tE_I\tE_II\tE_A\n"


def test_train_too_small(tmp_path, capsys):
    m = tmp_path / "m.tsv"
    m.write_text("PVMATRIX v1\n/a\t/b\ns0\t1\t0\n")
    code, _, err = run(capsys, "train", m, tmp_path / "kb")
    assert code == 2 and err.startswith("error: cannot split")


def test_evaluate_single_n(tmp_path, capsys):
    m = tmp_path / "m.tsv"
    run(capsys, "synth", m)
    prefix = tmp_path / "r"
    code, stdout, _ = run(capsys, "evaluate", m, "--top-n", "5", "--out-prefix", prefix)
    assert code == 0
    rows = [line for line in stdout.splitlines() if not line.startswith("#")]
    assert len(rows) == 2 and rows[1].startswith("proposed\t5\t")
    assert (tmp_path / "r.plot.csv").exists() and (tmp_path / "r.report.tsv").read_text() == stdout
    assert run(capsys, "evaluate", m, "--top-n", "two")[0] == 1


def test_serve_rejects_invalid_kb(tmp_path, capsys):
    kb = tmp_path / "bad.kb"
    kb.write_text("not a knowledge base\n")
    code, _, err = run(capsys, "serve", kb, "--port", "0")
    assert code == 2 and err.startswith("error: ")


def test_serve_process_answers_and_stops_on_sigterm(tmp_path, capsys):
    m, kb = tmp_path / "m.tsv", tmp_path / "kb"
    run(capsys, "synth", m, "--users-per-group", "15", "--pages-per-group", "8")
    run(capsys, "train", m, kb)
    proc = subprocess.Popen(
        [sys.executable, "-m", "entrorec", "serve", str(kb), "--port", "0"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        line = proc.stdout.readline()
        port = int(re.search(r":(\d+)$", line.strip()).group(1))
        with urllib.request.urlopen(f"http://127.0.0.1:{port}/health", timeout=10) as resp:
            assert json.loads(resp.read())["kb_users"] == 24
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
            pytest.fail("server did not stop on SIGTERM")
