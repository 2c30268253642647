import os
import subprocess
import sys
from pathlib import Path

import pytest

from nag.cli import main, pipeline_smoke


def run_cli(args, env=None):
    """Invoke the entry point in-process, capturing stdout."""
    import contextlib
    import io

    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(args)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "corpus"
    code, _, _ = run_cli(["synth", "--out", str(path), "--classes", "120",
                          "--seed", "3"])
    assert code == 0
    return path


def test_check_happy_path(corpus_dir):
    body = corpus_dir / "classes" / "c00000" / "body_0.ast"
    ctx = corpus_dir / "classes" / "c00000" / "context.txt"
    code, out, _ = run_cli(["check", str(body), "--context", str(ctx)])
    assert code == 0
    assert "undeclaredVarAccess\t" in out
    assert "passAllChecks\ttrue" in out


def test_check_reports_failed_parse(corpus_dir, tmp_path):
    bad = tmp_path / "bad.ast"
    bad.write_text("(Start#a1", encoding="utf-8")
    ctx = corpus_dir / "classes" / "c00000" / "context.txt"
    code, out, err = run_cli(["check", str(bad), "--context", str(ctx)])
    assert code == 0
    assert "parses\t0\t1" in out


def test_generate_requires_model(corpus_dir):
    ctx = corpus_dir / "classes" / "c00000" / "context.txt"
    ev = corpus_dir / "classes" / "c00000" / "evidence.txt"
    code, _, _ = run_cli(["generate", "--context", str(ctx),
                          "--evidence", str(ev)])
    assert code == 1


def test_train_generate_eval_roundtrip(corpus_dir, tmp_path):
    model = tmp_path / "model.count"
    code, out, _ = run_cli(["train", "--corpus", str(corpus_dir),
                            "--model", str(model), "--kind", "count"])
    assert code == 0 and model.exists()

    code, out, _ = run_cli(["eval-next-token", "--model", str(model),
                            "--corpus", str(corpus_dir), "--format", "tsv"])
    assert code == 0
    rows = dict(line.split("\t", 1) for line in out.strip().splitlines())
    assert set(rows) == {"apiCalls", "objectInit", "types", "variableAccess",
                         "allTerminals"}

    cdir = corpus_dir / "classes" / "c00000"
    out_dir = tmp_path / "cands"
    code, out, _ = run_cli([
        "generate", "--context", str(cdir / "context.txt"),
        "--evidence", str(cdir / "evidence.txt"), "--model", str(model),
        "--beam", "3", "--seed", "1", "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "candidate_0.ast").exists()
    assert "logProb" in out

    code, out, _ = run_cli(["fidelity", "--reference", str(cdir / "body_0.ast"),
                            "--candidates", str(out_dir), "--format", "tsv"])
    assert code == 0
    assert "set_of_api_calls" in out


def test_latent_training_via_cli(corpus_dir, tmp_path):
    model = tmp_path / "model.latent.npz"
    code, out, _ = run_cli(["train", "--corpus", str(corpus_dir),
                            "--model", str(model), "--kind", "latent",
                            "--steps", "3", "--dim", "8", "--seed", "2"])
    assert code == 0 and model.exists()
    code, out, _ = run_cli(["eval-next-token", "--model", str(model),
                            "--corpus", str(corpus_dir), "--format", "tsv"])
    assert code == 0


def test_smoke_summary_deterministic(corpus_dir):
    a = pipeline_smoke(corpus_dir, seed=5, beam=3, limit=4)
    b = pipeline_smoke(corpus_dir, seed=5, beam=3, limit=4)
    assert a == b
    assert "static checks" in a and "fidelity" in a


def test_masked_smoke_variable_access_is_clean(corpus_dir):
    text = pipeline_smoke(corpus_dir, seed=5, beam=1, mask=True, limit=6)
    line = next(l for l in text.splitlines()
                if l.startswith("No variable access errors"))
    assert "100.00%" in line


def test_config_file_rejects_unknown_keys(tmp_path, corpus_dir):
    cfg = tmp_path / "nag.cfg"
    cfg.write_text("wibble = 1\n", encoding="utf-8")
    body = corpus_dir / "classes" / "c00000" / "body_0.ast"
    ctx = corpus_dir / "classes" / "c00000" / "context.txt"
    code, _, err = run_cli(["--config", str(cfg), "check", str(body),
                            "--context", str(ctx)])
    assert code == 1
    assert "unknown configuration key" in err


def test_config_file_supplies_defaults(tmp_path, corpus_dir):
    cfg = tmp_path / "nag.cfg"
    cfg.write_text("format = text\n", encoding="utf-8")
    body = corpus_dir / "classes" / "c00000" / "body_0.ast"
    ctx = corpus_dir / "classes" / "c00000" / "context.txt"
    code, out, _ = run_cli(["--config", str(cfg), "check", str(body),
                            "--context", str(ctx)])
    assert code == 0
    assert "No undeclared variable access" in out


def test_nag_seed_environment_default(corpus_dir, tmp_path, monkeypatch):
    model = tmp_path / "m.count"
    run_cli(["train", "--corpus", str(corpus_dir), "--model", str(model)])
    cdir = corpus_dir / "classes" / "c00000"
    monkeypatch.setenv("NAG_SEED", "42")
    args = ["generate", "--context", str(cdir / "context.txt"),
            "--evidence", str(cdir / "evidence.txt"), "--model", str(model),
            "--sample", "--beam", "1"]
    _, out1, _ = run_cli(args)
    _, out2, _ = run_cli(args)
    monkeypatch.setenv("NAG_SEED", "43")
    _, out3, _ = run_cli(args)
    assert out1 == out2
    assert out1 != out3


def test_console_script_entry_point(corpus_dir):
    result = subprocess.run(
        [sys.executable, "-m", "nag.cli", "--help"],
        capture_output=True, text=True)
    assert result.returncode == 0
    assert "generate" in result.stdout
