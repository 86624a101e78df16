import subprocess
import sys

import pytest

from argus_htr import cli
from argus_htr.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

COMMANDS = ["synth", "preprocess", "train", "decode", "eval", "dict", "gradcheck"]


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("command", COMMANDS)
def test_help(command, capsys):
    assert main([command, "--help"]) == EXIT_OK
    assert "--seed" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["gradcheck", "--bogus"]) == EXIT_USAGE
    assert main(["eval", "--hyp", "x"]) == EXIT_USAGE
    assert main(["gradcheck", "--cell", "gru"]) == EXIT_USAGE
    bad = write(tmp_path / "bad.cfg", "nonsense\n")
    assert main(["gradcheck", "--config", bad]) == EXIT_USAGE
    unknown = write(tmp_path / "u.cfg", "colour = red\n")
    assert main(["gradcheck", "--config", unknown]) == EXIT_USAGE
    assert main(["dict", "--data", str(tmp_path), "--out", "x", "--min-count", "0"]) == EXIT_USAGE


def test_eval_identical(tmp_path, capsys):
    ref = write(tmp_path / "ref.tsv", "p/l0\tab cd\np/l1\tef\n")
    assert main(["eval", "--hyp", ref, "--ref", ref]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "WER 0.00 CER 0.00"


def test_eval_errors_and_rates(tmp_path, capsys):
    ref = write(tmp_path / "ref.tsv", "a\tone two three four\n")
    hyp = write(tmp_path / "hyp.tsv", "a\tone two tree four\n")
    assert main(["eval", "--hyp", hyp, "--ref", ref]) == EXIT_OK
    assert capsys.readouterr().out.strip().startswith("WER 25.00")
    other = write(tmp_path / "o.tsv", "b\tone\n")
    assert main(["eval", "--hyp", other, "--ref", ref]) == EXIT_DATA
    assert main(["eval", "--hyp", str(tmp_path / "missing.tsv"), "--ref", ref]) == EXIT_DATA
    dup = write(tmp_path / "d.tsv", "a\tx\na\ty\n")
    assert main(["eval", "--hyp", dup, "--ref", dup]) == EXIT_DATA


def test_gradcheck_exit_codes(monkeypatch, capsys):
    assert main(["gradcheck", "--cell", "mdleaky"]) == EXIT_OK
    assert main(["gradcheck", "--cell", "mdlstm", "--quiet"]) == EXIT_OK
    monkeypatch.setattr(cli, "check_cell", lambda *a, **k: 0.5)
    assert main(["gradcheck"]) == EXIT_NUMERIC
    assert "gradient check failed" in capsys.readouterr().err


def test_config_file_supplies_options(tmp_path, capsys):
    ref = write(tmp_path / "ref.tsv", "a\tx y\n")
    hyp = write(tmp_path / "hyp.tsv", "a\tx z\n")
    cfg = write(tmp_path / "run.cfg", f"# eval settings\nhyp = {hyp}\nref = {ref}\n")
    assert main(["eval", "--config", cfg]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "WER 50.00 CER 33.33"
    # explicit flags win over the file
    assert main(["eval", "--config", cfg, "--hyp", ref]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "WER 0.00 CER 0.00"
    assert main(["eval", "--config", str(tmp_path / "none.cfg")]) == EXIT_DATA


def test_missing_inputs_are_data_errors(tmp_path):
    assert main(["dict", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "l.txt")]) == EXIT_DATA
    assert main(["decode", "--model", str(tmp_path / "m.args"), "--in", str(tmp_path),
                 "--out", str(tmp_path / "o.tsv")]) == EXIT_DATA


def test_pipeline(tmp_path, capsys):
    data, pre, run = tmp_path / "data", tmp_path / "pre", tmp_path / "run"
    assert main(["synth", "--out", str(data), "--pages", "3", "--glyphs", "abc", "--seed", "4", "--quiet"]) == EXIT_OK
    assert (data / "alphabet.txt").exists()
    assert main(["preprocess", "--in", str(data), "--out", str(pre), "--quiet"]) == EXIT_OK
    assert main(["dict", "--data", str(data), "--out", str(tmp_path / "lex.txt"), "--quiet"]) == EXIT_OK
    assert main(["train", "--data", str(pre), "--alphabet", str(data / "alphabet.txt"), "--out", str(run),
                 "--tiny", "--epochs", "2", "--lr", "1e-3", "--preprocessed", "--quiet"]) == EXIT_OK
    assert (run / "metrics.csv").read_text().count("\n") == 3
    hyp = tmp_path / "hyp.tsv"
    assert main(["decode", "--model", str(run / "checkpoint.args"), "--in", str(pre), "--preprocessed",
                 "--lexicon", str(tmp_path / "lex.txt"), "--out", str(hyp), "--quiet"]) == EXIT_OK
    rows = hyp.read_text(encoding="utf-8").splitlines()
    assert len(rows) == 3 and all("\t" in r for r in rows)
    ref = write(tmp_path / "ref.tsv", "".join(f"{r.split(chr(9))[0]}\tabc\n" for r in rows))
    capsys.readouterr()
    assert main(["eval", "--hyp", str(hyp), "--ref", ref]) == EXIT_OK
    assert capsys.readouterr().out.startswith("WER ")
    # resume past the end is a no-op, a wrong theta is a usage error
    assert main(["train", "--data", str(pre), "--alphabet", str(data / "alphabet.txt"), "--out", str(run),
                 "--tiny", "--epochs", "2", "--lr", "1e-3", "--preprocessed", "--resume", "--quiet"]) == EXIT_OK
    assert main(["decode", "--model", str(run / "checkpoint.args"), "--in", str(pre), "--preprocessed",
                 "--lexicon", str(tmp_path / "lex.txt"), "--theta", "2", "--out", str(hyp)]) == EXIT_USAGE


def test_synth_is_seeded(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--out", str(tmp_path / name), "--pages", "2", "--seed", "9", "--quiet"]) == EXIT_OK
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "argus_htr", "eval", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--hyp" in r.stdout
