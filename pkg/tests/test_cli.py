import json
import re
import shutil
import subprocess

import pytest

from nodcap.cli import main
from nodcap.encodings import corpus_dir

CORPUS = corpus_dir()


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_dual(capsys):
    code, out, _ = run(capsys, "dual", "?[2] (1 + 1)")
    assert code == 0
    assert out == "![2] (bot & bot)\n"


def test_dual_parse_error(capsys):
    code, out, err = run(capsys, "dual", "?[0] 1")
    assert code == 2
    assert out == ""
    assert "index must be positive" in err and "1:" in err


def test_outcomes_race2(capsys):
    code, out, _ = run(capsys, "outcomes", CORPUS / "race2.ncp", "--def", "Race2")
    assert code == 0
    assert out.startswith("2 outcomes\n")
    assert "fingerprint: a -> inl, b -> inr" in out


def test_outcomes_is_byte_deterministic(capsys):
    first = run(capsys, "outcomes", CORPUS / "race3.ncp", "--def", "Race3")
    second = run(capsys, "outcomes", CORPUS / "race3.ncp", "--def", "Race3")
    assert first == second
    assert first[1].startswith("6 outcomes\n")


def test_outcomes_budget(capsys):
    code, out, err = run(capsys, "outcomes", CORPUS / "race3.ncp", "--def", "Race3", "--max-states", "5")
    assert code == 3
    assert "budget" in err


def test_check_deadlock_fails(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "deadlock.ncp")
    assert code == 1
    assert "FAIL Deadlock" in out
    assert "cut endpoints not in distinct components" in out


def test_check_pass_with_derivation(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "race2.ncp", "--emit-derivation")
    assert code == 0
    assert out.startswith("PASS Race2\n")
    assert "Cont!" in out


def test_check_json_derivation(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "unbound.ncp", "--emit-derivation", "--json")
    assert code == 0
    tree = json.loads(out.split("\n", 1)[1])
    assert tree["rule"] == "Cut"


def test_step_and_canon(capsys):
    code, out, _ = run(capsys, "step", CORPUS / "race2.ncp", "--def", "Race2")
    assert code == 0
    assert out.startswith("2 reducts\n")
    assert out.count("β⋆") == 2
    code, out, _ = run(capsys, "canon", CORPUS / "erratum.ncp", "--def", "Erratum")
    assert code == 0
    assert out.startswith("nu v0_0 v0_0'.")


def test_missing_def(capsys):
    code, _, err = run(capsys, "canon", CORPUS / "race2.ncp", "--def", "Nope")
    assert code == 1
    assert "Nope" in err


def test_parse_error_in_file(tmp_path, capsys):
    f = tmp_path / "bad.ncp"
    f.write_text("def A = a<->\n")
    code, _, err = run(capsys, "check", f)
    assert code == 2
    assert re.search(r"parse error: \d+:\d+: expected a name", err)


def test_missing_file(capsys):
    code, _, err = run(capsys, "check", "/nonexistent/file.ncp")
    assert code == 1
    assert err


def test_corpus(capsys):
    code, out, _ = run(capsys, "corpus")
    assert code == 0
    assert "MISMATCH" not in out
    assert "Race3" in out


@pytest.mark.skipif(shutil.which("nodcap") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["nodcap", "dual", "1 * bot"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout == "bot % 1\n"
